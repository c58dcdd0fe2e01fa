//! Random scenario and expression generators shared by the integration tests.
#![allow(dead_code)]

use confproj::geometry::{ConnectionValue, MetricValue};
use confproj::jet::Jet;
use confproj::scenario::{load_scenario, Scenario};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn coords(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

fn lit(c: f64) -> String {
    format!("({c:?})")
}

/// Random polynomial of degree ≤ 2 with coefficients in `[-bound, bound]`.
pub fn poly2(r: &mut ChaCha8Rng, n: usize, bound: f64) -> String {
    let x = coords(n);
    let mut terms = vec![lit(r.gen_range(-bound..bound))];
    for i in 0..n {
        terms.push(format!("{}*{}", lit(r.gen_range(-bound..bound)), x[i]));
        for j in i..n {
            terms.push(format!("{}*{}*{}", lit(r.gen_range(-bound..bound)), x[i], x[j]));
        }
    }
    terms.join(" + ")
}

/// Number of monomials of degree ≤ 2 in `n` variables.
pub fn monomials(n: usize) -> usize {
    1 + n + n * (n + 1) / 2
}

/// `identity + perturbation` with every entry perturbed by at most 0.03 on
/// `[-1, 1]^n`, so eigenvalues stay in `[1 − 0.03n, 1 + 0.03n]`.
pub fn perturbed_identity(r: &mut ChaCha8Rng, n: usize) -> Vec<Vec<String>> {
    let bound = 0.03 / monomials(n) as f64;
    let mut rows = vec![vec![String::new(); n]; n];
    for i in 0..n {
        for j in i..n {
            let p = poly2(r, n, bound);
            rows[i][j] = if i == j { format!("1 + {p}") } else { p };
            rows[j][i] = rows[i][j].clone();
        }
    }
    rows
}

pub fn times_exp(rows: &[Vec<String>], phi: &str) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| r.iter().map(|e| format!("({e})*exp(2*({phi}))")).collect())
        .collect()
}

fn unit_box(n: usize) -> Value {
    json!({"min": vec![-1.0; n], "max": vec![1.0; n]})
}

/// A compatible scenario `(g, Ϝ(g e^{2φ}) + δψ + δψ)` and its `φ`.
pub struct RoundTrip {
    pub scenario: Scenario,
    pub phi: String,
}

pub fn round_trip(r: &mut ChaCha8Rng, n: usize, samples: usize) -> RoundTrip {
    let g = perturbed_identity(r, n);
    let phi = poly2(r, n, 0.5);
    let psi: Vec<String> = (0..n).map(|_| poly2(r, n, 0.5)).collect();
    let doc = json!({
        "dimension": n,
        "coordinates": coords(n),
        "box": unit_box(n),
        "metric": g,
        "connection": {
            "kind": "projective_transform",
            "base": {"kind": "levi_civita", "metric": times_exp(&g, &phi)},
            "psi": psi,
        },
        "samples": samples,
        "seed": r.gen::<u32>(),
    });
    RoundTrip {
        scenario: load_scenario(&doc.to_string()).expect("generated scenario loads"),
        phi,
    }
}

/// `Γ = Ϝ(g) − S^i g_jk` with a random polynomial `S`; condition (A) holds
/// and condition (B) generically fails.
pub fn modified_s(r: &mut ChaCha8Rng, n: usize, samples: usize) -> Scenario {
    let g = perturbed_identity(r, n);
    let s: Vec<String> = (0..n).map(|_| poly2(r, n, 0.5)).collect();
    let doc = json!({
        "dimension": n, "coordinates": coords(n), "box": unit_box(n), "metric": g,
        "connection": {"kind": "modified_s", "s": s},
        "samples": samples, "seed": r.gen::<u32>(),
    });
    load_scenario(&doc.to_string()).unwrap()
}

/// `Γ` the Levi-Civita connection of an unrelated metric; both conditions fail.
pub fn unrelated(r: &mut ChaCha8Rng, n: usize, samples: usize) -> Scenario {
    let g = perturbed_identity(r, n);
    let mut other = perturbed_identity(r, n);
    for (i, row) in other.iter_mut().enumerate() {
        row[i] = format!("{} + 0.3*x1*x1", row[i]);
    }
    let doc = json!({
        "dimension": n, "coordinates": coords(n), "box": unit_box(n), "metric": g,
        "connection": {"kind": "levi_civita", "metric": other},
        "samples": samples, "seed": r.gen::<u32>(),
    });
    load_scenario(&doc.to_string()).unwrap()
}

/// Random jet with entries in `[-bound, bound]`.
pub fn random_jet(r: &mut ChaCha8Rng, n: usize, value: f64, bound: f64) -> Jet {
    let grad: Vec<f64> = (0..n).map(|_| r.gen_range(-bound..bound)).collect();
    let hess: Vec<f64> = (0..n * n).map(|_| r.gen_range(-bound..bound)).collect();
    Jet::from_parts(value, Some(&grad), Some(&hess), n).unwrap()
}

/// Order-2 metric jet near the identity.
pub fn random_metric_jet(r: &mut ChaCha8Rng, n: usize) -> MetricValue {
    MetricValue::from_upper(n, |i, j| {
        let v = if i == j { 1.0 } else { 0.0 } + r.gen_range(-0.1..0.1);
        Ok::<_, ()>(random_jet(r, n, v, 0.5))
    })
    .unwrap()
}

/// Order-0 symmetric connection with entries in `[-1, 1]`.
pub fn random_connection(r: &mut ChaCha8Rng, n: usize) -> ConnectionValue {
    let mut v = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let x = r.gen_range(-1.0..1.0);
                v[(i * n + j) * n + k] = x;
                v[(i * n + k) * n + j] = x;
            }
        }
    }
    ConnectionValue::from_values(&v, n, 0).unwrap()
}

/// Indefinite symmetric matrix: random signs on the diagonal (both present)
/// plus a small symmetric perturbation.
pub fn random_indefinite(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let neg = r.gen_range(1..n);
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        let mag = r.gen_range(0.5..2.0);
        g[i * n + i] = if i < neg { -mag } else { mag };
    }
    for i in 0..n {
        for j in i + 1..n {
            let x = r.gen_range(-0.2..0.2);
            g[i * n + j] = x;
            g[j * n + i] = x;
        }
    }
    g
}

/// Random expression source over `x`, `y`, `z`, total on `[-1, 1]^3`.
pub fn random_expr(r: &mut ChaCha8Rng, depth: u32) -> String {
    if depth == 0 || r.gen_bool(0.25) {
        return match r.gen_range(0..4) {
            0 => "x".into(),
            1 => "y".into(),
            2 => "z".into(),
            _ => lit((r.gen_range(-2.0..2.0f64) * 100.0).round() / 100.0),
        };
    }
    let a = random_expr(r, depth - 1);
    match r.gen_range(0..13) {
        0 => format!("({a} + {})", random_expr(r, depth - 1)),
        1 => format!("({a} - {})", random_expr(r, depth - 1)),
        2 | 3 => format!("({a} * {})", random_expr(r, depth - 1)),
        4 => format!("({a} / (2 + cos({})))", random_expr(r, depth - 1)),
        5 => format!("sin({a})"),
        6 => format!("cos({a})"),
        7 => format!("tanh({a})"),
        8 => format!("exp(0.5*tanh({a}))"),
        9 => format!("sqrt(1 + ({a})^2)"),
        10 => format!("log(2 + sin({a}))"),
        11 => format!("(tanh({a}))^{}", r.gen_range(2..4)),
        _ => format!("(1.5 + tanh({a}))^(0.5 + 0.25*tanh({}))", random_expr(r, depth - 1)),
    }
}
