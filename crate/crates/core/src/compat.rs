//! The compatibility criterion.
//!
//! For a metric representative `g` and a connection representative `Γ`:
//!
//! * `T^i_jk = Π^i_jk(Ϝ(g) − Γ)`,
//! * `T^i = (n+1)/((n+2)(n−1)) g^jk T^i_jk` and `T_i = g_ij T^j`,
//! * condition (A): `T^i_jk − g_jk T^i + (δ^i_j T_k + δ^i_k T_j)/(n+1) = 0`,
//! * condition (B): `∂_j T_i − ∂_i T_j = 0`.
//!
//! Both conditions holding on a simply connected chart means the structures
//! come from one metric `g · exp(2φ)` with `∂_i φ = T_i`. The weaker EPS test
//! checks that null geodesics of `[g]` are geodesics of `[Γ]`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{christoffel, christoffel_with_inverse, invert_metric, thomas_jets, ConnectionValue, MetricValue};
use crate::jet::{Jet, JetError};
use crate::linalg::jacobi_eigen;
use crate::scenario::{Scenario, Tolerances};

/// Relative bound on `|g(u,u)|` for an accepted null vector.
pub const NULL_TOLERANCE: f64 = 1e-10;

/// Number of worst points kept in a report.
pub const WORST_POINTS: usize = 5;

fn n_plus_one_inv(n: usize) -> f64 {
    1.0 / (n as f64 + 1.0)
}

/// `T = Π(Ϝ(g) − Γ)` in jet arithmetic.
pub fn compat_tensor(g: &MetricValue, gamma: &ConnectionValue) -> Result<ConnectionValue> {
    let lc = christoffel(g)?;
    Ok(thomas_jets(&lc.sub(gamma)))
}

/// `(T^i, T_i)` from the compatibility tensor.
pub fn trace_vector(g: &MetricValue, t: &ConnectionValue) -> Result<(Vec<Jet>, Vec<Jet>)> {
    let ginv = invert_metric(g)?;
    trace_vector_with_inverse(g, &ginv, t)
}

pub fn trace_vector_with_inverse(g: &MetricValue, ginv: &MetricValue, t: &ConnectionValue) -> Result<(Vec<Jet>, Vec<Jet>)> {
    let n = t.dim();
    if n < 2 {
        return Err(Error::InvalidInput(format!("trace vector needs dimension >= 2, got {n}")));
    }
    let coef = (n as f64 + 1.0) / ((n as f64 + 2.0) * (n as f64 - 1.0));
    let order = t.order();
    let ginv = ginv.truncate(order);
    let g = g.truncate(order);
    let up: Vec<Jet> = (0..n)
        .map(|i| {
            let mut acc = Jet::constant(0.0, n, order).unwrap();
            for j in 0..n {
                for k in 0..n {
                    acc = &acc + &(ginv.get(j, k) * t.get(i, j, k));
                }
            }
            acc.scale(coef)
        })
        .collect();
    let down = (0..n)
        .map(|i| {
            let mut acc = Jet::constant(0.0, n, order).unwrap();
            for j in 0..n {
                acc = &acc + &(g.get(i, j) * &up[j]);
            }
            acc
        })
        .collect();
    Ok((up, down))
}

/// Left side of condition (A) on value parts, flat `(i * n + j) * n + k`.
pub fn condition_a_residual(g: &MetricValue, t: &ConnectionValue, t_up: &[Jet], t_down: &[Jet]) -> Vec<f64> {
    let n = t.dim();
    let c = n_plus_one_inv(n);
    let mut a = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let mut v = t.get(i, j, k).value() - g.get(j, k).value() * t_up[i].value();
                if i == j {
                    v += c * t_down[k].value();
                }
                if i == k {
                    v += c * t_down[j].value();
                }
                a[(i * n + j) * n + k] = v;
                a[(i * n + k) * n + j] = v;
            }
        }
    }
    a
}

/// `B_ji = ∂_j T_i − ∂_i T_j`, row-major in `(j, i)`, exactly antisymmetric.
pub fn condition_b_residual(t_down: &[Jet]) -> Result<Vec<f64>> {
    let n = t_down.len();
    if let Some(low) = t_down.iter().find(|t| t.order() == 0) {
        return Err(JetError::OrderTooLow {
            needed: 1,
            got: low.order(),
        }
        .into());
    }
    let mut b = vec![0.0; n * n];
    for j in 0..n {
        for i in j + 1..n {
            let v = t_down[i].grad(j) - t_down[j].grad(i);
            b[j * n + i] = v;
            b[i * n + j] = -v;
        }
    }
    Ok(b)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Everything the criterion computes at one point.
#[derive(Debug, Clone)]
pub struct ObstructionData {
    pub point: Vec<f64>,
    pub t: ConnectionValue,
    pub t_up: Vec<Jet>,
    pub t_down: Vec<Jet>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `max(1, ‖Γ‖∞, ‖g‖∞, ‖g⁻¹‖∞)` used to normalize residuals.
    pub scale: f64,
}

impl ObstructionData {
    pub fn max_a(&self) -> f64 {
        max_abs(&self.a)
    }

    pub fn max_b(&self) -> f64 {
        max_abs(&self.b)
    }
}

/// Obstruction data from an order-2 metric and an order-1 connection.
pub fn obstruction(point: &[f64], g: &MetricValue, ginv: &MetricValue, gamma: &ConnectionValue) -> Result<ObstructionData> {
    let lc = christoffel_with_inverse(g, ginv)?;
    let t = thomas_jets(&lc.sub(gamma));
    let (t_up, t_down) = trace_vector_with_inverse(g, ginv, &t)?;
    let a = condition_a_residual(g, &t, &t_up, &t_down);
    let b = condition_b_residual(&t_down)?;
    let scale = 1f64.max(gamma.max_abs()).max(g.max_abs()).max(ginv.max_abs());
    Ok(ObstructionData {
        point: point.to_vec(),
        t,
        t_up,
        t_down,
        a,
        b,
        scale,
    })
}

/// Obstruction data for a scenario at `p`.
pub fn obstruction_at(s: &Scenario, p: &[f64]) -> Result<ObstructionData> {
    let g = s.metric_at(p, 2)?;
    let ginv = s.invert(&g, p)?;
    let gamma = s.connection_at(p, 1)?;
    obstruction(p, &g, &ginv, &gamma).map_err(|e| e.at_point(p))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullVector {
    pub point: Vec<f64>,
    pub u: Vec<f64>,
}

fn random_unit_in_span<R: Rng>(basis: &[Vec<f64>], n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v = vec![0.0; n];
        for b in basis {
            let c: f64 = rng.gen_range(-1.0..1.0);
            for (x, y) in v.iter_mut().zip(b) {
                *x += c * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            v.iter_mut().for_each(|x| *x /= norm);
            return v;
        }
    }
}

/// Random null vectors of the value part of `g`, built by pairing a vector
/// from the positive eigenspace with one from the negative eigenspace.
/// Definite metrics give an empty list.
pub fn sample_null_vectors<R: Rng>(point: &[f64], g: &MetricValue, count: usize, rng: &mut R) -> Result<Vec<NullVector>> {
    let n = g.dim();
    let det = g.determinant();
    if !(det.abs() > crate::geometry::DEGENERACY_TOLERANCE * g.max_abs().powi(n as i32)) {
        return Err(Error::DegenerateMetric {
            point: point.to_vec(),
            det,
        });
    }
    let eig = jacobi_eigen(&g.values(), n);
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda > 0.0 {
            pos.push(eig.vector(k));
        } else if lambda < 0.0 {
            neg.push(eig.vector(k));
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 8 * count.max(1) {
        attempts += 1;
        let a = random_unit_in_span(&pos, n, rng);
        let b = random_unit_in_span(&neg, n, rng);
        let qa = g.inner(&a, &a);
        let qb = g.inner(&b, &b);
        if !(qa > 0.0 && qb < 0.0) {
            continue;
        }
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let (sa, sb) = (1.0 / qa.sqrt(), sign / (-qb).sqrt());
        let mut u: Vec<f64> = a.iter().zip(&b).map(|(x, y)| sa * x + sb * y).collect();
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        u.iter_mut().for_each(|x| *x /= norm);
        if g.inner(&u, &u).abs() <= NULL_TOLERANCE {
            out.push(NullVector {
                point: point.to_vec(),
                u,
            });
        }
    }
    Ok(out)
}

/// Non-parallel part of `d = (Ϝ(g) − Γ)(u, u)` relative to `u`, divided by `‖u‖²`.
pub fn eps_residual(g: &MetricValue, gamma: &ConnectionValue, u: &[f64]) -> Result<f64> {
    let lc = christoffel(g)?;
    eps_residual_with(&lc, gamma, u)
}

/// As [`eps_residual`] with the Levi-Civita symbols already computed.
pub fn eps_residual_with(lc: &ConnectionValue, gamma: &ConnectionValue, u: &[f64]) -> Result<f64> {
    let uu: f64 = u.iter().map(|x| x * x).sum();
    if uu == 0.0 {
        return Err(Error::InvalidInput("EPS residual needs a nonzero vector".into()));
    }
    let d1 = lc.contract_twice(u);
    let d2 = gamma.contract_twice(u);
    let d: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a - b).collect();
    let du: f64 = d.iter().zip(u).map(|(a, b)| a * b).sum();
    let r = du / uu;
    let perp = d
        .iter()
        .zip(u)
        .map(|(a, b)| (a - r * b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(perp / uu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "compatible")]
    Compatible,
    #[serde(rename = "fails_A")]
    FailsA,
    #[serde(rename = "fails_B")]
    FailsB,
    #[serde(rename = "fails_A_and_B")]
    FailsAAndB,
}

impl Verdict {
    pub fn from_residuals(max_a: f64, max_b: f64, tolerance: f64) -> Verdict {
        match (max_a <= tolerance, max_b <= tolerance) {
            (true, true) => Verdict::Compatible,
            (false, true) => Verdict::FailsA,
            (true, false) => Verdict::FailsB,
            (false, false) => Verdict::FailsAAndB,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Compatible => "compatible",
            Verdict::FailsA => "fails_A",
            Verdict::FailsB => "fails_B",
            Verdict::FailsAAndB => "fails_A_and_B",
        }
    }

    pub fn is_compatible(self) -> bool {
        self == Verdict::Compatible
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsVerdict {
    Holds,
    Fails,
    Vacuous,
}

impl EpsVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            EpsVerdict::Holds => "holds",
            EpsVerdict::Fails => "fails",
            EpsVerdict::Vacuous => "vacuous",
        }
    }
}

/// Scale-normalized residuals at one sample point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub index: usize,
    pub point: Vec<f64>,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    /// Worst EPS residual over this point's null vectors; `None` if the cone is trivial.
    pub eps: Option<f64>,
    pub null_vectors: usize,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedPoint {
    pub index: usize,
    pub point: Vec<f64>,
    pub det: f64,
}

#[derive(Debug, Clone)]
pub struct CompatReport {
    pub points: Vec<PointSummary>,
    pub skipped: Vec<SkippedPoint>,
    pub max_a: f64,
    pub max_b: f64,
    /// `None` when no sample point had a nontrivial null cone.
    pub max_eps: Option<f64>,
    pub eps_vectors: usize,
    pub verdict: Verdict,
    pub eps_verdict: EpsVerdict,
    pub tolerances: Tolerances,
    pub samples: usize,
    pub seed: u64,
}

impl CompatReport {
    /// Points with the largest `max(A, B)`, worst first.
    pub fn worst(&self, count: usize) -> Vec<&PointSummary> {
        let mut idx: Vec<&PointSummary> = self.points.iter().collect();
        idx.sort_by(|x, y| y.a.max(y.b).total_cmp(&x.a.max(x.b)).then(x.index.cmp(&y.index)));
        idx.truncate(count);
        idx
    }
}

/// Deterministic per-point generator: stream `index` of the seeded ChaCha8.
pub fn point_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Sample point `index` of a scenario, together with its generator for any
/// further draws at that point.
pub fn sample_point(s: &Scenario, index: usize) -> (Vec<f64>, ChaCha8Rng) {
    let mut rng = point_rng(s.seed, index);
    let unit: Vec<f64> = (0..s.dimension).map(|_| rng.gen::<f64>()).collect();
    (s.sample_box.lerp(&unit), rng)
}

/// The scenario's `samples` sample points.
pub fn sample_points(s: &Scenario) -> Vec<Vec<f64>> {
    (0..s.samples).map(|k| sample_point(s, k).0).collect()
}

/// Evaluates one sample point: obstruction residuals plus the EPS test.
pub fn evaluate_point(s: &Scenario, index: usize) -> Result<PointSummary> {
    let (p, mut rng) = sample_point(s, index);
    evaluate_at(s, index, &p, &mut rng)
}

fn evaluate_at<R: Rng>(s: &Scenario, index: usize, p: &[f64], rng: &mut R) -> Result<PointSummary> {
    let g = s.metric_at(p, 2)?;
    let ginv = s.invert(&g, p)?;
    let gamma = s.connection_at(p, 1)?;
    let ob = obstruction(p, &g, &ginv, &gamma).map_err(|e| e.at_point(p))?;
    let lc = christoffel_with_inverse(&g, &ginv)?;
    let nulls = sample_null_vectors(p, &g, s.null_vectors_per_point(), rng)?;
    let eps = if nulls.is_empty() {
        None
    } else {
        let mut worst = 0.0f64;
        for nv in &nulls {
            worst = worst.max(eps_residual_with(&lc, &gamma, &nv.u)?);
        }
        Some(worst / ob.scale)
    };
    Ok(PointSummary {
        index,
        point: p.to_vec(),
        a: ob.max_a() / ob.scale,
        b: ob.max_b() / ob.scale,
        eps,
        null_vectors: nulls.len(),
        scale: ob.scale,
    })
}

/// Samples the scenario box and aggregates the criterion into a verdict.
pub fn check_compatibility(s: &Scenario) -> Result<CompatReport> {
    let results: Vec<Result<PointSummary>> = (0..s.samples).into_par_iter().map(|k| evaluate_point(s, k)).collect();
    let mut points = Vec::with_capacity(s.samples);
    let mut skipped = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(ps) => points.push(ps),
            Err(Error::DegenerateMetric { point, det }) => skipped.push(SkippedPoint { index, point, det }),
            Err(e) => return Err(e),
        }
    }
    // tolerate fewer than 1% degenerate samples
    if !skipped.is_empty() && skipped.len() * 100 >= s.samples {
        return Err(Error::TooManyDegenerate {
            count: skipped.len(),
            samples: s.samples,
            first: skipped[0].point.clone(),
        });
    }
    let max_a = points.iter().map(|p| p.a).fold(0.0, f64::max);
    let max_b = points.iter().map(|p| p.b).fold(0.0, f64::max);
    let max_eps = points.iter().filter_map(|p| p.eps).reduce(f64::max);
    let eps_vectors = points.iter().map(|p| p.null_vectors).sum();
    let tol = s.tolerances.residual;
    let eps_verdict = match max_eps {
        None => EpsVerdict::Vacuous,
        Some(e) if e <= tol => EpsVerdict::Holds,
        Some(_) => EpsVerdict::Fails,
    };
    Ok(CompatReport {
        points,
        skipped,
        max_a,
        max_b,
        max_eps,
        eps_vectors,
        verdict: Verdict::from_residuals(max_a, max_b, tol),
        eps_verdict,
        tolerances: s.tolerances,
        samples: s.samples,
        seed: s.seed,
    })
}
