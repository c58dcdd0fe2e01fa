mod common;

use confproj::compat::{check_compatibility, obstruction_at, sample_points};
use confproj::cone::canonicalize;
use confproj::expr::{coord_names, parse_expression};
use confproj::geometry::{invert_metric, thomas_symbol};
use confproj::jet::Jet;
use proptest::prelude::*;

use common::*;

fn close(a: &Jet, b: &Jet, tol: f64) -> bool {
    let scale = 1f64.max(a.value().abs()).max(b.value().abs());
    (a.value() - b.value()).abs() <= tol * scale
        && a.gradient().iter().zip(b.gradient()).all(|(x, y)| (x - y).abs() <= tol * scale.max(x.abs()))
        && a.hessian().iter().zip(b.hessian()).all(|(x, y)| (x - y).abs() <= tol * scale.max(x.abs()))
}

fn jet3() -> impl Strategy<Value = (Jet, Jet, Jet)> {
    any::<u64>().prop_map(|seed| {
        let mut r = rng(seed);
        let a = random_jet(&mut r, 3, 0.7, 2.0);
        let b = random_jet(&mut r, 3, -1.3, 2.0);
        let c = random_jet(&mut r, 3, 0.4, 2.0);
        (a, b, c)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn jet_ring_laws((a, b, c) in jet3()) {
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert!(close(&(&a * &b), &(&b * &a), 1e-15));
        prop_assert!(close(&(&(&a + &b) + &c), &(&a + &(&b + &c)), 1e-14));
        prop_assert!(close(&(&(&a * &b) * &c), &(&a * &(&b * &c)), 1e-13));
        prop_assert!(close(&(&a * &(&b + &c)), &(&(&a * &b) + &(&a * &c)), 1e-13));
        let one = Jet::constant(1.0, 3, 2).unwrap();
        prop_assert!(close(&(&a * &a.recip().unwrap()), &one, 1e-13));
        prop_assert!(close(&a.exp().ln().unwrap(), &a, 1e-13));
    }

    #[test]
    fn metric_inverse_is_two_sided(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = 2 + (seed % 3) as usize;
        let g = random_metric_jet(&mut r, n);
        let gi = invert_metric(&g).unwrap();
        for i in 0..n {
            for j in 0..n {
                let mut acc = Jet::constant(0.0, n, 2).unwrap();
                for k in 0..n {
                    acc = &acc + &(g.get(i, k) * gi.get(k, j));
                }
                let want = Jet::constant(if i == j { 1.0 } else { 0.0 }, n, 2).unwrap();
                prop_assert!(close(&acc, &want, 1e-12));
            }
        }
    }

    #[test]
    fn thomas_symbol_is_traceless(seed in any::<u64>()) {
        let mut r = rng(seed);
        let gamma = random_connection(&mut r, 2 + (seed % 4) as usize);
        prop_assert!(thomas_symbol(&gamma).max_trace() <= 1e-13);
    }

    #[test]
    fn printed_expressions_reparse(seed in any::<u64>()) {
        let names = coord_names(&["x", "y", "z"]);
        let src = random_expr(&mut rng(seed), 5);
        let e = parse_expression(&src, &names).unwrap();
        let printed = e.to_string();
        let again = parse_expression(&printed, &names).unwrap();
        prop_assert_eq!(&again, &e);
        prop_assert_eq!(again.to_string(), printed);
        let p = [0.25, -0.5, 0.75];
        prop_assert_eq!(again.value(&p).unwrap().to_bits(), e.value(&p).unwrap().to_bits());
    }

    #[test]
    fn parser_never_panics(src in "[xyz0-9.eE+*/^() -]{0,40}|\\PC{0,20}") {
        let names = coord_names(&["x", "y", "z"]);
        if let Ok(e) = parse_expression(&src, &names) {
            let _ = e.eval(&[0.1, 0.2, 0.3], 2);
        }
    }

    #[test]
    fn canonicalization_is_idempotent(v in prop::collection::vec(-10.0f64..10.0, 9)) {
        let mut g = v.clone();
        for i in 0..3 {
            for j in 0..i {
                g[i * 3 + j] = g[j * 3 + i];
            }
        }
        let c = canonicalize(&g);
        prop_assert_eq!(canonicalize(&c), c.clone());
        let max = c.iter().map(|x| x.abs()).fold(0.0, f64::max);
        prop_assert!(max == 1.0 || max == 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn condition_a_is_symmetric_and_trace_free(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = 2 + (seed % 3) as usize;
        let s = match seed % 3 {
            0 => round_trip(&mut r, n, 4).scenario,
            1 => modified_s(&mut r, n, 4),
            _ => unrelated(&mut r, n, 4),
        };
        for p in sample_points(&s) {
            let ob = obstruction_at(&s, &p).unwrap();
            let g = s.metric_at(&p, 0).unwrap();
            let gi = invert_metric(&g).unwrap();
            let at = |i: usize, j: usize, k: usize| ob.a[(i * n + j) * n + k];
            for i in 0..n {
                let mut trace = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        prop_assert_eq!(at(i, j, k), at(i, k, j));
                        trace += gi.get(j, k).value() * at(i, j, k);
                    }
                }
                prop_assert!(trace.abs() <= 1e-10 * ob.scale, "trace {}", trace);
            }
            for j in 0..n {
                for i in 0..n {
                    prop_assert_eq!(ob.b[j * n + i], -ob.b[i * n + j]);
                }
            }
            let t: Vec<f64> = (0..n).map(|k| (0..n).map(|p| ob.t.get(p, p, k).value()).sum()).collect();
            prop_assert!(t.iter().all(|x| x.abs() <= 1e-12 * ob.scale));
        }
    }

    #[test]
    fn compatibility_implies_eps(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = 2 + (seed % 3) as usize;
        let rt = round_trip(&mut r, n, 8);
        // an indefinite background so the null cone is not empty
        let mut rows = perturbed_identity(&mut r, n);
        rows[0][0] = format!("-({})", rows[0][0]);
        let phi = parse_expression(&rt.phi, &rt.scenario.coordinates).unwrap();
        let doc = serde_json::json!({
            "dimension": n, "coordinates": coords(n),
            "box": {"min": vec![-1.0; n], "max": vec![1.0; n]},
            "metric": rows,
            "connection": {"kind": "levi_civita", "metric": times_exp(&rows, &phi.source_text())},
            "samples": 8,
        });
        let s = confproj::scenario::load_scenario(&doc.to_string()).unwrap();
        let rep = check_compatibility(&s).unwrap();
        prop_assert!(rep.verdict.is_compatible());
        let eps = rep.max_eps.unwrap();
        prop_assert!(eps <= s.tolerances.residual, "eps {}", eps);
    }
}
