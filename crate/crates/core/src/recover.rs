//! Reconstruction of the conformal factor from an exact 1-form `T_i dx^i`.
//!
//! `φ(x)` is the line integral of `T_i` from a base point, so `φ(base) = 0`.
//! Integrals use adaptive composite 8-node Gauss-Legendre quadrature.

use rayon::prelude::*;

use crate::compat::{sample_points, trace_vector_with_inverse};
use crate::error::{Error, Result};
use crate::geometry::{
    christoffel, christoffel_with_inverse, conformal_rescale_metric, thomas_jets, thomas_symbol, MetricValue,
};
use crate::jet::Jet;
use crate::scenario::Scenario;

/// Bisection depth after which quadrature gives up.
pub const MAX_LEVELS: u32 = 20;

/// Sample points used by [`verify_recovery`].
pub const VERIFY_POINTS: usize = 16;

/// Nodes and weights of the 8-point Gauss-Legendre rule on `[-1, 1]`.
const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

fn gauss_legendre<F>(f: &mut F, a: f64, b: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum: Vec<f64> = Vec::new();
    for &(x, w) in &GL8 {
        for v in [f(mid - half * x)?, f(mid + half * x)?] {
            if sum.is_empty() {
                sum = vec![0.0; v.len()];
            }
            for (acc, y) in sum.iter_mut().zip(&v) {
                *acc += w * y;
            }
        }
    }
    sum.iter_mut().for_each(|x| *x *= half);
    Ok(sum)
}

/// Integrates `f` over `[a, b]`, bisecting until the two halves agree with
/// the whole to within `tol`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    Ok(integrate_vec(|t| Ok(vec![f(t)?]), a, b, tol)?[0])
}

/// Componentwise [`integrate`] of a vector-valued integrand; the error test
/// uses the largest component difference.
pub fn integrate_vec<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let whole = gauss_legendre(&mut f, a, b)?;
    if a == b {
        return Ok(vec![0.0; whole.len()]);
    }
    adapt(&mut f, a, b, whole, tol, 0)
}

fn adapt<F>(f: &mut F, a: f64, b: f64, whole: Vec<f64>, tol: f64, level: u32) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let mid = 0.5 * (a + b);
    let left = gauss_legendre(f, a, mid)?;
    let right = gauss_legendre(f, mid, b)?;
    let halves: Vec<f64> = left.iter().zip(&right).map(|(l, r)| l + r).collect();
    let converged = halves.iter().zip(&whole).zip(left.iter().zip(&right)).all(|((h, w), (l, r))| {
        // roundoff floor keeps tiny tolerances from demanding the impossible
        let floor = 64.0 * f64::EPSILON * (l.abs() + r.abs());
        (h - w).abs() < tol.max(floor)
    });
    if converged {
        return Ok(halves);
    }
    if level + 1 >= MAX_LEVELS {
        return Err(Error::NonConvergence { levels: MAX_LEVELS });
    }
    let mut out = adapt(f, a, mid, left, 0.5 * tol, level + 1)?;
    for (o, r) in out.iter_mut().zip(adapt(f, mid, b, right, 0.5 * tol, level + 1)?) {
        *o += r;
    }
    Ok(out)
}

/// `T_i` at `p` as jets of the given order (0 or 1).
pub fn t_lower(s: &Scenario, p: &[f64], order: u8) -> Result<Vec<Jet>> {
    let g = s.metric_at(p, order + 1)?;
    let ginv = s.invert(&g, p)?;
    let gamma = s.connection_at(p, order)?;
    let lc = christoffel_with_inverse(&g, &ginv)?;
    let t = thomas_jets(&lc.sub(&gamma));
    let (_, down) = trace_vector_with_inverse(&g, &ginv, &t).map_err(|e| e.at_point(p))?;
    Ok(down)
}

fn check_point(s: &Scenario, p: &[f64], what: &str) -> Result<()> {
    if p.len() != s.dimension {
        return Err(Error::InvalidInput(format!(
            "{what} has {} coordinates, scenario dimension is {}",
            p.len(),
            s.dimension
        )));
    }
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} has non-finite coordinates")));
    }
    Ok(())
}

fn segment(s: &Scenario, from: &[f64], to: &[f64], tol: f64) -> Result<f64> {
    let dir: Vec<f64> = to.iter().zip(from).map(|(b, a)| b - a).collect();
    if dir.iter().all(|d| *d == 0.0) {
        return Ok(0.0);
    }
    let integrand = |t: f64| -> Result<f64> {
        let p: Vec<f64> = from.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
        let tl = t_lower(s, &p, 0)?;
        Ok(tl.iter().zip(&dir).map(|(ti, d)| ti.value() * d).sum())
    };
    integrate(integrand, 0.0, 1.0, tol)
}

/// `∫ T_i dx^i` along the straight segment from `base` to `target`.
pub fn integrate_phi(s: &Scenario, base: &[f64], target: &[f64]) -> Result<f64> {
    check_point(s, base, "base")?;
    check_point(s, target, "target")?;
    segment(s, base, target, s.tolerances.quadrature)
}

/// `∫ T_i dx^i` along the polyline through `vertices`.
pub fn integrate_phi_along(s: &Scenario, vertices: &[Vec<f64>]) -> Result<f64> {
    for v in vertices {
        check_point(s, v, "path vertex")?;
    }
    let mut total = 0.0;
    for w in vertices.windows(2) {
        total += segment(s, &w[0], &w[1], s.tolerances.quadrature)?;
    }
    Ok(total)
}

/// `φ` anchored at a base point.
#[derive(Debug, Clone, Copy)]
pub struct RecoveredFactor<'a> {
    pub scenario: &'a Scenario,
    pub base: &'a [f64],
}

impl<'a> RecoveredFactor<'a> {
    pub fn new(scenario: &'a Scenario, base: &'a [f64]) -> Result<Self> {
        check_point(scenario, base, "base")?;
        Ok(RecoveredFactor { scenario, base })
    }

    pub fn phi(&self, x: &[f64]) -> Result<f64> {
        integrate_phi(self.scenario, self.base, x)
    }

    /// `φ` at `x` as an order-2 jet. The gradient comes from differentiating
    /// the segment integral in `x`,
    /// `∂_j φ = ∫ (T_j(c) + t ∂_j T_i(c) (x − base)^i) dt`, which equals
    /// `T_j(x)` exactly when `T_i dx^i` is closed. The Hessian is the
    /// symmetrized `∂_j T_i(x)`.
    pub fn phi_jet(&self, x: &[f64]) -> Result<Jet> {
        let s = self.scenario;
        check_point(s, x, "query point")?;
        let n = s.dimension;
        let dir: Vec<f64> = x.iter().zip(self.base).map(|(b, a)| b - a).collect();
        let integrand = |t: f64| -> Result<Vec<f64>> {
            let p: Vec<f64> = self.base.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let tl = t_lower(s, &p, 1)?;
            let mut out = vec![0.0; n + 1];
            for (ti, d) in tl.iter().zip(&dir) {
                out[0] += ti.value() * d;
            }
            for j in 0..n {
                out[j + 1] = tl[j].value() + t * tl.iter().zip(&dir).map(|(ti, d)| ti.grad(j) * d).sum::<f64>();
            }
            Ok(out)
        };
        let t_here = t_lower(s, x, 1)?;
        let parts = if dir.iter().all(|d| *d == 0.0) {
            std::iter::once(0.0).chain(t_here.iter().map(|t| t.value())).collect()
        } else {
            integrate_vec(integrand, 0.0, 1.0, s.tolerances.quadrature)?
        };
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                hess[i * n + j] = 0.5 * (t_here[i].grad(j) + t_here[j].grad(i));
            }
        }
        Ok(Jet::from_parts(parts[0], Some(&parts[1..]), Some(&hess), n)?)
    }
}

/// `g · exp(2φ)` at each point, with `φ` integrated from `base`.
pub fn recover_metric(s: &Scenario, base: &[f64], points: &[Vec<f64>]) -> Result<Vec<MetricValue>> {
    let rf = RecoveredFactor::new(s, base)?;
    points
        .par_iter()
        .map(|p| {
            let phi = rf.phi(p)?;
            let g = s.metric_at(p, 0)?;
            Ok(conformal_rescale_metric(&g, &Jet::constant(phi, s.dimension, 0)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verification {
    /// Largest `|Π(Ϝ(g e^{2φ})) − Π(Γ)|` over the checked points.
    pub max_deviation: f64,
    /// The same, with each point divided by `max(1, ‖Γ‖∞, ‖g‖∞)`.
    pub normalized: f64,
    pub pass: bool,
}

/// Compares `Π(Ϝ(g e^{2φ}))` with `Π(Γ)` at the given points.
pub fn verify_recovery_at(s: &Scenario, base: &[f64], points: &[Vec<f64>]) -> Result<Verification> {
    let rf = RecoveredFactor::new(s, base)?;
    let per_point: Vec<(f64, f64)> = points
        .par_iter()
        .map(|p| {
            let phi = rf.phi_jet(p)?;
            let g = s.metric_at(p, 2)?;
            let recovered = conformal_rescale_metric(&g, &phi);
            let lc = christoffel(&recovered).map_err(|e| e.at_point(p))?;
            let gamma = s.connection_at(p, 0)?;
            let dev = thomas_symbol(&lc.truncate(0)).max_deviation(&thomas_symbol(&gamma));
            let scale = 1f64.max(gamma.max_abs()).max(g.max_abs());
            Ok((dev, dev / scale))
        })
        .collect::<Result<_>>()?;
    let max_deviation = per_point.iter().map(|d| d.0).fold(0.0, f64::max);
    let normalized = per_point.iter().map(|d| d.1).fold(0.0, f64::max);
    Ok(Verification {
        max_deviation,
        normalized,
        pass: normalized <= s.tolerances.residual,
    })
}

/// [`verify_recovery_at`] on the scenario's first [`VERIFY_POINTS`] sample points.
pub fn verify_recovery(s: &Scenario, base: &[f64]) -> Result<Verification> {
    let mut points = sample_points(s);
    points.truncate(VERIFY_POINTS);
    verify_recovery_at(s, base, &points)
}
