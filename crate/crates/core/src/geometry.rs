//! Pointwise tensor kernels over jets: metric inversion, Levi-Civita
//! symbols, Thomas symbols, and conformal/projective changes of
//! representative.
//!
//! Index conventions follow the usual coordinate notation. Connection
//! components `Γ^i_jk` live at flat index `(i * n + j) * n + k` and are
//! symmetric in `(j, k)`.

use crate::error::{Error, Result};
use crate::jet::{Jet, JetError};
use crate::linalg;

/// Relative determinant threshold below which a metric counts as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;

#[inline]
fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

fn min_order(jets: &[Jet]) -> u8 {
    jets.iter().map(Jet::order).min().unwrap_or(0)
}

/// Metric components `g_ij` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricValue {
    n: usize,
    comps: Vec<Jet>,
}

impl MetricValue {
    /// Builds a symmetric metric from its upper triangle; `f(i, j)` is only
    /// called for `i <= j`.
    pub fn from_upper<E>(n: usize, mut f: impl FnMut(usize, usize) -> Result<Jet, E>) -> Result<MetricValue, E> {
        let mut slots: Vec<Option<Jet>> = vec![None; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j)?;
                slots[j * n + i] = Some(v.clone());
                slots[i * n + j] = Some(v);
            }
        }
        Ok(MetricValue {
            n,
            comps: slots.into_iter().map(Option::unwrap).collect(),
        })
    }

    /// Constant metric from row-major values.
    pub fn from_values(values: &[f64], n: usize, order: u8) -> Result<MetricValue> {
        if values.len() != n * n {
            return Err(Error::InvalidInput(format!("expected {} metric entries, got {}", n * n, values.len())));
        }
        for i in 0..n {
            for j in 0..i {
                if values[i * n + j] != values[j * n + i] {
                    return Err(Error::InvalidInput(format!("metric entries ({i},{j}) and ({j},{i}) differ")));
                }
            }
        }
        MetricValue::from_upper(n, |i, j| Jet::constant(values[i * n + j], n, order).map_err(Error::from))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> u8 {
        min_order(&self.comps)
    }

    pub fn get(&self, i: usize, j: usize) -> &Jet {
        &self.comps[i * self.n + j]
    }

    pub fn components(&self) -> &[Jet] {
        &self.comps
    }

    /// Row-major value parts.
    pub fn values(&self) -> Vec<f64> {
        self.comps.iter().map(Jet::value).collect()
    }

    pub fn truncate(&self, order: u8) -> MetricValue {
        MetricValue {
            n: self.n,
            comps: self.comps.iter().map(|j| j.truncate(order)).collect(),
        }
    }

    /// `g(u, v)` on value parts.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.comps[i * n + j].value() * u[i] * v[j];
            }
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(|j| j.value().abs()).fold(0.0, f64::max)
    }

    pub fn determinant(&self) -> f64 {
        linalg::determinant(&self.values(), self.n)
    }
}

/// Connection coefficients `Γ^i_jk` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionValue {
    n: usize,
    comps: Vec<Jet>,
}

impl ConnectionValue {
    /// Builds a connection symmetric in the lower slots; `f(i, j, k)` is only
    /// called for `j <= k`.
    pub fn from_lower_symmetric<E>(
        n: usize,
        mut f: impl FnMut(usize, usize, usize) -> Result<Jet, E>,
    ) -> Result<ConnectionValue, E> {
        let mut slots: Vec<Option<Jet>> = vec![None; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in j..n {
                    let v = f(i, j, k)?;
                    slots[(i * n + k) * n + j] = Some(v.clone());
                    slots[(i * n + j) * n + k] = Some(v);
                }
            }
        }
        Ok(ConnectionValue {
            n,
            comps: slots.into_iter().map(Option::unwrap).collect(),
        })
    }

    fn build(n: usize, mut f: impl FnMut(usize, usize, usize) -> Jet) -> ConnectionValue {
        Self::from_lower_symmetric::<std::convert::Infallible>(n, |i, j, k| Ok(f(i, j, k))).unwrap()
    }

    /// Connection with constant coefficients from flat `Γ^i_jk` values.
    /// Fails unless the values are symmetric in `(j, k)`.
    pub fn from_values(values: &[f64], n: usize, order: u8) -> Result<ConnectionValue> {
        if values.len() != n * n * n {
            return Err(Error::InvalidInput(format!(
                "expected {} connection entries, got {}",
                n * n * n,
                values.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..j {
                    if values[(i * n + j) * n + k] != values[(i * n + k) * n + j] {
                        return Err(Error::InvalidInput(format!("connection not symmetric in slot ({i},{j},{k})")));
                    }
                }
            }
        }
        ConnectionValue::from_lower_symmetric(n, |i, j, k| {
            Jet::constant(values[(i * n + j) * n + k], n, order).map_err(Error::from)
        })
    }

    pub fn zero(n: usize, order: u8) -> Result<ConnectionValue> {
        Self::from_values(&vec![0.0; n * n * n], n, order)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> u8 {
        min_order(&self.comps)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> &Jet {
        &self.comps[(i * self.n + j) * self.n + k]
    }

    pub fn components(&self) -> &[Jet] {
        &self.comps
    }

    pub fn values(&self) -> Vec<f64> {
        self.comps.iter().map(Jet::value).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(|j| j.value().abs()).fold(0.0, f64::max)
    }

    pub fn truncate(&self, order: u8) -> ConnectionValue {
        ConnectionValue {
            n: self.n,
            comps: self.comps.iter().map(|j| j.truncate(order)).collect(),
        }
    }

    /// Componentwise difference in jet arithmetic.
    pub fn sub(&self, other: &ConnectionValue) -> ConnectionValue {
        assert_eq!(self.n, other.n);
        ConnectionValue {
            n: self.n,
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a - b).collect(),
        }
    }

    /// `d^i = Γ^i_jk u^j u^k` on value parts.
    pub fn contract_twice(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        s += self.get(i, j, k).value() * u[j] * u[k];
                    }
                }
                s
            })
            .collect()
    }
}

/// Value parts of the Thomas symbol `Π^i_jk`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThomasValue {
    n: usize,
    comps: Vec<f64>,
}

impl ThomasValue {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.comps[(i * self.n + j) * self.n + k]
    }

    pub fn components(&self) -> &[f64] {
        &self.comps
    }

    /// Largest absolute entry of either trace `Π^p_pk`, `Π^p_jp`.
    pub fn max_trace(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for k in 0..n {
            let a: f64 = (0..n).map(|p| self.get(p, p, k)).sum();
            let b: f64 = (0..n).map(|p| self.get(p, k, p)).sum();
            worst = worst.max(a.abs()).max(b.abs());
        }
        worst
    }

    /// `‖self − other‖_∞`.
    pub fn max_deviation(&self, other: &ThomasValue) -> f64 {
        assert_eq!(self.n, other.n);
        self.comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Inverse metric via Gauss-Jordan elimination over the jet ring, pivoting on
/// value magnitudes.
pub fn invert_metric(g: &MetricValue) -> Result<MetricValue> {
    invert_metric_with_tolerance(g, DEGENERACY_TOLERANCE)
}

/// As [`invert_metric`], flagging `|det| < rel_tol * (max |g_ij|)^n`.
pub fn invert_metric_with_tolerance(g: &MetricValue, rel_tol: f64) -> Result<MetricValue> {
    let n = g.n;
    let det = g.determinant();
    let scale = g.max_abs().powi(n as i32);
    if !(det.abs() > rel_tol * scale) || scale == 0.0 {
        return Err(Error::DegenerateMetric { point: Vec::new(), det });
    }
    let order = g.order();
    let mut a: Vec<Jet> = g.comps.clone();
    let mut b: Vec<Jet> = (0..n * n)
        .map(|idx| Jet::constant(delta(idx / n, idx % n), n, order))
        .collect::<Result<_, JetError>>()?;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r * n + col].value().abs().total_cmp(&a[s * n + col].value().abs()))
            .unwrap();
        if piv != col {
            for c in 0..n {
                a.swap(piv * n + c, col * n + c);
                b.swap(piv * n + c, col * n + c);
            }
        }
        let inv = a[col * n + col]
            .recip()
            .map_err(|_| Error::DegenerateMetric { point: Vec::new(), det })?;
        for c in 0..n {
            a[col * n + c] = &a[col * n + c] * &inv;
            b[col * n + c] = &b[col * n + c] * &inv;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col].clone();
            for c in 0..n {
                a[r * n + c] = &a[r * n + c] - &(&f * &a[col * n + c]);
                b[r * n + c] = &b[r * n + c] - &(&f * &b[col * n + c]);
            }
        }
    }
    MetricValue::from_upper::<Error>(n, |i, j| {
        if i == j {
            Ok(b[i * n + i].clone())
        } else {
            Ok((&b[i * n + j] + &b[j * n + i]).scale(0.5))
        }
    })
}

/// Levi-Civita symbols of `g`; one order lower than `g`.
pub fn christoffel(g: &MetricValue) -> Result<ConnectionValue> {
    let ginv = invert_metric(g)?;
    christoffel_with_inverse(g, &ginv)
}

/// Levi-Civita symbols given a precomputed inverse metric.
pub fn christoffel_with_inverse(g: &MetricValue, ginv: &MetricValue) -> Result<ConnectionValue> {
    let n = g.n;
    let order = g.order();
    if order == 0 {
        return Err(JetError::OrderTooLow { needed: 1, got: 0 }.into());
    }
    // dg[(p * n + j) * n + k] = ∂_k g_pj
    let mut dg = Vec::with_capacity(n * n * n);
    for p in 0..n {
        for j in 0..n {
            for k in 0..n {
                dg.push(g.get(p, j).partial(k)?);
            }
        }
    }
    let d = |p: usize, j: usize, k: usize| &dg[(p * n + j) * n + k];
    // lowered symbols Γ_pjk = ½ (∂_k g_pj + ∂_j g_pk − ∂_p g_jk)
    let mut lowered = vec![None; n * n * n];
    for p in 0..n {
        for j in 0..n {
            for k in j..n {
                let v = (&(d(p, j, k) + d(p, k, j)) - d(j, k, p)).scale(0.5);
                lowered[(p * n + j) * n + k] = Some(v);
            }
        }
    }
    let ginv = ginv.truncate(order - 1);
    Ok(ConnectionValue::build(n, |i, j, k| {
        let mut acc = Jet::constant(0.0, n, order - 1).unwrap();
        for p in 0..n {
            acc = &acc + &(ginv.get(i, p) * lowered[(p * n + j) * n + k].as_ref().unwrap());
        }
        acc
    }))
}

/// `g · exp(2φ)` componentwise.
pub fn conformal_rescale_metric(g: &MetricValue, phi: &Jet) -> MetricValue {
    let factor = phi.scale(2.0).exp();
    MetricValue {
        n: g.n,
        comps: g.comps.iter().map(|c| c * &factor).collect(),
    }
}

/// Levi-Civita symbols of `g · exp(2φ)` assembled from those of `g` and the
/// gradient of `φ`.
pub fn rescaled_connection(g: &MetricValue, phi: &Jet) -> Result<ConnectionValue> {
    let n = g.n;
    let ginv = invert_metric(g)?;
    let base = christoffel_with_inverse(g, &ginv)?;
    let dphi: Vec<Jet> = (0..n).map(|k| phi.partial(k)).collect::<Result<_, JetError>>()?;
    let up: Vec<Jet> = (0..n)
        .map(|i| {
            let mut acc = Jet::constant(0.0, n, dphi[0].order()).unwrap();
            for p in 0..n {
                acc = &acc + &(ginv.get(i, p) * &dphi[p]);
            }
            acc
        })
        .collect();
    Ok(ConnectionValue::build(n, |i, j, k| {
        let mut v = &base.get(i, j, k).clone() - &(g.get(j, k) * &up[i]);
        if i == j {
            v = &v + &dphi[k];
        }
        if i == k {
            v = &v + &dphi[j];
        }
        v
    }))
}

/// `Γ^i_jk + δ^i_j ψ_k + δ^i_k ψ_j`.
pub fn projective_transform(gamma: &ConnectionValue, psi: &[Jet]) -> ConnectionValue {
    let n = gamma.n;
    assert_eq!(psi.len(), n, "one-form dimension mismatch");
    ConnectionValue::build(n, |i, j, k| {
        let mut v = gamma.get(i, j, k).clone();
        if i == j {
            v = &v + &psi[k];
        }
        if i == k {
            v = &v + &psi[j];
        }
        v
    })
}

/// Thomas symbol in jet arithmetic, so derivatives of `Π` stay available.
pub fn thomas_jets(gamma: &ConnectionValue) -> ConnectionValue {
    let n = gamma.n;
    let c = 1.0 / (n as f64 + 1.0);
    let traces: Vec<Jet> = (0..n)
        .map(|k| {
            let mut acc = gamma.get(0, 0, k).clone();
            for p in 1..n {
                acc = &acc + gamma.get(p, p, k);
            }
            acc
        })
        .collect();
    ConnectionValue::build(n, |i, j, k| {
        let mut v = gamma.get(i, j, k).clone();
        if i == j {
            v = &v - &traces[k].scale(c);
        }
        if i == k {
            v = &v - &traces[j].scale(c);
        }
        v
    })
}

/// `Π^i_jk = Γ^i_jk − (δ^i_j Γ^p_pk + δ^i_k Γ^p_pj) / (n + 1)` on value parts.
pub fn thomas_symbol(gamma: &ConnectionValue) -> ThomasValue {
    let n = gamma.n;
    let c = 1.0 / (n as f64 + 1.0);
    let traces: Vec<f64> = (0..n)
        .map(|k| (0..n).map(|p| gamma.get(p, p, k).value()).sum())
        .collect();
    let mut comps = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let v = gamma.get(i, j, k).value() - c * delta(i, j) * traces[k] - c * delta(i, k) * traces[j];
                comps[(i * n + j) * n + k] = v;
                comps[(i * n + k) * n + j] = v;
            }
        }
    }
    ThomasValue { n, comps }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equivalence {
    pub equivalent: bool,
    pub max_deviation: f64,
}

/// Compares Thomas symbols of two connection fields over `points`.
pub fn projectively_equivalent<A, B>(points: &[Vec<f64>], gamma_a: A, gamma_b: B, tolerance: f64) -> Result<Equivalence>
where
    A: Fn(&[f64]) -> Result<ConnectionValue>,
    B: Fn(&[f64]) -> Result<ConnectionValue>,
{
    let mut worst = 0.0f64;
    for p in points {
        let a = gamma_a(p)?;
        let b = gamma_b(p)?;
        if a.dim() != b.dim() {
            return Err(Error::InvalidInput(format!("connection dimensions differ: {} vs {}", a.dim(), b.dim())));
        }
        worst = worst.max(thomas_symbol(&a).max_deviation(&thomas_symbol(&b)));
    }
    Ok(Equivalence {
        equivalent: worst <= tolerance,
        max_deviation: worst,
    })
}
