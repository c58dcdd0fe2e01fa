//! Truncated second-order Taylor expansions ("jets") of scalar fields.
//!
//! A [`Jet`] carries the value of a scalar at a point together with its
//! gradient and Hessian, truncated at a configurable order `0..=2`. Ring
//! operations and elementary functions propagate the derivatives exactly, so
//! every downstream tensor computation gets its partial derivatives without
//! finite differences.
//!
//! Hessians are stored densely (`n * n`, row-major) and are always written
//! through the upper triangle and mirrored, which keeps them bit-for-bit
//! symmetric.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Highest supported truncation order.
pub const MAX_ORDER: u8 = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("coordinate index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("jet order {0} is not supported (expected 0, 1 or 2)")]
    InvalidOrder(u8),
    #[error("chart dimension must be at least 1")]
    ZeroDimension,
    #[error("operation needs a jet of order >= {needed}, got order {got}")]
    OrderTooLow { needed: u8, got: u8 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("{func} is undefined at {value}")]
    Domain { func: &'static str, value: f64 },
}

/// Arithmetic operators accepted by [`Jet::arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Elementary functions with closed-form first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Exp,
        Func::Log,
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }

    /// `(f(x), f'(x), f''(x))`, or a domain error.
    fn derivatives(self, x: f64) -> Result<(f64, f64, f64), JetError> {
        let domain = || JetError::Domain {
            func: self.name(),
            value: x,
        };
        let out = match self {
            Func::Exp => {
                let e = x.exp();
                (e, e, e)
            }
            Func::Log => {
                if !(x > 0.0) {
                    return Err(domain());
                }
                (x.ln(), 1.0 / x, -1.0 / (x * x))
            }
            Func::Sin => {
                let (s, c) = x.sin_cos();
                (s, c, -s)
            }
            Func::Cos => {
                let (s, c) = x.sin_cos();
                (c, -s, -c)
            }
            Func::Tan => {
                if x.cos() == 0.0 {
                    return Err(domain());
                }
                let t = x.tan();
                let sec2 = 1.0 + t * t;
                (t, sec2, 2.0 * t * sec2)
            }
            Func::Sinh => (x.sinh(), x.cosh(), x.sinh()),
            Func::Cosh => (x.cosh(), x.sinh(), x.cosh()),
            Func::Tanh => {
                let t = x.tanh();
                let d = 1.0 - t * t;
                (t, d, -2.0 * t * d)
            }
            Func::Sqrt => {
                // the derivative is unbounded at 0, so 0 is excluded
                if !(x > 0.0) {
                    return Err(domain());
                }
                let s = x.sqrt();
                (s, 0.5 / s, -0.25 / (s * s * s))
            }
        };
        if out.0.is_finite() && out.1.is_finite() && out.2.is_finite() {
            Ok(out)
        } else {
            Err(domain())
        }
    }
}

impl fmt::Display for Func {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Value, gradient and Hessian of a scalar at a point, truncated at `order`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    n: usize,
    order: u8,
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

fn check_order(order: u8) -> Result<(), JetError> {
    if order > MAX_ORDER {
        Err(JetError::InvalidOrder(order))
    } else {
        Ok(())
    }
}

impl Jet {
    fn zeros(n: usize, order: u8) -> Jet {
        Jet {
            n,
            order,
            value: 0.0,
            grad: if order >= 1 { vec![0.0; n] } else { Vec::new() },
            hess: if order >= 2 { vec![0.0; n * n] } else { Vec::new() },
        }
    }

    /// The jet of a constant function.
    pub fn constant(c: f64, n: usize, order: u8) -> Result<Jet, JetError> {
        check_order(order)?;
        if n == 0 {
            return Err(JetError::ZeroDimension);
        }
        let mut j = Jet::zeros(n, order);
        j.value = c;
        Ok(j)
    }

    /// The jet of the coordinate function `x^k` (zero-based `k`) at `point`.
    pub fn coordinate(k: usize, point: &[f64], order: u8) -> Result<Jet, JetError> {
        check_order(order)?;
        let n = point.len();
        if n == 0 {
            return Err(JetError::ZeroDimension);
        }
        if k >= n {
            return Err(JetError::IndexOutOfRange { index: k, n });
        }
        let mut j = Jet::zeros(n, order);
        j.value = point[k];
        if order >= 1 {
            j.grad[k] = 1.0;
        }
        Ok(j)
    }

    /// Builds a jet from explicit parts. The Hessian is symmetrized.
    pub fn from_parts(value: f64, gradient: Option<&[f64]>, hessian: Option<&[f64]>, n: usize) -> Result<Jet, JetError> {
        if n == 0 {
            return Err(JetError::ZeroDimension);
        }
        let order = match (gradient, hessian) {
            (None, None) => 0,
            (Some(_), None) => 1,
            (Some(_), Some(_)) => 2,
            (None, Some(_)) => return Err(JetError::OrderTooLow { needed: 1, got: 0 }),
        };
        let mut j = Jet::zeros(n, order);
        j.value = value;
        if let Some(g) = gradient {
            if g.len() != n {
                return Err(JetError::DimensionMismatch { left: n, right: g.len() });
            }
            j.grad.copy_from_slice(g);
        }
        if let Some(h) = hessian {
            if h.len() != n * n {
                return Err(JetError::DimensionMismatch { left: n * n, right: h.len() });
            }
            for a in 0..n {
                for b in a..n {
                    let v = 0.5 * (h[a * n + b] + h[b * n + a]);
                    j.hess[a * n + b] = v;
                    j.hess[b * n + a] = v;
                }
            }
        }
        Ok(j)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Gradient components; empty for order 0.
    pub fn gradient(&self) -> &[f64] {
        &self.grad
    }

    /// Row-major dense Hessian; empty unless order 2.
    pub fn hessian(&self) -> &[f64] {
        &self.hess
    }

    /// `∂²/∂x^a∂x^b`, or 0 when the jet is truncated below order 2.
    pub fn hess(&self, a: usize, b: usize) -> f64 {
        if self.order >= 2 {
            self.hess[a * self.n + b]
        } else {
            0.0
        }
    }

    /// `∂/∂x^a`, or 0 when the jet is truncated at order 0.
    pub fn grad(&self, a: usize) -> f64 {
        if self.order >= 1 {
            self.grad[a]
        } else {
            0.0
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.grad.iter().all(|v| v.is_finite()) && self.hess.iter().all(|v| v.is_finite())
    }

    /// Drops derivative information above `order`.
    pub fn truncate(&self, order: u8) -> Jet {
        if order >= self.order {
            return self.clone();
        }
        let mut j = self.clone();
        j.order = order;
        if order < 2 {
            j.hess = Vec::new();
        }
        if order < 1 {
            j.grad = Vec::new();
        }
        j
    }

    /// The partial derivative `∂_k` as a jet one order lower.
    pub fn partial(&self, k: usize) -> Result<Jet, JetError> {
        if self.order == 0 {
            return Err(JetError::OrderTooLow { needed: 1, got: 0 });
        }
        if k >= self.n {
            return Err(JetError::IndexOutOfRange { index: k, n: self.n });
        }
        let mut j = Jet::zeros(self.n, self.order - 1);
        j.value = self.grad[k];
        if self.order == 2 {
            j.grad.copy_from_slice(&self.hess[k * self.n..(k + 1) * self.n]);
        }
        Ok(j)
    }

    /// Applies a scalar function with the given derivatives at `self.value`.
    fn compose(&self, f0: f64, f1: f64, f2: f64) -> Jet {
        let n = self.n;
        let mut j = Jet::zeros(n, self.order);
        j.value = f0;
        if self.order >= 1 {
            for a in 0..n {
                j.grad[a] = f1 * self.grad[a];
            }
        }
        if self.order >= 2 {
            for a in 0..n {
                for b in a..n {
                    let v = f2 * self.grad[a] * self.grad[b] + f1 * self.hess[a * n + b];
                    j.hess[a * n + b] = v;
                    j.hess[b * n + a] = v;
                }
            }
        }
        j
    }

    pub fn apply(&self, func: Func) -> Result<Jet, JetError> {
        let (f0, f1, f2) = func.derivatives(self.value)?;
        Ok(self.compose(f0, f1, f2))
    }

    pub fn exp(&self) -> Jet {
        let e = self.value.exp();
        self.compose(e, e, e)
    }

    pub fn ln(&self) -> Result<Jet, JetError> {
        self.apply(Func::Log)
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        let v = self.value;
        if v == 0.0 || !v.is_finite() {
            return Err(JetError::Domain { func: "reciprocal", value: v });
        }
        let r = 1.0 / v;
        Ok(self.compose(r, -r * r, 2.0 * r * r * r))
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut j = self.clone();
        j.value *= s;
        j.grad.iter_mut().for_each(|g| *g *= s);
        j.hess.iter_mut().for_each(|h| *h *= s);
        j
    }

    pub fn checked_div(&self, rhs: &Jet) -> Result<Jet, JetError> {
        same_dim(self, rhs)?;
        Ok(self * &rhs.recip()?)
    }

    /// Integer power by repeated squaring; negative exponents go through
    /// the reciprocal.
    pub fn powi(&self, k: i64) -> Result<Jet, JetError> {
        let base = if k < 0 { self.recip()? } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = Jet::constant(1.0, self.n, self.order)?;
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &sq;
            }
            e >>= 1;
            if e > 0 {
                sq = &sq * &sq;
            }
        }
        Ok(acc)
    }

    /// `self^exponent` as `exp(exponent * log self)`; requires a positive base.
    pub fn powf(&self, exponent: &Jet) -> Result<Jet, JetError> {
        same_dim(self, exponent)?;
        if !(self.value > 0.0) {
            return Err(JetError::Domain { func: "pow", value: self.value });
        }
        Ok((exponent * &self.ln()?).exp())
    }

    pub fn arith(&self, rhs: &Jet, op: ArithOp) -> Result<Jet, JetError> {
        same_dim(self, rhs)?;
        Ok(match op {
            ArithOp::Add => self + rhs,
            ArithOp::Sub => self - rhs,
            ArithOp::Mul => self * rhs,
            ArithOp::Div => self.checked_div(rhs)?,
        })
    }

    fn add_scaled(&self, rhs: &Jet, sign: f64) -> Jet {
        assert_eq!(self.n, rhs.n, "jet dimension mismatch");
        let order = self.order.min(rhs.order);
        let mut j = Jet::zeros(self.n, order);
        j.value = self.value + sign * rhs.value;
        for (o, (a, b)) in j.grad.iter_mut().zip(self.grad.iter().zip(&rhs.grad)) {
            *o = a + sign * b;
        }
        for (o, (a, b)) in j.hess.iter_mut().zip(self.hess.iter().zip(&rhs.hess)) {
            *o = a + sign * b;
        }
        j
    }

    fn product(&self, rhs: &Jet) -> Jet {
        assert_eq!(self.n, rhs.n, "jet dimension mismatch");
        let n = self.n;
        let order = self.order.min(rhs.order);
        let mut j = Jet::zeros(n, order);
        j.value = self.value * rhs.value;
        if order >= 1 {
            for a in 0..n {
                j.grad[a] = self.grad[a] * rhs.value + self.value * rhs.grad[a];
            }
        }
        if order >= 2 {
            for a in 0..n {
                for b in a..n {
                    let v = self.hess[a * n + b] * rhs.value
                        + (self.grad[a] * rhs.grad[b] + rhs.grad[a] * self.grad[b])
                        + self.value * rhs.hess[a * n + b];
                    j.hess[a * n + b] = v;
                    j.hess[b * n + a] = v;
                }
            }
        }
        j
    }
}

fn same_dim(a: &Jet, b: &Jet) -> Result<(), JetError> {
    if a.n != b.n {
        Err(JetError::DimensionMismatch { left: a.n, right: b.n })
    } else {
        Ok(())
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.add_scaled(rhs, 1.0)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.add_scaled(rhs, -1.0)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.product(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
