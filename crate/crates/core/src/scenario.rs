//! Scenario documents: a chart, a sampling box, a metric representative and
//! a recipe for the connection representative.
//!
//! ```json
//! {
//!   "dimension": 3,
//!   "coordinates": ["x1","x2","x3"],
//!   "box": {"min": [-1,-1,-1], "max": [1,1,1]},
//!   "metric": [["-1","0","0"],["0","1","0"],["0","0","1"]],
//!   "connection": {"kind": "modified_s",
//!                  "metric": [["-1","0","0"],["0","1","0"],["0","0","1"]],
//!                  "s": ["0","0","x2"]},
//!   "tolerances": {"residual": 1e-8, "rank": 1e-10, "quadrature": 1e-10},
//!   "samples": 200, "seed": 42
//! }
//! ```
//!
//! Symmetric arrays may leave the lower triangle as `null`, or give each row
//! only from the diagonal onward; the missing half is mirrored on load.

use std::path::Path;
use std::sync::Arc;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expr};
use crate::geometry::{christoffel_with_inverse, invert_metric_with_tolerance, projective_transform, ConnectionValue, MetricValue};
use crate::jet::{Jet, JetError};

pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Threshold on scale-normalized residuals of conditions (A), (B) and EPS.
    pub residual: f64,
    /// Relative threshold for metric degeneracy and numerical rank.
    pub rank: f64,
    /// Absolute accuracy target of the adaptive line-integral quadrature.
    pub quadrature: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: 1e-8,
            rank: 1e-10,
            quadrature: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl SampleBox {
    pub fn center(&self) -> Vec<f64> {
        self.min.iter().zip(&self.max).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(x, (a, b))| *a <= *x && *x <= *b)
    }

    /// Maps `unit ∈ [0,1)^n` into the box.
    pub fn lerp(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(u, (a, b))| a + u * (b - a))
            .collect()
    }
}

/// A symmetric `n x n` array of expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricExprs {
    n: usize,
    comps: Vec<Expr>,
}

impl SymmetricExprs {
    /// Row-major `n * n` expressions; must already be symmetric.
    pub fn new(n: usize, comps: Vec<Expr>) -> Result<SymmetricExprs> {
        if comps.len() != n * n {
            return Err(Error::InvalidInput(format!("expected {} expressions, got {}", n * n, comps.len())));
        }
        for i in 0..n {
            for j in 0..i {
                if comps[i * n + j] != comps[j * n + i] {
                    return Err(Error::InvalidInput(format!("entries ({i},{j}) and ({j},{i}) differ")));
                }
            }
        }
        Ok(SymmetricExprs { n, comps })
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.comps[i * self.n + j]
    }

    fn eval(&self, label: &str, p: &[f64], order: u8) -> Result<MetricValue> {
        MetricValue::from_upper(self.n, |i, j| {
            self.get(i, j).eval(p, order).map_err(|source| Error::Domain {
                context: format!("{label}[{i}][{j}]"),
                source,
            })
        })
    }

    fn to_json(&self) -> Value {
        Value::Array(
            (0..self.n)
                .map(|i| Value::Array((0..self.n).map(|j| Value::String(self.get(i, j).source_text())).collect()))
                .collect(),
        )
    }
}

/// How the vector field `S` of a `modified_s` connection is given.
#[derive(Debug, Clone, PartialEq)]
pub enum SField {
    /// Components `S^i`.
    Vector(Vec<Expr>),
    /// Lowered components `S_i = g_ij S^j`.
    Covector(Vec<Expr>),
    /// A potential `f` with `S_i = ∂_i f`.
    Potential(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConnectionRecipe {
    LeviCivita { metric: SymmetricExprs },
    /// `gamma[i]` holds the symmetric matrix `Γ^i_jk`.
    Explicit { gamma: Vec<SymmetricExprs> },
    /// `Γ^i_jk = Ϝ^i_jk(g) − S^i g_jk`.
    ModifiedS { metric: SymmetricExprs, s: SField },
    /// `Γ^i_jk + δ^i_j ψ_k + δ^i_k ψ_j` applied to `base`.
    ProjectiveTransform { base: Box<ConnectionRecipe>, psi: Vec<Expr> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub dimension: usize,
    pub coordinates: Arc<[String]>,
    pub sample_box: SampleBox,
    pub metric: SymmetricExprs,
    pub connection: ConnectionRecipe,
    /// Optional conformal factor: the working representative is `metric · exp(2σ)`.
    pub sigma: Option<Expr>,
    pub tolerances: Tolerances,
    pub samples: usize,
    pub seed: u64,
    /// Null vectors drawn per sample point; defaults to `2n`.
    pub null_vectors: Option<usize>,
}

fn eval_list(exprs: &[Expr], label: &str, p: &[f64], order: u8) -> Result<Vec<Jet>> {
    exprs
        .iter()
        .enumerate()
        .map(|(i, e)| {
            e.eval(p, order).map_err(|source| Error::Domain {
                context: format!("{label}[{i}]"),
                source,
            })
        })
        .collect()
}

fn raise(ginv: &MetricValue, lower: &[Jet]) -> Vec<Jet> {
    let n = lower.len();
    (0..n)
        .map(|i| {
            let mut acc = ginv.get(i, 0) * &lower[0];
            for j in 1..n {
                acc = &acc + &(ginv.get(i, j) * &lower[j]);
            }
            acc
        })
        .collect()
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        load_scenario(&text)
    }

    pub fn null_vectors_per_point(&self) -> usize {
        self.null_vectors.unwrap_or(2 * self.dimension)
    }

    /// Working metric representative at `p`, including the optional σ factor.
    pub fn metric_at(&self, p: &[f64], order: u8) -> Result<MetricValue> {
        let g = self.metric.eval("metric", p, order)?;
        match &self.sigma {
            None => Ok(g),
            Some(sigma) => {
                let s = sigma.eval(p, order).map_err(|source| Error::Domain {
                    context: "sigma".into(),
                    source,
                })?;
                Ok(crate::geometry::conformal_rescale_metric(&g, &s))
            }
        }
    }

    /// Inverse of a metric value using this scenario's rank tolerance.
    pub fn invert(&self, g: &MetricValue, p: &[f64]) -> Result<MetricValue> {
        invert_metric_with_tolerance(g, self.tolerances.rank).map_err(|e| e.at_point(p))
    }

    /// Connection representative at `p` with jets of the given order (≤ 1).
    pub fn connection_at(&self, p: &[f64], order: u8) -> Result<ConnectionValue> {
        if order > 1 {
            return Err(JetError::InvalidOrder(order).into());
        }
        self.recipe_at(&self.connection, p, order)
    }

    fn recipe_at(&self, recipe: &ConnectionRecipe, p: &[f64], order: u8) -> Result<ConnectionValue> {
        let n = self.dimension;
        match recipe {
            ConnectionRecipe::LeviCivita { metric } => {
                let g = metric.eval("connection.metric", p, order + 1)?;
                let ginv = self.invert(&g, p)?;
                christoffel_with_inverse(&g, &ginv)
            }
            ConnectionRecipe::Explicit { gamma } => ConnectionValue::from_lower_symmetric(n, |i, j, k| {
                gamma[i].get(j, k).eval(p, order).map_err(|source| Error::Domain {
                    context: format!("connection.gamma[{i}][{j}][{k}]"),
                    source,
                })
            }),
            ConnectionRecipe::ModifiedS { metric, s } => {
                let g = metric.eval("connection.metric", p, order + 1)?;
                let ginv = self.invert(&g, p)?;
                let lc = christoffel_with_inverse(&g, &ginv)?;
                let s_up = match s {
                    SField::Vector(v) => eval_list(v, "connection.s", p, order)?,
                    SField::Covector(v) => raise(&ginv.truncate(order), &eval_list(v, "connection.s_flat", p, order)?),
                    SField::Potential(f) => {
                        let fj = f.eval(p, order + 1).map_err(|source| Error::Domain {
                            context: "connection.s_potential".into(),
                            source,
                        })?;
                        let df = (0..n).map(|k| fj.partial(k)).collect::<Result<Vec<_>, JetError>>()?;
                        raise(&ginv.truncate(order), &df)
                    }
                };
                ConnectionValue::from_lower_symmetric::<Error>(n, |i, j, k| {
                    Ok(lc.get(i, j, k) - &(&s_up[i] * g.get(j, k)))
                })
            }
            ConnectionRecipe::ProjectiveTransform { base, psi } => {
                let b = self.recipe_at(base, p, order)?;
                let psi = eval_list(psi, "connection.psi", p, order)?;
                Ok(projective_transform(&b, &psi))
            }
        }
    }

    /// Canonical JSON form of the scenario.
    pub fn to_json(&self) -> Value {
        let mut doc = Map::new();
        doc.insert("dimension".into(), json!(self.dimension));
        doc.insert("coordinates".into(), json!(self.coordinates.to_vec()));
        doc.insert("box".into(), json!({"min": self.sample_box.min, "max": self.sample_box.max}));
        doc.insert("metric".into(), self.metric.to_json());
        doc.insert("connection".into(), recipe_to_json(&self.connection));
        if let Some(s) = &self.sigma {
            doc.insert("sigma".into(), Value::String(s.source_text()));
        }
        doc.insert(
            "tolerances".into(),
            json!({
                "residual": self.tolerances.residual,
                "rank": self.tolerances.rank,
                "quadrature": self.tolerances.quadrature,
            }),
        );
        doc.insert("samples".into(), json!(self.samples));
        doc.insert("seed".into(), json!(self.seed));
        if let Some(k) = self.null_vectors {
            doc.insert("null_vectors".into(), json!(k));
        }
        Value::Object(doc)
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.to_json()).expect("scenario serializes");
        let hash = Sha256::digest(&bytes);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn exprs_to_json(v: &[Expr]) -> Value {
    Value::Array(v.iter().map(|e| Value::String(e.source_text())).collect())
}

fn recipe_to_json(r: &ConnectionRecipe) -> Value {
    match r {
        ConnectionRecipe::LeviCivita { metric } => json!({"kind": "levi_civita", "metric": metric.to_json()}),
        ConnectionRecipe::Explicit { gamma } => json!({
            "kind": "explicit",
            "gamma": Value::Array(gamma.iter().map(SymmetricExprs::to_json).collect()),
        }),
        ConnectionRecipe::ModifiedS { metric, s } => {
            let (key, val) = match s {
                SField::Vector(v) => ("s", exprs_to_json(v)),
                SField::Covector(v) => ("s_flat", exprs_to_json(v)),
                SField::Potential(f) => ("s_potential", Value::String(f.source_text())),
            };
            let mut m = Map::new();
            m.insert("kind".into(), json!("modified_s"));
            m.insert("metric".into(), metric.to_json());
            m.insert(key.into(), val);
            Value::Object(m)
        }
        ConnectionRecipe::ProjectiveTransform { base, psi } => json!({
            "kind": "projective_transform",
            "base": recipe_to_json(base),
            "psi": exprs_to_json(psi),
        }),
    }
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

struct Loader {
    coords: Arc<[String]>,
    n: usize,
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| schema(path, "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| schema(path, "expected an array"))
}

fn require<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| schema(path, format!("missing field '{key}'")))
}

fn check_keys(obj: &Map<String, Value>, allowed: &[&str], path: &str) -> Result<()> {
    for k in obj.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(schema(path, format!("unknown field '{k}'")));
        }
    }
    Ok(())
}

fn real(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| schema(path, "expected a finite number"))
}

fn reals(v: &Value, len: usize, path: &str) -> Result<Vec<f64>> {
    let a = as_array(v, path)?;
    if a.len() != len {
        return Err(schema(path, format!("expected {len} entries, got {}", a.len())));
    }
    a.iter().enumerate().map(|(i, x)| real(x, &format!("{path}[{i}]"))).collect()
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Loader {
    fn expr_opt(&self, v: &Value, path: &str) -> Result<Option<Expr>> {
        match v {
            Value::Null => Ok(None),
            Value::String(s) => parse_expression(s, &self.coords).map(Some).map_err(|source| Error::Parse {
                path: path.to_string(),
                source,
            }),
            Value::Number(_) => Ok(Some(Expr::constant(real(v, path)?, Arc::clone(&self.coords)))),
            _ => Err(schema(path, "expected an expression string or number")),
        }
    }

    fn expr(&self, v: &Value, path: &str) -> Result<Expr> {
        self.expr_opt(v, path)?.ok_or_else(|| schema(path, "expression required"))
    }

    fn vector(&self, v: &Value, path: &str) -> Result<Vec<Expr>> {
        let a = as_array(v, path)?;
        if a.len() != self.n {
            return Err(schema(path, format!("expected {} entries, got {}", self.n, a.len())));
        }
        a.iter().enumerate().map(|(i, e)| self.expr(e, &format!("{path}[{i}]"))).collect()
    }

    fn symmetric(&self, v: &Value, path: &str, what: &str) -> Result<SymmetricExprs> {
        let n = self.n;
        let rows = as_array(v, path)?;
        if rows.len() != n {
            return Err(schema(path, format!("expected {n} rows, got {}", rows.len())));
        }
        let mut slots: Vec<Option<Expr>> = vec![None; n * n];
        for (i, row) in rows.iter().enumerate() {
            let rp = format!("{path}[{i}]");
            let row = as_array(row, &rp)?;
            let first = if row.len() == n {
                0
            } else if row.len() == n - i {
                i
            } else {
                return Err(schema(&rp, format!("expected {n} or {} entries, got {}", n - i, row.len())));
            };
            for (off, e) in row.iter().enumerate() {
                let j = first + off;
                slots[i * n + j] = self.expr_opt(e, &format!("{rp}[{j}]"))?;
            }
        }
        for i in 0..n {
            for j in i..n {
                let upper = slots[i * n + j].take();
                let lower = slots[j * n + i].take();
                let v = match (upper, lower) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(schema(&format!("{path}[{i}][{j}]"), format!("asymmetric {what}: entry ({j},{i}) differs")))
                    }
                    (Some(a), _) | (None, Some(a)) => a,
                    (None, None) => return Err(schema(&format!("{path}[{i}][{j}]"), "missing entry")),
                };
                slots[j * n + i] = Some(v.clone());
                slots[i * n + j] = Some(v);
            }
        }
        Ok(SymmetricExprs {
            n,
            comps: slots.into_iter().map(Option::unwrap).collect(),
        })
    }

    fn recipe(&self, v: &Value, path: &str, metric: &SymmetricExprs) -> Result<ConnectionRecipe> {
        let obj = as_object(v, path)?;
        let kind = require(obj, "kind", path)?
            .as_str()
            .ok_or_else(|| schema(&format!("{path}.kind"), "expected a string"))?;
        let metric_or_default = |key: &str| -> Result<SymmetricExprs> {
            match obj.get(key) {
                Some(m) => self.symmetric(m, &format!("{path}.{key}"), "metric"),
                None => Ok(metric.clone()),
            }
        };
        match kind {
            "levi_civita" => {
                check_keys(obj, &["kind", "metric"], path)?;
                Ok(ConnectionRecipe::LeviCivita {
                    metric: metric_or_default("metric")?,
                })
            }
            "explicit" => {
                check_keys(obj, &["kind", "gamma"], path)?;
                let gp = format!("{path}.gamma");
                let g = as_array(require(obj, "gamma", path)?, &gp)?;
                if g.len() != self.n {
                    return Err(schema(&gp, format!("expected {} blocks, got {}", self.n, g.len())));
                }
                let gamma = g
                    .iter()
                    .enumerate()
                    .map(|(i, b)| self.symmetric(b, &format!("{gp}[{i}]"), "explicit gamma"))
                    .collect::<Result<_>>()?;
                Ok(ConnectionRecipe::Explicit { gamma })
            }
            "modified_s" => {
                check_keys(obj, &["kind", "metric", "s", "s_flat", "s_potential"], path)?;
                let given: Vec<&str> = ["s", "s_flat", "s_potential"]
                    .into_iter()
                    .filter(|k| obj.contains_key(*k))
                    .collect();
                if given.len() != 1 {
                    return Err(schema(path, "exactly one of 's', 's_flat', 's_potential' is required"));
                }
                let key = given[0];
                let val = &obj[key];
                let kp = format!("{path}.{key}");
                let s = match key {
                    "s" => SField::Vector(self.vector(val, &kp)?),
                    "s_flat" => SField::Covector(self.vector(val, &kp)?),
                    _ => SField::Potential(self.expr(val, &kp)?),
                };
                Ok(ConnectionRecipe::ModifiedS {
                    metric: metric_or_default("metric")?,
                    s,
                })
            }
            "projective_transform" => {
                check_keys(obj, &["kind", "base", "psi"], path)?;
                let base = self.recipe(require(obj, "base", path)?, &format!("{path}.base"), metric)?;
                let psi = self.vector(require(obj, "psi", path)?, &format!("{path}.psi"))?;
                Ok(ConnectionRecipe::ProjectiveTransform {
                    base: Box::new(base),
                    psi,
                })
            }
            other => Err(schema(&format!("{path}.kind"), format!("unknown connection kind '{other}'"))),
        }
    }
}

/// Parses and validates a scenario document.
pub fn load_scenario(document: &str) -> Result<Scenario> {
    let doc: Value = serde_json::from_str(document)?;
    scenario_from_value(&doc)
}

pub fn scenario_from_value(doc: &Value) -> Result<Scenario> {
    let root = as_object(doc, "$")?;
    check_keys(
        root,
        &[
            "dimension",
            "coordinates",
            "box",
            "metric",
            "connection",
            "sigma",
            "tolerances",
            "samples",
            "seed",
            "null_vectors",
            "description",
        ],
        "$",
    )?;
    let n = require(root, "dimension", "$")?
        .as_u64()
        .ok_or_else(|| schema("$.dimension", "expected a positive integer"))? as usize;
    if n < 2 {
        return Err(schema("$.dimension", format!("dimension must be at least 2, got {n}")));
    }
    let names = as_array(require(root, "coordinates", "$")?, "$.coordinates")?;
    if names.len() != n {
        return Err(schema("$.coordinates", format!("expected {n} names, got {}", names.len())));
    }
    let mut coords = Vec::with_capacity(n);
    for (i, v) in names.iter().enumerate() {
        let p = format!("$.coordinates[{i}]");
        let s = v.as_str().ok_or_else(|| schema(&p, "expected a string"))?;
        if !is_identifier(s) {
            return Err(schema(&p, format!("'{s}' is not an identifier")));
        }
        if coords.iter().any(|c| c == s) {
            return Err(schema(&p, format!("duplicate coordinate '{s}'")));
        }
        coords.push(s.to_string());
    }
    let loader = Loader {
        coords: coords.into(),
        n,
    };

    let bx = as_object(require(root, "box", "$")?, "$.box")?;
    check_keys(bx, &["min", "max"], "$.box")?;
    let min = reals(require(bx, "min", "$.box")?, n, "$.box.min")?;
    let max = reals(require(bx, "max", "$.box")?, n, "$.box.max")?;
    if min.iter().zip(&max).any(|(a, b)| a > b) {
        return Err(schema("$.box", "min exceeds max"));
    }

    let metric = loader.symmetric(require(root, "metric", "$")?, "$.metric", "metric")?;
    let connection = loader.recipe(require(root, "connection", "$")?, "$.connection", &metric)?;
    let sigma = root.get("sigma").map(|v| loader.expr(v, "$.sigma")).transpose()?;

    let mut tolerances = Tolerances::default();
    if let Some(t) = root.get("tolerances") {
        let t = as_object(t, "$.tolerances")?;
        check_keys(t, &["residual", "rank", "quadrature"], "$.tolerances")?;
        for (key, slot) in [
            ("residual", &mut tolerances.residual),
            ("rank", &mut tolerances.rank),
            ("quadrature", &mut tolerances.quadrature),
        ] {
            if let Some(v) = t.get(key) {
                let p = format!("$.tolerances.{key}");
                let x = real(v, &p)?;
                if x <= 0.0 {
                    return Err(schema(&p, "tolerance must be positive"));
                }
                *slot = x;
            }
        }
    }
    let samples = match root.get("samples") {
        None => DEFAULT_SAMPLES,
        Some(v) => v
            .as_u64()
            .filter(|s| *s >= 1)
            .ok_or_else(|| schema("$.samples", "expected a positive integer"))? as usize,
    };
    let seed = match root.get("seed") {
        None => DEFAULT_SEED,
        Some(v) => v.as_u64().ok_or_else(|| schema("$.seed", "expected a non-negative integer"))?,
    };
    let null_vectors = root
        .get("null_vectors")
        .map(|v| {
            v.as_u64()
                .map(|k| k as usize)
                .ok_or_else(|| schema("$.null_vectors", "expected a non-negative integer"))
        })
        .transpose()?;

    Ok(Scenario {
        dimension: n,
        coordinates: loader.coords,
        sample_box: SampleBox { min, max },
        metric,
        connection,
        sigma,
        tolerances,
        samples,
        seed,
        null_vectors,
    })
}
