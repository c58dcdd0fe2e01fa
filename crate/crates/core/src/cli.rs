//! Command-line front end.
//!
//! Exit codes: 0 success or compatible, 2 incompatible or a non-generic cone
//! configuration, 1 any other error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use crate::compat::{check_compatibility, CompatReport, WORST_POINTS};
use crate::cone::reconstruct_conformal;
use crate::error::{Error, Result};
use crate::recover::{integrate_phi, recover_metric, verify_recovery};
use crate::scenario::{load_scenario, scenario_from_value, Scenario};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "confproj", version, about = "Compatibility of conformal and projective structures on a chart")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunOpts {
    /// Number of sample points (overrides the scenario).
    #[arg(long)]
    pub samples: Option<usize>,
    /// RNG seed (overrides the scenario).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Residual tolerance for conditions (A), (B) and the EPS test.
    #[arg(long)]
    pub tol_residual: Option<f64>,
    /// Quadrature tolerance for recovery.
    #[arg(long)]
    pub tol_quadrature: Option<f64>,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Do not print the report to stdout.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Builtin {
    Minkowski,
    Euclidean,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario for compatibility.
    Check {
        scenario: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Check a scenario and, if compatible, recover the metric.
    Recover {
        scenario: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
        /// Base point of the line integral (defaults to the box center).
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        base: Option<Point>,
        /// Query point (defaults to the base point).
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        at: Option<Point>,
    },
    /// Reconstruct a conformal class from null vectors.
    Cone {
        vectors: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Write a `modified_s` scenario.
    GenExample {
        /// Built-in metric on coordinates x1..xn over [-1, 1]^n.
        #[arg(long, value_enum, conflicts_with = "metric")]
        builtin: Option<Builtin>,
        #[arg(long, default_value_t = 3)]
        dimension: usize,
        /// JSON file with "metric" and optionally "dimension", "coordinates", "box".
        #[arg(long)]
        metric: Option<PathBuf>,
        /// Comma-separated components of S.
        #[arg(long, conflicts_with = "s_grad", allow_hyphen_values = true)]
        s: Option<String>,
        /// Potential f with S_i = ∂_i f.
        #[arg(long, allow_hyphen_values = true)]
        s_grad: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A comma-separated list of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(pub Vec<f64>);

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("'{t}' is not a finite real"))
        })
        .collect::<std::result::Result<_, _>>()
        .map(Point)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

/// Outcome of a command: the exit code and the document to emit, if any.
#[derive(Debug)]
pub struct Outcome {
    pub code: u8,
    pub report: Option<Value>,
}

/// Parses arguments, runs the command and writes its output. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonGenericConfiguration { .. } => 2,
        _ => 1,
    }
}

fn emit(report: &Value, out: Option<&Path>, quiet: bool) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    if let Some(path) = out {
        std::fs::write(path, &text)?;
    }
    if !quiet {
        print!("{text}");
    }
    Ok(())
}

pub fn run(command: &Command) -> Result<u8> {
    match command {
        Command::Check { scenario, opts } => {
            let s = load_with(scenario, opts)?;
            let o = cmd_check(&s)?;
            finish(o, opts.out.as_deref(), opts.quiet)
        }
        Command::Recover {
            scenario,
            opts,
            base,
            at,
        } => {
            let s = load_with(scenario, opts)?;
            let o = cmd_recover(&s, base.as_ref().map(|p| p.0.as_slice()), at.as_ref().map(|p| p.0.as_slice()))?;
            finish(o, opts.out.as_deref(), opts.quiet)
        }
        Command::Cone { vectors, out, quiet } => {
            let doc: Value = serde_json::from_str(&read(vectors)?)?;
            let o = cmd_cone(&doc)?;
            finish(o, out.as_deref(), *quiet)
        }
        Command::GenExample {
            builtin,
            dimension,
            metric,
            s,
            s_grad,
            samples,
            seed,
            out,
        } => {
            let base = match (builtin, metric) {
                (_, Some(path)) => serde_json::from_str(&read(path)?)?,
                (Some(b), None) => builtin_metric(*b, *dimension)?,
                (None, None) => return Err(Error::InvalidInput("one of --builtin or --metric is required".into())),
            };
            let sfield = match (s, s_grad) {
                (Some(list), _) => SInput::Components(list.split(',').map(|c| c.trim().to_string()).collect()),
                (None, Some(f)) => SInput::Gradient(f.clone()),
                (None, None) => SInput::Zero,
            };
            let scenario = cmd_gen_example(&base, &sfield, *samples, *seed)?;
            let mut text = serde_json::to_string_pretty(&scenario.to_json())?;
            text.push('\n');
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
    }
}

fn finish(o: Outcome, out: Option<&Path>, quiet: bool) -> Result<u8> {
    if let Some(r) = &o.report {
        emit(r, out, quiet)?;
    }
    Ok(o.code)
}

fn load_with(path: &Path, opts: &RunOpts) -> Result<Scenario> {
    let mut s = load_scenario(&read(path)?)?;
    if let Some(n) = opts.samples {
        s.samples = n;
    }
    if let Some(seed) = opts.seed {
        s.seed = seed;
    }
    if let Some(t) = opts.tol_residual {
        s.tolerances.residual = t;
    }
    if let Some(t) = opts.tol_quadrature {
        s.tolerances.quadrature = t;
    }
    if s.samples == 0 {
        return Err(Error::InvalidInput("samples must be positive".into()));
    }
    Ok(s)
}

/// The compatibility part of a report.
pub fn check_report(s: &Scenario, r: &CompatReport) -> Value {
    let eps = match r.max_eps {
        Some(e) => json!(e),
        None => json!("vacuous"),
    };
    let worst: Vec<Value> = r
        .worst(WORST_POINTS)
        .into_iter()
        .map(|p| json!({"point": p.point, "A": p.a, "B": p.b}))
        .collect();
    json!({
        "verdict": r.verdict.as_str(),
        "eps_verdict": r.eps_verdict.as_str(),
        "residuals": {"A": r.max_a, "B": r.max_b, "eps": eps},
        "samples": r.samples,
        "skipped": r.skipped.len(),
        "null_vectors": r.eps_vectors,
        "seed": r.seed,
        "tolerances": {
            "residual": r.tolerances.residual,
            "rank": r.tolerances.rank,
            "quadrature": r.tolerances.quadrature,
        },
        "worst": worst,
        "scenario_digest": s.digest(),
        "version": VERSION,
    })
}

pub fn cmd_check(s: &Scenario) -> Result<Outcome> {
    let r = check_compatibility(s)?;
    Ok(Outcome {
        code: if r.verdict.is_compatible() { 0 } else { 2 },
        report: Some(check_report(s, &r)),
    })
}

pub fn cmd_recover(s: &Scenario, base: Option<&[f64]>, at: Option<&[f64]>) -> Result<Outcome> {
    let r = check_compatibility(s)?;
    let mut report = check_report(s, &r);
    if !r.verdict.is_compatible() {
        return Ok(Outcome {
            code: 2,
            report: Some(report),
        });
    }
    let center = s.sample_box.center();
    let base = base.unwrap_or(&center);
    let at = at.unwrap_or(base);
    let phi = integrate_phi(s, base, at)?;
    let g = &recover_metric(s, base, &[at.to_vec()])?[0];
    let v = verify_recovery(s, base)?;
    let n = s.dimension;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| g.get(i, j).value()).collect()).collect();
    report.as_object_mut().expect("report is an object").insert(
        "recovery".into(),
        json!({
            "base": base,
            "at": at,
            "phi": phi,
            "metric": rows,
            "deviation": v.normalized,
            "raw_deviation": v.max_deviation,
            "pass": v.pass,
        }),
    );
    Ok(Outcome {
        code: if v.pass { 0 } else { 2 },
        report: Some(report),
    })
}

/// Reads `{"dimension": n, "vectors": [[...], ...]}` and reconstructs the metric.
pub fn cmd_cone(doc: &Value) -> Result<Outcome> {
    let schema = |path: &str, message: &str| Error::Schema {
        path: path.into(),
        message: message.into(),
    };
    let obj = doc.as_object().ok_or_else(|| schema("$", "expected an object"))?;
    let n = obj
        .get("dimension")
        .and_then(Value::as_u64)
        .ok_or_else(|| schema("$.dimension", "expected a positive integer"))? as usize;
    let list = obj
        .get("vectors")
        .and_then(Value::as_array)
        .ok_or_else(|| schema("$.vectors", "expected an array of vectors"))?;
    let mut vectors = Vec::with_capacity(list.len());
    for (k, v) in list.iter().enumerate() {
        let path = format!("$.vectors[{k}]");
        let row = v.as_array().ok_or_else(|| schema(&path, "expected an array of numbers"))?;
        let row: Option<Vec<f64>> = row.iter().map(Value::as_f64).collect();
        vectors.push(row.ok_or_else(|| schema(&path, "expected an array of numbers"))?);
    }
    let g = reconstruct_conformal(&vectors, n)?;
    let rows: Vec<Vec<f64>> = g.chunks(n).map(<[f64]>::to_vec).collect();
    Ok(Outcome {
        code: 0,
        report: Some(json!({"dimension": n, "vectors": vectors.len(), "metric": rows, "version": VERSION})),
    })
}

/// How `S` is supplied to [`cmd_gen_example`].
#[derive(Debug, Clone)]
pub enum SInput {
    Zero,
    Components(Vec<String>),
    Gradient(String),
}

pub fn builtin_metric(b: Builtin, n: usize) -> Result<Value> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("dimension must be at least 2, got {n}")));
    }
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match (i == j, b) {
                    (false, _) => "0".to_string(),
                    (true, Builtin::Minkowski) if i == 0 => "-1".to_string(),
                    (true, _) => "1".to_string(),
                })
                .collect()
        })
        .collect();
    Ok(json!({"dimension": n, "metric": rows}))
}

/// Builds a `modified_s` scenario on the metric in `base`.
pub fn cmd_gen_example(base: &Value, s: &SInput, samples: Option<usize>, seed: Option<u64>) -> Result<Scenario> {
    let obj = base.as_object().ok_or_else(|| Error::Schema {
        path: "$".into(),
        message: "expected an object".into(),
    })?;
    let metric = obj.get("metric").cloned().ok_or_else(|| Error::Schema {
        path: "$.metric".into(),
        message: "missing".into(),
    })?;
    let n = match obj.get("dimension").and_then(Value::as_u64) {
        Some(n) => n as usize,
        None => metric.as_array().map(Vec::len).unwrap_or(0),
    };
    let coords = obj
        .get("coordinates")
        .cloned()
        .unwrap_or_else(|| json!((1..=n).map(|i| format!("x{i}")).collect::<Vec<_>>()));
    let sample_box = obj
        .get("box")
        .cloned()
        .unwrap_or_else(|| json!({"min": vec![-1.0; n], "max": vec![1.0; n]}));
    let mut conn = Map::new();
    conn.insert("kind".into(), json!("modified_s"));
    match s {
        SInput::Zero => {
            conn.insert("s".into(), json!(vec!["0"; n]));
        }
        SInput::Components(c) => {
            conn.insert("s".into(), json!(c));
        }
        SInput::Gradient(f) => {
            conn.insert("s_potential".into(), json!(f));
        }
    }
    let mut doc = Map::new();
    doc.insert("dimension".into(), json!(n));
    doc.insert("coordinates".into(), coords);
    doc.insert("box".into(), sample_box);
    doc.insert("metric".into(), metric);
    doc.insert("connection".into(), Value::Object(conn));
    if let Some(k) = samples {
        doc.insert("samples".into(), json!(k));
    }
    if let Some(k) = seed {
        doc.insert("seed".into(), json!(k));
    }
    scenario_from_value(&Value::Object(doc))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_parse() {
        assert_eq!(parse_point("0.5, -1,2e-1").unwrap(), Point(vec![0.5, -1.0, 0.2]));
        assert!(parse_point("1,,2").is_err());
        assert!(parse_point("nan").is_err());
    }

    #[test]
    fn generated_eps_family_fails_b() {
        let base = builtin_metric(Builtin::Minkowski, 3).unwrap();
        let s = cmd_gen_example(&base, &SInput::Components(vec!["0".into(), "0".into(), "x2".into()]), Some(30), None)
            .unwrap();
        let o = cmd_check(&s).unwrap();
        let r = o.report.unwrap();
        assert_eq!(o.code, 2);
        assert_eq!(r["verdict"], "fails_B");
        assert_eq!(r["eps_verdict"], "holds");
    }

    #[test]
    fn generated_gradient_example_is_compatible() {
        let base = builtin_metric(Builtin::Minkowski, 3).unwrap();
        let s = cmd_gen_example(&base, &SInput::Gradient("x1*x2 + sin(x3)".into()), Some(30), None).unwrap();
        assert_eq!(cmd_check(&s).unwrap().code, 0);
        let zero = cmd_gen_example(&base, &SInput::Zero, Some(10), None).unwrap();
        assert_eq!(cmd_check(&zero).unwrap().code, 0);
    }

    #[test]
    fn euclidean_has_vacuous_eps() {
        let base = builtin_metric(Builtin::Euclidean, 2).unwrap();
        let s = cmd_gen_example(&base, &SInput::Zero, Some(10), None).unwrap();
        let r = cmd_check(&s).unwrap().report.unwrap();
        assert_eq!(r["residuals"]["eps"], "vacuous");
        assert_eq!(r["eps_verdict"], "vacuous");
    }

    #[test]
    fn cone_documents() {
        let o = cmd_cone(&json!({"dimension": 2, "vectors": [[1, 1], [1, -1]]})).unwrap();
        assert_eq!(o.report.unwrap()["metric"], json!([[1.0, 0.0], [0.0, -1.0]]));
        let e = cmd_cone(&json!({"dimension": 2, "vectors": [[1, 1], [2, 2]]})).unwrap_err();
        assert_eq!(exit_code(&e), 2);
        let e = cmd_cone(&json!({"dimension": 3, "vectors": [[1, 1, 0]]})).unwrap_err();
        assert_eq!(exit_code(&e), 1);
        assert!(e.to_string().contains("TooFewVectors"));
        assert!(matches!(cmd_cone(&json!({"dimension": 2, "vectors": [["a"]]})), Err(Error::Schema { .. })));
    }
}
