//! Experiment configuration: flat `key = value` text with dotted keys and
//! JSON values. Bare words that are not valid JSON are read as strings.
//!
//! ```text
//! # comment
//! problem.family = "matrix-game"
//! problem.rows = 10
//! solver.mode = LMO-PO
//! solver.regime = C-C
//! budget.iterations = 100000
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::error::HarnessError;

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Every key the harness understands, with a one-line description.
pub const KNOWN_KEYS: &[(&str, &str)] = &[
    ("seed", "RNG seed for data generation (default 0)"),
    (
        "problem.family",
        "matrix-game | quadratic-saddle | dictionary-learning | robust-classification",
    ),
    ("problem.rows", "matrix game: rows of the random payoff"),
    ("problem.cols", "matrix game: columns of the random payoff"),
    (
        "problem.distribution",
        "matrix game: gaussian | uniform entries",
    ),
    (
        "problem.payoff",
        "matrix game: explicit payoff as [[...], ...]",
    ),
    ("problem.matrix", "matrix game: payoff file (CSV or MMX1)"),
    ("problem.dim", "quadratic saddle: dimension of x and y"),
    ("problem.mu_x", "quadratic saddle: curvature in x"),
    ("problem.mu_y", "quadratic saddle: curvature in y"),
    (
        "problem.coupling_noise",
        "quadratic saddle: B = I + noise * G / sqrt(dim)",
    ),
    ("problem.radius", "quadratic saddle: radius of both balls"),
    ("problem.sizes", "dictionary learning: desk | full"),
    ("problem.m", "dictionary learning: signal dimension"),
    (
        "problem.n",
        "dictionary learning / robust classification: sample count",
    ),
    ("problem.p", "dictionary learning: true dictionary size"),
    (
        "problem.l",
        "dictionary learning: rank of the true coefficients",
    ),
    ("problem.q", "dictionary learning: learned dictionary size"),
    ("problem.n_new", "dictionary learning: new sample count"),
    (
        "problem.data_dir",
        "dictionary learning: directory written by `generate`",
    ),
    (
        "problem.delta",
        "dictionary learning: fidelity tolerance (1e-4)",
    ),
    ("problem.r", "nuclear-ball radius (5 for DL, 10 for RC)"),
    ("problem.B", "dictionary learning: dual bound (1)"),
    ("problem.data", "robust classification: LIBSVM file"),
    (
        "problem.d",
        "robust classification: synthetic feature dimension",
    ),
    ("problem.k", "robust classification: synthetic class count"),
    (
        "problem.separation",
        "robust classification: synthetic class separation",
    ),
    (
        "problem.lambda",
        "robust classification: chi-square penalty (10)",
    ),
    ("solver.mode", "LMO-LMO | LMO-PO | PO-LMO"),
    (
        "solver.regime",
        "preset: NC-C, NC-SC, NC-C+SCY, NC-SC+SCY, C-C, C-SC, C-C+SCY, C-SC+SCY",
    ),
    ("solver.a", "explicit step exponent"),
    ("solver.b", "explicit smoothing exponent"),
    ("solver.C", "smoothing scale (default 1 when smoothing)"),
    ("solver.A", "projected-primal step coefficient (default 1)"),
    ("solver.scale", "explicit projected-primal step scale s"),
    (
        "solver.variant",
        "R-PDCG | CG-RPGA horizon-tuned constant schedules",
    ),
    ("solver.horizon", "horizon K for solver.variant"),
    ("budget.iterations", "iteration budget T"),
    ("budget.seconds", "solver-time budget in seconds"),
    ("metrics.cadence", "row every this many iterations (10)"),
    ("metrics.log_rows", "extra log-spaced rows per decade"),
    (
        "metrics.sigma",
        "parameter of the projected-gradient gap (tau_0)",
    ),
    (
        "metrics.inner_iters",
        "inner iterations of the certified dual gap (100)",
    ),
    (
        "metrics.averages",
        "maintain averaged gaps at every iterate (true)",
    ),
    (
        "metrics.tolerance",
        "stop once gap_x + gap_y falls below this",
    ),
    (
        "metrics.dual_ascent",
        "record the smallest per-step smoothed dual ascent (false)",
    ),
    ("output.dir", "output directory"),
    (
        "trace.timing",
        "write wall_ms into trace.csv (false; see timing.csv)",
    ),
    ("rate.grid", "explicit list of iteration counts"),
    ("rate.from", "first grid point (100)"),
    ("rate.to", "last grid point"),
    ("rate.per_decade", "grid points per decade (10)"),
    (
        "rate.metric",
        "avg_gap_y | avg_gap_x | gap_y | gap_x | duality_gap | primal_gap | objective",
    ),
    ("rate.expected", "theoretical exponent"),
    ("rate.band", "accepted slope interval [lo, hi]"),
    ("rate.window", "trailing-decade | all"),
    ("rate.input", "fit an existing trace.csv instead of running"),
    ("sweep.command", "run | rate for each sweep cell"),
];

/// A flat dotted-key configuration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, Value>,
}

fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

fn is_known(key: &str) -> bool {
    key.starts_with("sweep.") || KNOWN_KEYS.iter().any(|(k, _)| *k == key)
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!(
                    "line {}: expected key = value, found {line:?}",
                    i + 1
                ))
            })?;
            cfg.set(k.trim(), parse_value(v))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: Value) -> Result<()> {
        if !is_known(key) {
            return Err(HarnessError::Config(format!("unknown key {key:?}")));
        }
        self.entries.insert(key.to_string(), value);
        Ok(())
    }

    /// Applies a `key=value` override from the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| {
            HarnessError::Config(format!("--set expects key=value, got {pair:?}"))
        })?;
        self.set(k.trim(), parse_value(v))
    }

    pub fn remove(&mut self, key: &str) {
        self.entries.remove(key);
    }

    pub fn entries(&self) -> &BTreeMap<String, Value> {
        &self.entries
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key)
    }

    pub fn str(&self, key: &str) -> Result<Option<String>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(Value::Number(n)) => Ok(Some(n.to_string())),
            Some(v) => Err(type_error(key, "a string", v)),
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => value_f64(v)
                .map(Some)
                .ok_or_else(|| type_error(key, "a number", v)),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        match self.f64(key)? {
            None => Ok(None),
            Some(v) if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 => Ok(Some(v as u64)),
            Some(v) => Err(HarnessError::Config(format!(
                "{key} must be a nonnegative integer, got {v}"
            ))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        Ok(self.u64(key)?.map_or(default, |v| v as usize))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(Value::Bool(b)) => Ok(*b),
            Some(v) => Err(type_error(key, "true or false", v)),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| value_f64(v).ok_or_else(|| type_error(key, "a list of numbers", v)))
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(v) => Err(type_error(key, "a list of numbers", v)),
        }
    }

    pub fn path(&self, key: &str) -> Result<Option<PathBuf>> {
        Ok(self.str(key)?.map(PathBuf::from))
    }

    pub fn seed(&self) -> Result<u64> {
        Ok(self.u64("seed")?.unwrap_or(0))
    }

    /// `sweep.*` keys as (target key, values), in key order.
    pub fn sweep_axes(&self) -> Result<Vec<(String, Vec<Value>)>> {
        let mut axes = Vec::new();
        for (k, v) in &self.entries {
            let Some(target) = k.strip_prefix("sweep.") else {
                continue;
            };
            if target == "command" {
                continue;
            }
            if !is_known(target) || target.starts_with("sweep.") {
                return Err(HarnessError::Config(format!(
                    "sweep over unknown key {target:?}"
                )));
            }
            match v {
                Value::Array(items) if !items.is_empty() => {
                    axes.push((target.to_string(), items.clone()))
                }
                _ => {
                    return Err(HarnessError::Config(format!(
                        "{k} must be a nonempty list of values"
                    )))
                }
            }
        }
        Ok(axes)
    }

    /// The configuration as a JSON object, for summaries.
    pub fn to_json(&self) -> Value {
        Value::Object(
            self.entries
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        )
    }
}

/// Accepts numbers and simple fractions such as `"1/3"`.
fn value_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => {
            let s = s.trim();
            if let Some((num, den)) = s.split_once('/') {
                let (num, den): (f64, f64) = (num.trim().parse().ok()?, den.trim().parse().ok()?);
                (den != 0.0).then_some(num / den)
            } else {
                s.parse().ok()
            }
        }
        _ => None,
    }
}

fn type_error(key: &str, want: &str, got: &Value) -> HarnessError {
    HarnessError::Config(format!("{key} must be {want}, got {got}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_json_and_bare_values() {
        let cfg = Config::parse(
            "# demo\nsolver.mode = LMO-PO\nsolver.a = 1/3\nbudget.iterations = 100\nrate.band = [-0.5, -0.2]\n",
        )
        .unwrap();
        assert_eq!(cfg.str("solver.mode").unwrap().unwrap(), "LMO-PO");
        assert!((cfg.f64("solver.a").unwrap().unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(cfg.u64("budget.iterations").unwrap(), Some(100));
        assert_eq!(cfg.f64_list("rate.band").unwrap(), Some(vec![-0.5, -0.2]));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(Config::parse("solver.typo = 1").is_err());
        assert!(Config::parse("no equals sign").is_err());
        let cfg = Config::parse("budget.iterations = -3").unwrap();
        assert!(cfg.u64("budget.iterations").is_err());
    }
}
