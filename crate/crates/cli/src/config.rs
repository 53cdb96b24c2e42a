//! Experiment configuration: a flat TOML file plus command-line overrides.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use integrable_core::bachet::{parse_rational, BigRational};
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{CliError, Result};

pub const DEFAULT_TOL: f64 = 1e-10;

/// Top-level keys that are run settings rather than parameters.
const RUN_KEYS: [&str; 8] = ["experiment", "seed", "tol", "steps", "format", "output", "jobs", "params"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Oscillator,
    EulerTop,
    Tshift,
    Catmap,
    Bachet,
    Geodesic,
    Knoerrer,
    Neumann,
    GeodesicEquivalence,
    ProjectiveChart,
}

impl Experiment {
    pub fn id(self) -> &'static str {
        match self {
            Self::Oscillator => "oscillator",
            Self::EulerTop => "euler-top",
            Self::Tshift => "tshift",
            Self::Catmap => "catmap",
            Self::Bachet => "bachet",
            Self::Geodesic => "geodesic",
            Self::Knoerrer => "knoerrer",
            Self::Neumann => "neumann",
            Self::GeodesicEquivalence => "geodesic-equivalence",
            Self::ProjectiveChart => "projective-chart",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Text,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_jobs() -> usize {
    1
}

/// One experiment: which construction, its parameters, and run settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Sample count for flows, iteration count for maps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    /// Experiment parameters; numbers may be written as `"p/q"` strings.
    #[serde(default)]
    pub params: Table,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub tol: Option<f64>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub params: Table,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: 0,
            tol: DEFAULT_TOL,
            steps: None,
            format: Format::Text,
            output: None,
            jobs: 1,
            params: Table::new(),
        }
    }

    /// Parses a config file. Keys other than the run settings are
    /// experiment parameters, whether at top level or under `[params]`.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table = text.parse::<Table>().map_err(|e| CliError::Parse(e.to_string()))?;
        let cfg = Self::from_table(table)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_table(mut table: Table) -> Result<Self> {
        let loose: Vec<String> = table.keys().filter(|k| !RUN_KEYS.contains(&k.as_str())).cloned().collect();
        if !loose.is_empty() {
            let mut params = match table.remove("params") {
                None => Table::new(),
                Some(Value::Table(t)) => t,
                Some(other) => return Err(CliError::Parse(format!("params must be a table, got {other}"))),
            };
            for k in loose {
                let v = table.remove(&k).expect("key listed above");
                if params.insert(k.clone(), v).is_some() {
                    return Err(CliError::Parse(format!("parameter {k} given twice")));
                }
            }
            table.insert("params".into(), Value::Table(params));
        }
        Self::deserialize(table).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads `path` (if any), fills in `experiment`, applies overrides.
    pub fn load(path: Option<&Path>, experiment: Experiment, overrides: Overrides) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| CliError::Read { path: p.to_path_buf(), source })?;
                text.parse::<Table>()
                    .map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        match table.get("experiment") {
            None => {
                table.insert("experiment".into(), Value::String(experiment.id().into()));
            }
            Some(Value::String(s)) if s == experiment.id() => {}
            Some(other) => {
                return Err(CliError::Invalid(format!(
                    "config is for experiment {other}, but the command was {experiment}"
                )))
            }
        }
        let mut cfg = Self::from_table(table)?;
        if let Some(v) = overrides.output {
            cfg.output = Some(v);
        }
        if let Some(v) = overrides.format {
            cfg.format = v;
        }
        if let Some(v) = overrides.tol {
            cfg.tol = v;
        }
        if let Some(v) = overrides.steps {
            cfg.steps = Some(v);
        }
        if let Some(v) = overrides.seed {
            cfg.seed = v;
        }
        if let Some(v) = overrides.jobs {
            cfg.jobs = v;
        }
        cfg.params.extend(overrides.params);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CliError::Invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if i64::try_from(self.seed).is_err() {
            return Err(CliError::Invalid(format!("seed must be at most {}, got {}", i64::MAX, self.seed)));
        }
        if self.jobs == 0 {
            return Err(CliError::Invalid("jobs must be at least 1".into()));
        }
        if self.steps == Some(0) {
            return Err(CliError::Invalid("steps must be at least 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the settings that determine the results (not output
    /// location, report format or parallelism).
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = None;
        canonical.format = Format::Text;
        canonical.jobs = 1;
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Typed access to `params`; [`Params::finish`] rejects keys nobody read.
pub struct Params<'a> {
    table: &'a Table,
    used: RefCell<BTreeSet<String>>,
}

fn invalid(key: &str, what: &str, v: &Value) -> CliError {
    CliError::Invalid(format!("parameter {key}: expected {what}, got {v}"))
}

fn value_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Integer(i) => Ok(*i as f64),
        Value::Float(f) => Ok(*f),
        Value::String(s) => parse_rational(s)
            .ok()
            .and_then(|r| r.to_f64())
            .ok_or_else(|| invalid(key, "a number", v)),
        _ => Err(invalid(key, "a number", v)),
    }
}

fn value_rational(key: &str, v: &Value) -> Result<BigRational> {
    match v {
        Value::Integer(i) => Ok(BigRational::from_integer((*i).into())),
        Value::String(s) => parse_rational(s).map_err(|_| invalid(key, "a rational \"p/q\"", v)),
        _ => Err(invalid(key, "a rational \"p/q\" or an integer", v)),
    }
}

fn value_list<'v>(key: &str, v: &'v Value) -> Result<&'v Vec<Value>> {
    v.as_array().ok_or_else(|| invalid(key, "a list", v))
}

impl<'a> Params<'a> {
    pub fn new(table: &'a Table) -> Self {
        Self { table, used: RefCell::new(BTreeSet::new()) }
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.used.borrow_mut().insert(key.to_string());
        self.table.get(key)
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map_or(Ok(default), |v| value_f64(key, v))
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
            Some(v) => Err(invalid(key, "a non-negative integer", v)),
        }
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>> {
        if self.table.contains_key(key) {
            self.usize(key, 0).map(Some)
        } else {
            self.used.borrow_mut().insert(key.to_string());
            Ok(None)
        }
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(v) => Err(invalid(key, "true or false", v)),
        }
    }

    pub fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => value_list(key, v)?.iter().map(|x| value_f64(key, x)).collect(),
        }
    }

    pub fn opt_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => value_list(key, v)?.iter().map(|x| value_f64(key, x)).collect::<Result<_>>().map(Some),
        }
    }

    /// A list of lists, e.g. matrix rows.
    pub fn opt_f64_rows(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => value_list(key, v)?
                .iter()
                .map(|row| value_list(key, row)?.iter().map(|x| value_f64(key, x)).collect())
                .collect::<Result<_>>()
                .map(Some),
        }
    }

    pub fn i64_list(&self, key: &str, default: &[i64]) -> Result<Vec<i64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => value_list(key, v)?
                .iter()
                .map(|x| x.as_integer().ok_or_else(|| invalid(key, "integers", x)))
                .collect(),
        }
    }

    pub fn rational(&self, key: &str, default: &str) -> Result<BigRational> {
        match self.get(key) {
            None => Ok(parse_rational(default).expect("valid default")),
            Some(v) => value_rational(key, v),
        }
    }

    pub fn rational_list(&self, key: &str, default: &[&str]) -> Result<Vec<BigRational>> {
        match self.get(key) {
            None => Ok(default.iter().map(|s| parse_rational(s).expect("valid default")).collect()),
            Some(v) => value_list(key, v)?.iter().map(|x| value_rational(key, x)).collect(),
        }
    }

    pub fn opt_rational_list(&self, key: &str) -> Result<Option<Vec<BigRational>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => value_list(key, v)?.iter().map(|x| value_rational(key, x)).collect::<Result<_>>().map(Some),
        }
    }

    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self.table.keys().filter(|k| !used.contains(*k)).map(String::as_str).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Invalid(format!("unknown parameter(s): {}", unknown.join(", "))))
        }
    }
}
