//! Drift reports and their csv/json/text renderings.

use serde::{Deserialize, Serialize};

use crate::config::Format;
use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Floats that may be non-finite: stored as numbers when finite and as the
/// strings `"NaN"`, `"inf"`, `"-inf"` otherwise, so JSON round-trips.
mod lenient_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("NaN")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "NaN" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => Err(serde::de::Error::custom(format!("not a float: {s}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftRow {
    pub name: String,
    #[serde(with = "lenient_f64")]
    pub initial: f64,
    #[serde(with = "lenient_f64")]
    pub max_drift: f64,
    #[serde(with = "lenient_f64")]
    pub threshold: f64,
    pub pass: bool,
}

impl DriftRow {
    /// Passes iff `max_drift ≤ threshold` (a NaN drift fails).
    pub fn new(name: impl Into<String>, initial: f64, max_drift: f64, threshold: f64) -> Self {
        Self { name: name.into(), initial, max_drift, threshold, pass: max_drift <= threshold }
    }

    /// A yes/no check as a row with drift 0 or 1 and threshold 0.
    pub fn check(name: impl Into<String>, initial: f64, ok: bool) -> Self {
        Self::new(name, initial, if ok { 0.0 } else { 1.0 }, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetadata {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    /// Accepted integrator steps or map iterations, summed over the run.
    pub steps: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub schema: u32,
    pub metadata: RunMetadata,
    pub rows: Vec<DriftRow>,
}

impl Default for DriftReport {
    fn default() -> Self {
        Self { schema: SCHEMA_VERSION, metadata: RunMetadata::default(), rows: Vec::new() }
    }
}

impl DriftReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let r: Self = serde_json::from_slice(bytes).map_err(|e| CliError::Report(e.to_string()))?;
        if r.schema != SCHEMA_VERSION {
            return Err(CliError::Report(format!("unsupported schema {}", r.schema)));
        }
        Ok(r)
    }
}

/// 17 significant digits, so a printed value reads back bit-for-bit.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn status(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn report_render(r: &DriftReport, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(r).expect("report serializes");
            out.push(b'\n');
            out
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["name", "initial", "max_drift", "threshold", "pass"]).expect("in-memory write");
            for row in &r.rows {
                w.write_record([
                    row.name.clone(),
                    fmt_f64(row.initial),
                    fmt_f64(row.max_drift),
                    fmt_f64(row.threshold),
                    status(row.pass).to_string(),
                ])
                .expect("in-memory write");
            }
            w.into_inner().expect("in-memory flush")
        }
        Format::Text => {
            let m = &r.metadata;
            let mut out = format!(
                "# {} seed={} steps={} wall_time={:.3}s config={}\n",
                m.experiment, m.seed, m.steps, m.wall_time_s, m.config_hash
            );
            let width = r.rows.iter().map(|row| row.name.len()).max().unwrap_or(0);
            for row in &r.rows {
                out.push_str(&format!(
                    "{:<width$}  initial {:>24}  drift {:>10.3e}  threshold {:>8.1e}  {}\n",
                    row.name,
                    fmt_f64(row.initial),
                    row.max_drift,
                    row.threshold,
                    status(row.pass)
                ));
            }
            out.into_bytes()
        }
    }
}
