//! Experiment runner: configs in, drift reports and data files out.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{Experiment, ExperimentConfig, Format, Overrides, Params};
pub use error::{CliError, Result};
pub use experiments::DataFile;
pub use report::{report_render, DriftReport, DriftRow, RunMetadata, SCHEMA_VERSION};

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: DriftReport,
    /// Data files followed by `report.json`.
    pub files: Vec<DataFile>,
}

/// Runs the experiment entirely in memory; nothing touches the disk.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let outcome = experiments::dispatch(cfg)?;
    let report = DriftReport {
        schema: SCHEMA_VERSION,
        metadata: RunMetadata {
            experiment: cfg.experiment.id().to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            steps: outcome.steps,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        rows: outcome.rows,
    };
    let mut files = outcome.files;
    files.push(DataFile { name: "report.json".into(), contents: report_render(&report, Format::Json) });
    Ok(RunOutput { report, files })
}

pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| Path::new("results").join(cfg.experiment.id()))
}

/// Writes every file through a temporary name and a rename.
pub fn write_outputs(dir: &Path, out: &RunOutput) -> Result<()> {
    let write_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Write { path, source }
    };
    std::fs::create_dir_all(dir).map_err(write_err(dir))?;
    for f in &out.files {
        let tmp = dir.join(format!(".{}.tmp", f.name));
        let dst = dir.join(&f.name);
        std::fs::write(&tmp, &f.contents).map_err(write_err(&tmp))?;
        std::fs::rename(&tmp, &dst).map_err(write_err(&dst))?;
    }
    Ok(())
}
