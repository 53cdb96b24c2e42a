use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use integrable_cli::{output_dir, report_render, run, write_outputs, CliError, Experiment, ExperimentConfig, Format, Overrides};
use toml::Value;

#[derive(Parser)]
#[command(name = "integrable", version, about = "Run an integrable-systems experiment and report invariant drift")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default results/<experiment>).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Report format on stdout.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Integrator tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Output samples for flows, iterations for maps.
    #[arg(long, global = true)]
    steps: Option<usize>,

    /// Seed for randomly drawn initial data
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for independent sub-runs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Harmonic oscillator with modulated frequency.
    Oscillator,
    /// N-dimensional Euler top with modulated inertia.
    EulerTop,
    /// Iterates the period map of the modulated top.
    Tshift,
    /// Cotangent lift of a hyperbolic toral automorphism.
    Catmap,
    /// Exact Bachet duplication chain.
    Bachet {
        /// Curve constant in y^2 = x^3 + c.
        #[arg(long = "c", allow_hyphen_values = true)]
        c: Option<String>,
        /// Starting point "x,y".
        #[arg(long, allow_hyphen_values = true)]
        start: Option<String>,
    },
    /// Geodesics on a central quadric.
    Geodesic,
    /// Geodesic to Neumann transformation.
    Knoerrer,
    /// Neumann system on the sphere.
    Neumann,
    /// Geodesics of the second metric against standard geodesics.
    GeodesicEquivalence,
    /// The second metric in a projective chart of the closure.
    ProjectiveChart,
}

impl Command {
    fn experiment(&self) -> Experiment {
        match self {
            Self::Oscillator => Experiment::Oscillator,
            Self::EulerTop => Experiment::EulerTop,
            Self::Tshift => Experiment::Tshift,
            Self::Catmap => Experiment::Catmap,
            Self::Bachet { .. } => Experiment::Bachet,
            Self::Geodesic => Experiment::Geodesic,
            Self::Knoerrer => Experiment::Knoerrer,
            Self::Neumann => Experiment::Neumann,
            Self::GeodesicEquivalence => Experiment::GeodesicEquivalence,
            Self::ProjectiveChart => Experiment::ProjectiveChart,
        }
    }
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let mut overrides = Overrides {
        output: cli.output,
        format: cli.format,
        tol: cli.tol,
        steps: cli.steps,
        seed: cli.seed,
        jobs: cli.jobs,
        ..Default::default()
    };
    if let Command::Bachet { c, start } = &cli.command {
        if let Some(c) = c {
            overrides.params.insert("c".into(), Value::String(c.clone()));
        }
        if let Some(start) = start {
            let parts: Vec<Value> = start.split(',').map(|s| Value::String(s.trim().to_string())).collect();
            overrides.params.insert("start".into(), Value::Array(parts));
        }
    }
    let cfg = ExperimentConfig::load(cli.config.as_deref(), cli.command.experiment(), overrides)?;
    let out = run(&cfg)?;
    write_outputs(&output_dir(&cfg), &out)?;
    std::io::stdout()
        .write_all(&report_render(&out.report, cfg.format))
        .map_err(|source| CliError::Write { path: "<stdout>".into(), source })?;
    Ok(out.report.passed())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
