//! `kostlan`: run replicated zero-set experiments and write reports.
//!
//! Exit status is 0 when every check passes, 2 when a check fails and 1 on
//! error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kostlan::harness::{run_experiment, Experiment, ExperimentConfig, Format, Method};

#[derive(Parser)]
#[command(name = "kostlan", version, about = "Zero sets of KSS random polynomial systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample means of the zero-set volume against the exact mean.
    Mean(Flags),
    /// Sample variances across degrees against the Kac-Rice variance.
    Varscale(Flags),
    /// Normality of the standardized volume.
    Clt(Flags),
    /// Partial sums of the chaos variance terms against the Kac-Rice variance.
    Chaos(Flags),
    /// Nodal length of the local limit field on the unit square.
    Local(Flags),
    /// Covariance profile on an angle grid.
    Covdump(Flags),
}

/// Flags override the values read from `--config`.
#[derive(Args)]
struct Flags {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    d: Option<u32>,
    /// Comma-separated degrees.
    #[arg(long, value_delimiter = ',')]
    d_grid: Option<Vec<u32>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mesh_level: Option<u32>,
    /// marching or crofton.
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    n_mc: Option<usize>,
    #[arg(long)]
    n_circles: Option<usize>,
    #[arg(long)]
    q_max: Option<u32>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    n_waves: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<Format>,
    #[arg(long)]
    workers: Option<usize>,
}

impl Flags {
    fn into_config(self, experiment: Experiment) -> kostlan::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?,
            None => ExperimentConfig::default(),
        };
        c.experiment = experiment;
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { c.$field = v; })*
            };
        }
        set!(m => m, r => r, reps => replicates, seed => seed, method => method, n_mc => n_mc,
             n_circles => n_circles, q_max => q_max, grid => grid, n_waves => n_waves, format => format);
        if self.d.is_some() {
            c.d = self.d;
            c.d_grid = None;
        }
        if self.d_grid.is_some() {
            c.d_grid = self.d_grid;
        }
        if self.mesh_level.is_some() {
            c.mesh_level = self.mesh_level;
        }
        if self.out.is_some() {
            c.output = self.out;
        }
        if self.workers.is_some() {
            c.workers = self.workers;
        }
        Ok(c)
    }
}

fn run(cli: Cli) -> kostlan::Result<bool> {
    let (experiment, flags) = match cli.command {
        Command::Mean(f) => (Experiment::Mean, f),
        Command::Varscale(f) => (Experiment::VarianceScaling, f),
        Command::Clt(f) => (Experiment::Clt, f),
        Command::Chaos(f) => (Experiment::Chaos, f),
        Command::Local(f) => (Experiment::Local, f),
        Command::Covdump(f) => (Experiment::CovarianceDump, f),
    };
    let config = flags.into_config(experiment)?;
    let report = run_experiment(&config)?;
    report.write(config.format, config.output.as_deref())?;
    for c in &report.checks {
        eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
