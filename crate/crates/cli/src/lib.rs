//! `swag fit | simulate | classify | diagnose`.
//!
//! Every command is deterministic given its inputs and `--seed`; the
//! `SWAG_THREADS` environment variable only changes how per-group work is
//! scheduled, never the numbers produced.

mod args;
mod classify;
mod diagnose;
mod fit;
mod manifest;
mod simulate;

pub use args::{Cli, ClassifyArgs, Command, Common, DiagnoseArgs, FitArgs, Schedule, SimulateArgs};
pub use classify::{cmd_classify, ClassifyMethod, ClassifyOutcome};
pub use diagnose::{cmd_diagnose, summarize_draws, DrawDiagnostics};
pub use fit::cmd_fit;
pub use manifest::RunManifest;
pub use simulate::{cmd_simulate, replicate_seed, SimulationTable};

use swag_core::{MatrixShape, Result, SwagConfig, SwagError};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => cmd_fit(&a).map(|_| ()),
        Command::Simulate(a) => cmd_simulate(&a).map(|table| print!("{}", table.to_csv())),
        Command::Classify(a) => cmd_classify(&a).map(|_| ()),
        Command::Diagnose(a) => cmd_diagnose(&a).map(|d| print!("{}", d.report())),
    }
}

/// Sizes the global thread pool from `SWAG_THREADS`. `0` and `1` both mean
/// serial; unset leaves rayon's default.
pub fn configure_threads(value: Option<&str>) -> Result<()> {
    let Some(v) = value else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| SwagError::InvalidConfig(format!("SWAG_THREADS='{v}' is not a count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global()
        .map_err(|e| SwagError::InvalidConfig(format!("thread pool: {e}")))
}

/// Defaults for `shape`, then the `--config` file, then flags.
pub(crate) fn load_config(common: &Common, schedule: &Schedule, shape: MatrixShape) -> Result<SwagConfig> {
    let mut config = SwagConfig::defaults(shape);
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)?;
        config = config.apply_overrides(&text, shape)?;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(v) = schedule.iterations {
        config.iterations = v;
    }
    if let Some(v) = schedule.burn_in {
        config.burn_in = v;
    }
    if let Some(v) = schedule.thin {
        config.thin = v;
    }
    config.validate(shape)?;
    Ok(config)
}
