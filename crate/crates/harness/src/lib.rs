//! Configuration, deterministic parallel execution and persistence for
//! experiments built on `mslln-core`.
//!
//! A run resolves every grid point of an [`ExperimentConfig`] up front, then
//! executes replications on a rayon pool. Replication `i` of grid point `g`
//! uses the seed `mix(base_seed, g, i)`, so output files are byte-identical
//! for any thread count.

pub mod cli;
pub mod config;
pub mod error;
pub mod output;
pub mod report;
pub mod runner;
pub mod table;

pub use config::{ExperimentConfig, GridPoint, Scenario};
pub use error::HarnessError;
pub use output::Manifest;
pub use runner::{execute, Outcome};
pub use table::{Cell, Format, Table};

use std::path::Path;
use std::time::SystemTime;

/// Executes `config` with `jobs` threads and writes its tables and manifest
/// into `dir`.
pub fn run_experiment(
    config: &ExperimentConfig,
    dir: &Path,
    jobs: usize,
    format: Format,
) -> Result<(Outcome, Manifest), HarnessError> {
    let started = SystemTime::now();
    let outcome = execute(config, jobs)?;
    let manifest = output::persist(dir, config, &outcome, format, started)?;
    Ok((outcome, manifest))
}
