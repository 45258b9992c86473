//! Command-line entry point.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use clap::{Parser, Subcommand};

use crate::config::{ExperimentConfig, Scenario};
use crate::error::HarnessError;
use crate::output::persist;
use crate::report::write_report;
use crate::runner::execute;
use crate::table::Format;

/// Environment variable that overrides `--out`.
pub const OUT_ENV: &str = "MSLLN_OUT";

#[derive(Debug, Parser)]
#[command(name = "mslln", version, about = "Dyadic partial-sum experiments for heavy-tailed long-memory linear processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML experiment config; its scenario must match the subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Base seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Replications per grid point.
    #[arg(long, global = true)]
    pub reps: Option<usize>,

    /// Largest dyadic level R (horizon 2^R).
    #[arg(long, global = true)]
    pub levels: Option<u32>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write generated path pairs.
    Simulate,
    /// Seven-piece decomposition of the centered partial sums.
    Decompose,
    /// Empirical growth exponents against the theoretical ones.
    Rates,
    /// Stochastic-approximation error decay.
    Sa,
    /// Normalized autocovariance deviations.
    Autocov,
    /// Second Appell polynomial partial sums.
    Appell,
    /// Plot tables from a finished `rates` run in the output directory.
    Report,
}

impl Command {
    fn scenario(self) -> Option<Scenario> {
        Some(match self {
            Self::Simulate => Scenario::Simulate,
            Self::Decompose => Scenario::Decompose,
            Self::Rates => Scenario::Rates,
            Self::Sa => Scenario::Sa,
            Self::Autocov => Scenario::Autocov,
            Self::Appell => Scenario::Appell,
            Self::Report => return None,
        })
    }
}

/// Config after applying file, flags and defaults, in that order of
/// precedence reversed: flags win over the file, the file over defaults.
pub fn effective_config(cli: &Cli, scenario: Scenario) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| HarnessError::Validation(format!("cannot read {}: {e}", path.display())))?;
            let config = ExperimentConfig::from_toml(&text)?;
            if config.scenario != scenario {
                return Err(HarnessError::Validation(format!(
                    "config scenario `{}` does not match subcommand `{}`",
                    config.scenario.name(),
                    scenario.name()
                )));
            }
            config
        }
        None => ExperimentConfig::default_for(scenario),
    };
    if let Some(seed) = cli.seed {
        config.base_seed = seed;
    }
    if let Some(reps) = cli.reps {
        config.replications = reps;
    }
    if let Some(levels) = cli.levels {
        config.levels = levels;
    }
    Ok(config)
}

fn out_dir(cli: &Cli, config: Option<&ExperimentConfig>, default: &str) -> PathBuf {
    if let Some(dir) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    cli.out
        .clone()
        .or_else(|| config.and_then(|c| c.out_dir.clone()))
        .unwrap_or_else(|| Path::new("mslln-out").join(default))
}

/// Runs a parsed command. `Ok(true)` means every grid point succeeded.
pub fn dispatch(cli: &Cli) -> Result<bool, HarnessError> {
    let Some(scenario) = cli.command.scenario() else {
        let dir = out_dir(cli, None, "rates");
        for f in write_report(&dir, cli.format)? {
            println!("{}", dir.join(&f.path).display());
        }
        return Ok(true);
    };
    let config = effective_config(cli, scenario)?;
    let dir = out_dir(cli, Some(&config), scenario.name());
    let started = SystemTime::now();
    let outcome = execute(&config, cli.jobs as usize)?;
    let manifest = persist(&dir, &config, &outcome, cli.format, started)?;
    for f in &manifest.files {
        println!("{}\t{} rows", dir.join(&f.path).display(), f.rows);
    }
    for f in &outcome.failures {
        eprintln!("grid point {} failed: {}", f.grid, f.message);
    }
    Ok(!outcome.failed())
}

/// Parses `args` (program name first) and runs; returns the process exit
/// code: 0 success, 1 run failure, 2 usage error, 3 validation failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
