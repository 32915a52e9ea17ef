//! Command-line harness for fairness-to-welfare interpolation experiments.
//!
//! `fwi sweep` runs Simple-Mix or epsilon-Mix across a grid of fairness
//! budgets and writes `alpha,means,variance` CSV; `fwi oracle-check` verifies
//! the guarantees on small enumerable instances; `fwi ingest-check` parses an
//! input file and prints a summary.

pub mod args;
pub mod checks;
mod error;
pub mod sweep;

use std::io::Write;
use std::path::{Path, PathBuf};

pub use args::{parse_args, ArgsError, Cli, Command};
pub use error::{CliError, CliResult};
pub use sweep::{emit_csv, run_sweep, sweep_instance, ExperimentConfig, SweepResult, SweepRow};

/// Environment variable naming the directory for sweep output when
/// `--output` is absent.
pub const OUTPUT_DIR_ENV: &str = "FWI_OUTPUT_DIR";

/// Executes a parsed command, writing its output. Returns the path written,
/// or `None` when the output went to stdout.
pub fn execute(cli: &Cli) -> CliResult<Option<PathBuf>> {
    match &cli.command {
        Command::Sweep(args) => {
            let cfg = ExperimentConfig::from_args(args)?;
            let text = emit_csv(&run_sweep(&cfg)?)?;
            let target = cfg
                .output_path
                .clone()
                .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(|dir| Path::new(&dir).join(cfg.default_file_name())));
            write_output(target.as_deref(), &text)?;
            Ok(target)
        }
        Command::OracleCheck(args) => {
            let outcome = checks::run_oracle_check(args)?;
            write_output(args.output.as_deref(), &outcome.report)?;
            if outcome.passed {
                Ok(args.output.clone())
            } else {
                Err(CliError::CheckFailed("guarantee check failed; see the report".into()))
            }
        }
        Command::IngestCheck(args) => {
            let text = checks::run_ingest_check(args)?;
            write_output(args.output.as_deref(), &text)?;
            Ok(args.output.clone())
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> CliResult<()> {
    let Some(path) = path else {
        let mut stdout = std::io::stdout().lock();
        return stdout
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Write { path: "<stdout>".into(), source });
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}
