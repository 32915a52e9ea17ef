use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "fwi", version, about = "Fairness-to-welfare interpolation experiments")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep alpha and write `alpha,means,variance` CSV.
    Sweep(SweepArgs),
    /// Check the fairness and welfare guarantees on an enumerable preset.
    OracleCheck(OracleArgs),
    /// Parse a bid or demographic file and summarize it.
    IngestCheck(IngestArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    /// Uniform random goods allocation.
    Synthetic,
    /// Reviewer assignment from a bid file.
    Bids,
    /// Panel selection from a demographic CSV.
    Sortition,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Synthetic => "synthetic",
            Scenario::Bids => "bids",
            Scenario::Sortition => "sortition",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmChoice {
    #[value(name = "simple_mix")]
    SimpleMix,
    #[value(name = "epsilon_mix")]
    EpsilonMix,
}

impl AlgorithmChoice {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmChoice::SimpleMix => "simple_mix",
            AlgorithmChoice::EpsilonMix => "epsilon_mix",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Two solutions where Simple-Mix meets its bound exactly.
    Tight,
    /// Worthless prior and a lambda-approximate mechanism.
    ZeroPrior,
    /// A random instance with no fairness budget.
    AlphaZero,
    /// A random instance with an exact mechanism.
    Random,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Tight => "tight",
            Preset::ZeroPrior => "zero-prior",
            Preset::AlphaZero => "alpha-zero",
            Preset::Random => "random",
        }
    }
}

#[derive(Clone, Debug, Default, Args)]
pub struct SweepArgs {
    /// Key=value file supplying defaults for any flag below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub scenario: Option<Scenario>,
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmChoice>,
    /// Comma-separated values in (0, 1]; fractions like `3/20` are accepted.
    /// Defaults to 1/20, 2/20, ..., 19/20.
    #[arg(long)]
    pub alpha_grid: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub batches: Option<usize>,
    /// Prior samples per epsilon-Mix call, overriding the scenario default.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Synthetic: number of agents.
    #[arg(long)]
    pub agents: Option<usize>,
    /// Synthetic: number of goods.
    #[arg(long)]
    pub items: Option<usize>,
    /// Bids: reviewers per paper.
    #[arg(long)]
    pub demand: Option<usize>,
    /// Sortition: panel size.
    #[arg(long)]
    pub panel_size: Option<usize>,
    /// Sortition: z-score the numeric columns.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
    /// Approximation factor claimed for the welfare mechanism.
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug, Default, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Experiment scenarios have no explicit prior and are rejected.
    #[arg(long, value_enum)]
    pub scenario: Option<Scenario>,
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmChoice>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Prior samples per epsilon-Mix call; small values can break the
    /// welfare bound.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Zero-prior preset only.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Monte Carlo runs.
    #[arg(long)]
    pub runs: Option<u64>,
    /// Random presets: number of solutions.
    #[arg(long)]
    pub solutions: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `bids` reads a bid file, `sortition` a demographic CSV.
    #[arg(long, value_enum)]
    pub scenario: Option<Scenario>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Bids: reviewers per paper used for the feasibility check.
    #[arg(long)]
    pub demand: Option<usize>,
    /// Demographics: z-score the numeric columns.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub standardize: Option<bool>,
}

impl Command {
    fn config(&self) -> Option<&Path> {
        match self {
            Command::Sweep(a) => a.config.as_deref(),
            Command::OracleCheck(a) => a.config.as_deref(),
            Command::IngestCheck(a) => a.config.as_deref(),
        }
    }
}

/// Parses arguments, splicing the `--config` file's entries in front of the
/// command-line flags so that explicit flags win.
pub fn parse_args<I, T>(args: I) -> Result<Cli, ArgsError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = Cli::try_parse_from(&args).map_err(ArgsError::Clap)?;
    let Some(path) = cli.command.config() else {
        return Ok(cli);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| ArgsError::Cli(CliError::usage(format!("cannot read config {}: {e}", path.display()))))?;
    let tokens = config_tokens(&text).map_err(ArgsError::Cli)?;
    let split = args.len().min(2);
    let spliced: Vec<OsString> =
        args[..split].iter().cloned().chain(tokens.into_iter().map(OsString::from)).chain(args[split..].iter().cloned()).collect();
    Cli::try_parse_from(spliced).map_err(ArgsError::Clap)
}

/// `key = value` lines become `--key value`; `#` starts a comment.
pub fn config_tokens(text: &str) -> CliResult<Vec<String>> {
    let mut tokens = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("config line {}: expected key=value", n + 1)))?;
        let key = key.trim().replace('_', "-");
        if key == "config" {
            return Err(CliError::usage(format!("config line {}: nested config files are not supported", n + 1)));
        }
        tokens.push(format!("--{key}"));
        tokens.push(value.trim().to_string());
    }
    Ok(tokens)
}

#[derive(Debug)]
pub enum ArgsError {
    Clap(clap::Error),
    Cli(CliError),
}

/// Default grid `1/20, ..., 19/20`.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..20).map(|k| k as f64 / 20.0).collect()
}

pub fn parse_alpha_grid(text: &str) -> CliResult<Vec<f64>> {
    let grid = text
        .split(',')
        .map(|item| {
            let item = item.trim();
            let value = match item.split_once('/') {
                Some((num, den)) => num.trim().parse::<f64>().ok().zip(den.trim().parse::<f64>().ok()).map(|(n, d)| n / d),
                None => item.parse::<f64>().ok(),
            };
            match value {
                Some(a) if a > 0.0 && a <= 1.0 => Ok(a),
                _ => Err(CliError::usage(format!("alpha grid entry {item:?} is not a number in (0, 1]"))),
            }
        })
        .collect::<CliResult<Vec<f64>>>()?;
    if grid.is_empty() {
        return Err(CliError::usage("alpha grid is empty"));
    }
    Ok(grid)
}
