use std::path::PathBuf;
use std::sync::Arc;

use fwi_core::assignment::{
    balanced_load_cap, goods_fwi_instance, reviewer_fwi_instance, synthetic_instance,
};
use fwi_core::ingest::{bids_to_instance, parse_bids, parse_demographics, FeatureConfig};
use fwi_core::mix::tabulated_sample_size;
use fwi_core::seed;
use fwi_core::sortition::{sortition_fwi_instance, InitialPanel};
use fwi_core::{Algorithm, FwiInstance, Solution};
use rayon::prelude::*;

use crate::args::{default_alpha_grid, parse_alpha_grid, AlgorithmChoice, Scenario, SweepArgs};
use crate::error::{CliError, CliResult};

/// Seed path component reserved for instance construction, so instance
/// draws never collide with per-cell streams.
const INSTANCE_STREAM: u64 = u64::MAX;

/// Prior samples per epsilon-Mix call on the bid and sortition scenarios.
pub const FIXED_SAMPLES: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub algorithm: AlgorithmChoice,
    pub alpha_grid: Vec<f64>,
    pub epsilon: Option<f64>,
    pub n_rounds: usize,
    pub n_batches: usize,
    pub n_eps_override: Option<usize>,
    pub seed: u64,
    pub input_path: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    pub agents: usize,
    pub items: usize,
    pub demand: usize,
    pub panel_size: usize,
    pub standardize: bool,
    pub lambda: Option<f64>,
}

impl ExperimentConfig {
    /// Published defaults for a scenario and algorithm.
    pub fn new(scenario: Scenario, algorithm: AlgorithmChoice) -> Self {
        let (rounds, batches) = match (scenario, algorithm) {
            (Scenario::Sortition, AlgorithmChoice::SimpleMix) => (20, 5),
            (Scenario::Sortition, AlgorithmChoice::EpsilonMix) => (10, 5),
            (_, AlgorithmChoice::SimpleMix) => (100, 10),
            (_, AlgorithmChoice::EpsilonMix) => (50, 5),
        };
        ExperimentConfig {
            scenario,
            algorithm,
            alpha_grid: default_alpha_grid(),
            epsilon: (algorithm == AlgorithmChoice::EpsilonMix).then_some(0.1),
            n_rounds: rounds,
            n_batches: batches,
            n_eps_override: None,
            seed: 0,
            input_path: None,
            output_path: None,
            agents: 100,
            items: 5,
            demand: 3,
            panel_size: 10,
            standardize: false,
            lambda: None,
        }
    }

    pub fn from_args(args: &SweepArgs) -> CliResult<Self> {
        let scenario = args.scenario.ok_or_else(|| CliError::usage("--scenario is required"))?;
        let algorithm = args.algorithm.ok_or_else(|| CliError::usage("--algorithm is required"))?;
        let mut cfg = ExperimentConfig::new(scenario, algorithm);
        cfg.epsilon = args.epsilon;
        if let Some(grid) = &args.alpha_grid {
            cfg.alpha_grid = parse_alpha_grid(grid)?;
        }
        cfg.n_rounds = args.rounds.unwrap_or(cfg.n_rounds);
        cfg.n_batches = args.batches.unwrap_or(cfg.n_batches);
        cfg.n_eps_override = args.samples;
        cfg.seed = args.seed.unwrap_or(cfg.seed);
        cfg.input_path = args.input.clone();
        cfg.output_path = args.output.clone();
        cfg.agents = args.agents.unwrap_or(cfg.agents);
        cfg.items = args.items.unwrap_or(cfg.items);
        cfg.demand = args.demand.unwrap_or(cfg.demand);
        cfg.panel_size = args.panel_size.unwrap_or(cfg.panel_size);
        cfg.standardize = args.standardize.unwrap_or(false);
        cfg.lambda = args.lambda;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.alpha_grid.is_empty() || self.alpha_grid.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return Err(CliError::usage("alpha grid values must lie in (0, 1]"));
        }
        match (self.algorithm, self.epsilon) {
            (AlgorithmChoice::EpsilonMix, None) => return Err(CliError::usage("epsilon_mix needs --epsilon")),
            (AlgorithmChoice::EpsilonMix, Some(e)) if !(e > 0.0 && e < 1.0) => {
                return Err(CliError::usage(format!("--epsilon must lie in (0, 1), got {e}")))
            }
            (AlgorithmChoice::SimpleMix, Some(_)) => {
                return Err(CliError::usage("--epsilon applies to epsilon_mix only"))
            }
            _ => {}
        }
        if self.algorithm == AlgorithmChoice::SimpleMix && self.n_eps_override.is_some() {
            return Err(CliError::usage("--samples applies to epsilon_mix only"));
        }
        if self.n_eps_override == Some(0) {
            return Err(CliError::usage("--samples must be positive"));
        }
        if self.n_rounds == 0 || self.n_batches == 0 {
            return Err(CliError::usage("--rounds and --batches must be positive"));
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l <= 1.0) {
                return Err(CliError::usage(format!("--lambda must lie in (0, 1], got {l}")));
            }
            if self.scenario == Scenario::Synthetic {
                return Err(CliError::usage("--lambda is fixed to 1 on the synthetic scenario"));
            }
        }
        if self.scenario != Scenario::Synthetic && self.input_path.is_none() {
            return Err(CliError::usage(format!("the {} scenario needs --input", self.scenario.name())));
        }
        Ok(())
    }

    /// Algorithm invoked at one alpha. Without an override the synthetic
    /// scenario uses the epsilon-derived sample count and the others a fixed
    /// [`FIXED_SAMPLES`].
    pub fn algorithm_at(&self, alpha: f64) -> CliResult<Algorithm> {
        Ok(match self.algorithm {
            AlgorithmChoice::SimpleMix => Algorithm::SimpleMix,
            AlgorithmChoice::EpsilonMix => {
                let epsilon = self.epsilon.ok_or_else(|| CliError::usage("epsilon_mix needs --epsilon"))?;
                let samples = match (self.n_eps_override, self.scenario) {
                    (Some(n), _) => n,
                    // The welfare mechanism always fires, so samples are never drawn.
                    (None, _) if alpha >= 1.0 => 1,
                    (None, Scenario::Synthetic) => tabulated_sample_size(alpha, epsilon)?,
                    (None, _) => FIXED_SAMPLES,
                };
                Algorithm::EpsilonMix { epsilon, samples: Some(samples) }
            }
        })
    }

    /// File name used under the output directory when `--output` is absent.
    pub fn default_file_name(&self) -> String {
        let eps = self.epsilon.map(|e| e.to_string()).unwrap_or_else(|| "none".into());
        format!("{}_{}_{}_{}batches.csv", self.scenario.name(), self.algorithm.name(), eps, self.n_batches)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub mean: f64,
    /// Standard deviation of the batch means.
    pub std: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Batch means per row, in batch order.
    pub batch_means: Vec<Vec<f64>>,
}

pub fn run_sweep(cfg: &ExperimentConfig) -> CliResult<SweepResult> {
    cfg.validate()?;
    let first = cfg.alpha_grid[0];
    let instance_rng = || seed::stream(cfg.seed, &[INSTANCE_STREAM]);
    let input = || cfg.input_path.as_ref().expect("validated");
    match cfg.scenario {
        Scenario::Synthetic => {
            let graph = synthetic_instance(cfg.agents, cfg.items, &mut instance_rng())?;
            let instance = goods_fwi_instance(Arc::new(graph), first)?;
            sweep_instance(&instance, cfg)
        }
        Scenario::Bids => {
            let corpus = parse_bids(input())?;
            let (nl, nr) = (corpus.reviewers().len(), corpus.papers().len());
            let graph = bids_to_instance(&corpus, cfg.demand, balanced_load_cap(nl, nr, cfg.demand))?;
            let instance = reviewer_fwi_instance(Arc::new(graph), first, cfg.lambda.unwrap_or(0.5))?;
            sweep_instance(&instance, cfg)
        }
        Scenario::Sortition => {
            let features = FeatureConfig { standardize: cfg.standardize, ..FeatureConfig::adult() };
            let points = parse_demographics(input(), &features)?;
            let initial = InitialPanel::Seeded(seed::derive_seed(cfg.seed, &[INSTANCE_STREAM, 1]));
            let instance =
                sortition_fwi_instance(Arc::new(points), cfg.panel_size, initial, cfg.lambda.unwrap_or(1.0), first)?;
            sweep_instance(&instance, cfg)
        }
    }
}

/// Runs every (alpha, batch) cell in parallel. Round `r` of batch `b` at
/// `alpha` draws from the stream `(seed, alpha bits, b, r)`, so results do
/// not depend on scheduling or on the other grid values.
pub fn sweep_instance<S: Solution>(instance: &FwiInstance<S>, cfg: &ExperimentConfig) -> CliResult<SweepResult> {
    let grid = &cfg.alpha_grid;
    let instances = grid.iter().map(|&a| instance.with_alpha(a)).collect::<fwi_core::Result<Vec<_>>>()?;
    let algorithms = grid.iter().map(|&a| cfg.algorithm_at(a)).collect::<CliResult<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> =
        (0..grid.len()).flat_map(|a| (0..cfg.n_batches).map(move |b| (a, b))).collect();
    let means = cells
        .par_iter()
        .map(|&(a, b)| {
            let inst = &instances[a];
            let mut total = 0.0;
            for r in 0..cfg.n_rounds {
                let mut rng = seed::stream(cfg.seed, &[grid[a].to_bits(), b as u64, r as u64]);
                let solution = algorithms[a].run(inst, &mut rng)?;
                total += inst.value().value(&solution);
            }
            Ok(total / cfg.n_rounds as f64)
        })
        .collect::<fwi_core::Result<Vec<f64>>>()?;

    let batch_means: Vec<Vec<f64>> = means.chunks(cfg.n_batches).map(<[f64]>::to_vec).collect();
    let rows = grid
        .iter()
        .zip(&batch_means)
        .map(|(&alpha, batches)| {
            let n = batches.len() as f64;
            let mean = batches.iter().sum::<f64>() / n;
            let std = if batches.len() > 1 {
                (batches.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            SweepRow { alpha, mean, std }
        })
        .collect();
    Ok(SweepResult { rows, batch_means })
}

/// Ten significant digits; plain notation unless the magnitude is extreme.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..=15).contains(&magnitude) {
        return format!("{x:.9e}");
    }
    let decimals = (9 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn emit_csv(result: &SweepResult) -> CliResult<String> {
    if result.rows.is_empty() {
        return Err(CliError::usage("sweep result is empty"));
    }
    let mut out = String::from("alpha,means,variance\n");
    for row in &result.rows {
        out.push_str(&format!("{},{},{}\n", fmt_sig(row.alpha), fmt_sig(row.mean), fmt_sig(row.std)));
    }
    Ok(out)
}

/// Reads back the output of [`emit_csv`].
pub fn parse_csv(text: &str) -> Option<Vec<SweepRow>> {
    let mut lines = text.lines();
    if lines.next()? != "alpha,means,variance" {
        return None;
    }
    lines
        .map(|line| {
            let mut f = line.split(',').map(|x| x.parse::<f64>().ok());
            let row = SweepRow { alpha: f.next()??, mean: f.next()??, std: f.next()?? };
            f.next().is_none().then_some(row)
        })
        .collect()
}
