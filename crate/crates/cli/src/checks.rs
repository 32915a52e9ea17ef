use fwi_core::assignment::balanced_load_cap;
use fwi_core::ingest::{bids_to_instance, parse_bids, read_demographics, BidLabel, FeatureConfig};
use fwi_core::oracle::{check_algorithm, presets, OracleInstance};
use fwi_core::Algorithm;
use fwi_core::seed;

use crate::args::{AlgorithmChoice, IngestArgs, OracleArgs, Preset, Scenario};
use crate::error::{CliError, CliResult};

pub const DEFAULT_RUNS: u64 = 100_000;

/// Outcome of `oracle-check`: the report text and whether every check held.
#[derive(Clone, Debug)]
pub struct OracleOutcome {
    pub report: String,
    pub passed: bool,
}

pub fn oracle_instance(args: &OracleArgs) -> CliResult<OracleInstance> {
    if let Some(s) = args.scenario {
        return Err(CliError::OracleUnavailable(format!(
            "the {} scenario has no enumerable solution space or explicit prior; use --preset",
            s.name()
        )));
    }
    let preset = args.preset.unwrap_or(Preset::Tight);
    if args.lambda.is_some() && preset != Preset::ZeroPrior {
        return Err(CliError::usage("--lambda applies to the zero-prior preset only"));
    }
    if args.solutions.is_some() && !matches!(preset, Preset::Random | Preset::AlphaZero) {
        return Err(CliError::usage("--solutions applies to the random presets only"));
    }
    let alpha = args.alpha.unwrap_or(0.5);
    let mut rng = seed::stream(args.seed.unwrap_or(0), &[u64::MAX]);
    let n = args.solutions.unwrap_or(8);
    Ok(match preset {
        Preset::Tight => presets::tightness(alpha)?,
        Preset::ZeroPrior => presets::zero_prior(args.lambda.unwrap_or(0.5), alpha)?,
        Preset::AlphaZero => {
            if args.alpha.is_some_and(|a| a != 0.0) {
                return Err(CliError::usage("the alpha-zero preset fixes alpha to 0"));
            }
            presets::random(n, 0.0, &mut rng)?
        }
        Preset::Random => presets::random(n, alpha, &mut rng)?,
    })
}

pub fn run_oracle_check(args: &OracleArgs) -> CliResult<OracleOutcome> {
    let instance = oracle_instance(args)?;
    let algorithm = args.algorithm.unwrap_or(AlgorithmChoice::SimpleMix);
    let algorithm_spec = match (algorithm, args.epsilon) {
        (AlgorithmChoice::SimpleMix, Some(_)) => return Err(CliError::usage("--epsilon applies to epsilon_mix only")),
        (AlgorithmChoice::SimpleMix, None) if args.samples.is_some() => {
            return Err(CliError::usage("--samples applies to epsilon_mix only"))
        }
        (AlgorithmChoice::SimpleMix, None) => Algorithm::SimpleMix,
        (AlgorithmChoice::EpsilonMix, None) => return Err(CliError::usage("epsilon_mix needs --epsilon")),
        (AlgorithmChoice::EpsilonMix, Some(epsilon)) => {
            if !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(CliError::usage(format!("--epsilon must lie in (0, 1), got {epsilon}")));
            }
            if args.samples == Some(0) {
                return Err(CliError::usage("--samples must be positive"));
            }
            Algorithm::EpsilonMix { epsilon, samples: args.samples }
        }
    };
    let runs = args.runs.unwrap_or(DEFAULT_RUNS);
    let mut rng = seed::stream(args.seed.unwrap_or(0), &[0]);
    let report = check_algorithm(&instance, algorithm_spec, runs, &mut rng)?;
    let preset = args.preset.unwrap_or(Preset::Tight);
    let text = format!("preset={}\nalgorithm={}\n{}", preset.name(), algorithm.name(), report.to_record());
    Ok(OracleOutcome { report: text, passed: report.passed() })
}

pub fn run_ingest_check(args: &IngestArgs) -> CliResult<String> {
    let input = args.input.as_ref().ok_or_else(|| CliError::usage("--input is required"))?;
    let mut out = String::new();
    let mut put = |k: &str, v: String| out.push_str(&format!("{k}={v}\n"));
    match args.scenario {
        Some(Scenario::Bids) => {
            if args.standardize.is_some() {
                return Err(CliError::usage("--standardize applies to demographic files only"));
            }
            let corpus = parse_bids(input)?;
            let demand = args.demand.unwrap_or(3);
            let (nl, nr) = (corpus.reviewers().len(), corpus.papers().len());
            let cap = balanced_load_cap(nl, nr, demand);
            put("format", "bids".into());
            put("reviewers", nl.to_string());
            put("papers", nr.to_string());
            put("bids", corpus.len().to_string());
            for label in [BidLabel::Yes, BidLabel::Maybe, BidLabel::NoResponse, BidLabel::No] {
                let count = corpus.bids().filter(|b| b.2 == label).count();
                put(label.as_str(), count.to_string());
            }
            put("demand", demand.to_string());
            put("load_cap", cap.to_string());
            put("feasible", u8::from(bids_to_instance(&corpus, demand, cap).is_ok()).to_string());
        }
        Some(Scenario::Sortition) => {
            if args.demand.is_some() {
                return Err(CliError::usage("--demand applies to bid files only"));
            }
            let config = FeatureConfig { standardize: args.standardize.unwrap_or(false), ..FeatureConfig::adult() };
            let table = read_demographics(input, &config)?;
            let points = table.to_points(config.standardize)?;
            put("format", "demographics".into());
            put("rows", table.rows.len().to_string());
            put("dropped_missing", table.dropped_missing.to_string());
            put("duplicates_removed", table.duplicates_removed.to_string());
            put("points", points.len().to_string());
            put("dimension", points.dim().to_string());
        }
        Some(Scenario::Synthetic) => return Err(CliError::usage("the synthetic scenario has no input file")),
        None => return Err(CliError::usage("--scenario is required (bids or sortition)")),
    }
    Ok(out)
}
