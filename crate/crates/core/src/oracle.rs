//! Exact constructions and guarantee checks for small instances whose fair
//! prior is known explicitly and whose solution space can be enumerated.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rayon::prelude::*;

use crate::distribution::{expected_value, tv_distance, Distribution, SolutionId};
use crate::error::{check_unit, Error, Result};
use crate::instance::{
    ExplicitPrior, FixedMechanism, FwiInstance, Solution, TabularValue, UtilityTable, ValueFunction,
};
use crate::mix::{simple_mix_distribution, Algorithm};
use crate::{seed, TOLERANCE};

/// Largest explicit solution space the oracle accepts.
pub const MAX_ORACLE_SOLUTIONS: usize = 100_000;

/// Runs per parallel work unit in [`estimate_output_law`]. Fixed so the
/// result does not depend on the number of worker threads.
const RUNS_PER_CHUNK: u64 = 8192;

/// An instance with an enumerable solution space, an explicit prior and a
/// deterministic mechanism output `A`.
#[derive(Clone, Debug)]
pub struct OracleInstance {
    values: TabularValue,
    prior: Distribution,
    mechanism_output: SolutionId,
    lambda: f64,
    alpha: f64,
}

impl OracleInstance {
    pub fn new(
        values: TabularValue,
        prior: Distribution,
        mechanism_output: SolutionId,
        lambda: f64,
        alpha: f64,
    ) -> Result<Self> {
        check_unit("alpha", alpha)?;
        if values.len() > MAX_ORACLE_SOLUTIONS {
            return Err(Error::Scale { what: "oracle mode", size: values.len(), limit: MAX_ORACLE_SOLUTIONS });
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::param(format!("lambda must lie in (0, 1], got {lambda}")));
        }
        if let Some(s) = prior.support().find(|s| s.0 >= values.len()) {
            return Err(Error::param(format!("prior solution {s} is outside the value table")));
        }
        if mechanism_output.0 >= values.len() {
            return Err(Error::param(format!("mechanism output {mechanism_output} is outside the value table")));
        }
        let claimed = lambda * values.max_value();
        if values.value(&mechanism_output) < claimed - TOLERANCE {
            return Err(Error::param(format!(
                "mechanism output has value {} below lambda * V(Opt) = {claimed}",
                values.value(&mechanism_output)
            )));
        }
        Ok(OracleInstance { values, prior, mechanism_output, lambda, alpha })
    }

    pub fn values(&self) -> &TabularValue {
        &self.values
    }

    pub fn prior(&self) -> &Distribution {
        &self.prior
    }

    pub fn mechanism_output(&self) -> SolutionId {
        self.mechanism_output
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_unit("alpha", alpha)?;
        Ok(OracleInstance { alpha, ..self.clone() })
    }

    /// The sampling view used by the mixing algorithms.
    pub fn to_fwi(&self) -> FwiInstance<SolutionId> {
        FwiInstance::new(
            Arc::new(self.values.clone()),
            Arc::new(ExplicitPrior::new(self.prior.clone())),
            Arc::new(FixedMechanism::new(self.mechanism_output, self.lambda).expect("lambda validated")),
            self.alpha,
        )
        .expect("parameters validated")
    }

    pub fn decomposition(&self) -> Result<OptDecomposition> {
        build_p_opt(&self.prior, &self.values, self.alpha)
    }
}

/// The optimal `alpha`-fair distribution and the split of the prior into its
/// top `1 - alpha` and bottom `alpha` fractions by value.
#[derive(Clone, Debug)]
pub struct OptDecomposition {
    pub alpha: f64,
    pub p_opt: Distribution,
    /// Normalized top fraction; absent when `alpha = 1`.
    pub p_alpha: Option<Distribution>,
    /// Normalized bottom fraction; absent when `alpha = 0`.
    pub p_alpha_tilde: Option<Distribution>,
    pub opt_solution: SolutionId,
    /// Prior mass left after removal, totalling `1 - alpha`.
    pub residual: BTreeMap<SolutionId, f64>,
}

/// Removes `alpha` mass from the lowest-valued prior solutions (ties by
/// ascending id) and places it on the global argmax.
pub fn build_p_opt(prior: &Distribution, value: &TabularValue, alpha: f64) -> Result<OptDecomposition> {
    check_unit("alpha", alpha)?;
    if prior.is_empty() {
        return Err(Error::param("prior is empty"));
    }
    if value.len() > MAX_ORACLE_SOLUTIONS {
        return Err(Error::Scale { what: "oracle mode", size: value.len(), limit: MAX_ORACLE_SOLUTIONS });
    }
    let mut order: Vec<(SolutionId, f64)> = prior.iter().map(|(s, p)| (*s, p)).collect();
    order.sort_by(|a, b| value.value(&a.0).total_cmp(&value.value(&b.0)).then(a.0.cmp(&b.0)));

    let mut residual = BTreeMap::new();
    let mut removed = BTreeMap::new();
    let mut to_remove = alpha;
    for (s, p) in order {
        let take = p.min(to_remove);
        to_remove -= take;
        if take > 0.0 {
            removed.insert(s, take);
        }
        if p - take > 0.0 {
            residual.insert(s, p - take);
        }
    }

    let opt = value.argmax();
    let mut p_opt = residual.clone();
    if alpha > 0.0 {
        *p_opt.entry(opt).or_insert(0.0) += alpha;
    }
    let p_alpha = (alpha < 1.0 && !residual.is_empty())
        .then(|| Distribution::from_weights(residual.iter().map(|(s, p)| (*s, *p))))
        .transpose()?;
    let p_alpha_tilde = (alpha > 0.0 && !removed.is_empty())
        .then(|| Distribution::from_weights(removed.iter().map(|(s, p)| (*s, *p))))
        .transpose()?;

    Ok(OptDecomposition {
        alpha,
        p_opt: Distribution::from_map_unchecked(p_opt),
        p_alpha,
        p_alpha_tilde,
        opt_solution: opt,
        residual,
    })
}

/// `alpha * V(Opt) + (1 - alpha) * V(p_alpha)`.
pub fn v_p_opt(decomp: &OptDecomposition, value: &TabularValue) -> f64 {
    let top = decomp.p_alpha.as_ref().map(|p| expected_value(p, value)).unwrap_or(0.0);
    decomp.alpha * value.value(&decomp.opt_solution) + (1.0 - decomp.alpha) * top
}

/// Simple-Mix welfare factor `min(lambda, alpha * lambda + (1 - alpha)^2)`.
pub fn smix_lower_bound(lambda: f64, alpha: f64) -> f64 {
    lambda.min(alpha * lambda + (1.0 - alpha) * (1.0 - alpha))
}

/// Which algorithm an estimate or check refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlgorithmKind {
    SimpleMix,
    EpsilonMix,
}

impl AlgorithmKind {
    pub fn with_epsilon(self, epsilon: Option<f64>) -> Result<Algorithm> {
        match (self, epsilon) {
            (AlgorithmKind::SimpleMix, _) => Ok(Algorithm::SimpleMix),
            (AlgorithmKind::EpsilonMix, Some(epsilon)) => Ok(Algorithm::EpsilonMix { epsilon, samples: None }),
            (AlgorithmKind::EpsilonMix, None) => Err(Error::param("epsilon-Mix requires epsilon")),
        }
    }
}

/// Observed output frequencies of repeated runs.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalLaw<S> {
    pub counts: BTreeMap<S, u64>,
    pub n_runs: u64,
}

impl<S: Solution> EmpiricalLaw<S> {
    pub fn to_distribution(&self) -> Distribution<S> {
        Distribution::from_counts(self.counts.iter().map(|(s, c)| (s.clone(), *c)))
            .expect("at least one run")
    }

    pub fn mean<V: ValueFunction<S> + ?Sized>(&self, value: &V) -> f64 {
        let n = self.n_runs as f64;
        self.counts.iter().map(|(s, c)| *c as f64 * value.value(s)).sum::<f64>() / n
    }

    /// Standard error of [`Self::mean`].
    pub fn std_error<V: ValueFunction<S> + ?Sized>(&self, value: &V) -> f64 {
        let n = self.n_runs as f64;
        let mean = self.mean(value);
        let var = self
            .counts
            .iter()
            .map(|(s, c)| *c as f64 * (value.value(s) - mean).powi(2))
            .sum::<f64>()
            / n;
        (var / n).sqrt()
    }
}

/// Runs `algorithm` `n_runs` times on independent substreams split from
/// `rng` and tallies the outputs.
pub fn run_repeated<S: Solution>(
    algorithm: Algorithm,
    instance: &FwiInstance<S>,
    n_runs: u64,
    rng: &mut dyn RngCore,
) -> Result<EmpiricalLaw<S>> {
    if n_runs == 0 {
        return Err(Error::param("n_runs must be positive"));
    }
    let base = rng.random::<u64>();
    let chunks = n_runs.div_ceil(RUNS_PER_CHUNK);
    let partial: Vec<BTreeMap<S, u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed::stream(base, &[c]);
            let runs = RUNS_PER_CHUNK.min(n_runs - c * RUNS_PER_CHUNK);
            let mut counts = BTreeMap::new();
            for _ in 0..runs {
                *counts.entry(algorithm.run(instance, &mut rng)?).or_insert(0) += 1;
            }
            Ok(counts)
        })
        .collect::<Result<_>>()?;
    let mut counts = BTreeMap::new();
    for part in partial {
        for (s, c) in part {
            *counts.entry(s).or_insert(0) += c;
        }
    }
    Ok(EmpiricalLaw { counts, n_runs })
}

/// Empirical output law of `n_runs` invocations.
pub fn estimate_output_law<S: Solution>(
    kind: AlgorithmKind,
    instance: &FwiInstance<S>,
    epsilon: Option<f64>,
    n_runs: u64,
    rng: &mut dyn RngCore,
) -> Result<Distribution<S>> {
    let algorithm = kind.with_epsilon(epsilon)?;
    Ok(run_repeated(algorithm, instance, n_runs, rng)?.to_distribution())
}

/// Outcome of [`check_guarantees`].
#[derive(Clone, Debug, PartialEq)]
pub struct GuaranteeReport {
    pub algorithm: AlgorithmKind,
    pub alpha: f64,
    pub lambda: f64,
    pub epsilon: Option<f64>,
    /// Explicit epsilon-Mix sample count, when overridden.
    pub samples: Option<usize>,
    pub n_runs: u64,
    pub tv_emp: f64,
    pub tv_slack: f64,
    pub welfare_emp: f64,
    pub welfare_slack: f64,
    pub v_p_opt: f64,
    /// Welfare factor the algorithm promises relative to `v_p_opt`.
    pub bound: f64,
    /// Exact Simple-Mix welfare; absent for epsilon-Mix.
    pub welfare_exact: Option<f64>,
    pub fairness_ok: bool,
    pub welfare_ok: bool,
    /// Whether the first attempt failed and the check was re-run with four
    /// times as many runs.
    pub retried: bool,
}

impl GuaranteeReport {
    pub fn passed(&self) -> bool {
        self.fairness_ok && self.welfare_ok
    }

    pub fn welfare_ratio(&self) -> f64 {
        if self.v_p_opt > 0.0 {
            self.welfare_emp / self.v_p_opt
        } else {
            1.0
        }
    }

    /// Flat `key=value` record, one pair per line.
    pub fn to_record(&self) -> String {
        let flag = |b: bool| if b { 1 } else { 0 };
        let mut out = String::new();
        let algorithm = match self.algorithm {
            AlgorithmKind::SimpleMix => 0,
            AlgorithmKind::EpsilonMix => 1,
        };
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        put("algorithm_epsilon_mix", algorithm.to_string());
        put("alpha", fmt(self.alpha));
        put("lambda", fmt(self.lambda));
        if let Some(eps) = self.epsilon {
            put("epsilon", fmt(eps));
        }
        if let Some(n) = self.samples {
            put("samples", n.to_string());
        }
        put("n_runs", self.n_runs.to_string());
        put("tv_emp", fmt(self.tv_emp));
        put("tv_slack", fmt(self.tv_slack));
        put("welfare_emp", fmt(self.welfare_emp));
        put("welfare_slack", fmt(self.welfare_slack));
        if let Some(w) = self.welfare_exact {
            put("welfare_exact", fmt(w));
        }
        put("v_p_opt", fmt(self.v_p_opt));
        put("bound", fmt(self.bound));
        put("welfare_ratio", fmt(self.welfare_ratio()));
        if let Some(w) = self.welfare_exact {
            let ratio = if self.v_p_opt > 0.0 { w / self.v_p_opt } else { 1.0 };
            put("welfare_ratio_exact", fmt(ratio));
        }
        put("fairness_ok", flag(self.fairness_ok).to_string());
        put("welfare_ok", flag(self.welfare_ok).to_string());
        put("retried", flag(self.retried).to_string());
        out
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.12}")
}

/// Estimates the output law and compares it against the fairness budget and
/// the welfare guarantee (`lambda * (1 - epsilon)` for epsilon-Mix,
/// [`smix_lower_bound`] for Simple-Mix). Slack is three standard errors; a
/// failing check is repeated once with four times the runs.
pub fn check_guarantees(
    instance: &OracleInstance,
    epsilon: Option<f64>,
    n_runs: u64,
    rng: &mut dyn RngCore,
) -> Result<GuaranteeReport> {
    let kind = if epsilon.is_some() { AlgorithmKind::EpsilonMix } else { AlgorithmKind::SimpleMix };
    check_algorithm(instance, kind.with_epsilon(epsilon)?, n_runs, rng)
}

/// [`check_guarantees`] for a fully specified algorithm, including an
/// epsilon-Mix sample count that may be too small for the bound to hold.
pub fn check_algorithm(
    instance: &OracleInstance,
    algorithm: Algorithm,
    n_runs: u64,
    rng: &mut dyn RngCore,
) -> Result<GuaranteeReport> {
    let first = guarantee_attempt(instance, algorithm, n_runs, rng)?;
    if first.passed() {
        return Ok(first);
    }
    let mut second = guarantee_attempt(instance, algorithm, n_runs.saturating_mul(4), rng)?;
    second.retried = true;
    Ok(second)
}

fn guarantee_attempt(
    instance: &OracleInstance,
    algorithm: Algorithm,
    n_runs: u64,
    rng: &mut dyn RngCore,
) -> Result<GuaranteeReport> {
    let (kind, epsilon, samples) = match algorithm {
        Algorithm::SimpleMix => (AlgorithmKind::SimpleMix, None, None),
        Algorithm::EpsilonMix { epsilon, samples } => (AlgorithmKind::EpsilonMix, Some(epsilon), samples),
    };
    let fwi = instance.to_fwi();
    let law = run_repeated(algorithm, &fwi, n_runs, rng)?;
    let empirical = law.to_distribution();

    let alpha = instance.alpha;
    let lambda = instance.lambda;
    let decomp = instance.decomposition()?;
    let v_opt = v_p_opt(&decomp, &instance.values);
    let bound = match epsilon {
        Some(eps) => lambda * (1.0 - eps),
        None => smix_lower_bound(lambda, alpha),
    };

    let mut support: Vec<SolutionId> = instance.prior.support().copied().collect();
    support.push(instance.mechanism_output);
    support.sort();
    support.dedup();
    let n = n_runs as f64;
    let tv_emp = tv_distance(&empirical, &instance.prior);
    let tv_slack = 3.0 * (support.len() as f64 / n).sqrt();
    let welfare_emp = law.mean(&instance.values);
    let welfare_slack = 3.0 * law.std_error(&instance.values);

    let welfare_exact = match epsilon {
        None => Some(expected_value(
            &simple_mix_distribution(&instance.prior, &instance.mechanism_output, alpha)?,
            &instance.values,
        )),
        Some(_) => None,
    };

    Ok(GuaranteeReport {
        algorithm: kind,
        alpha,
        lambda,
        epsilon,
        samples,
        n_runs,
        tv_emp,
        tv_slack,
        welfare_emp,
        welfare_slack,
        v_p_opt: v_opt,
        bound,
        welfare_exact,
        fairness_ok: tv_emp <= alpha + tv_slack + TOLERANCE,
        welfare_ok: welfare_emp >= bound * v_opt - welfare_slack - TOLERANCE,
        retried: false,
    })
}

/// Checks `p^s_i >= (1 - alpha) * p^f_i` for every solution and, given a
/// utility table, `u_a(p^s) >= (1 - alpha) * u_a(p^f)` for every agent.
pub fn check_individual_fairness(
    prior: &Distribution,
    a: SolutionId,
    alpha: f64,
    utilities: Option<&UtilityTable>,
) -> Result<bool> {
    let ps = simple_mix_distribution(prior, &a, alpha)?;
    let per_solution = prior.iter().all(|(s, p)| ps.prob(s) >= (1.0 - alpha) * p);
    let per_agent = match utilities {
        None => true,
        Some(table) => (0..table.n_agents()).all(|agent| {
            let fair = table.expected(agent, prior);
            let mixed = table.expected(agent, &ps);
            // Summation order differs between the two sides.
            mixed >= (1.0 - alpha) * fair - 1e-12 * fair.max(1.0)
        }),
    };
    Ok(per_solution && per_agent)
}

/// Ready-made oracle instances.
pub mod presets {
    use super::*;

    /// Two solutions valued 1 and 0 with prior mass `1 - alpha` on the good
    /// one and an exact mechanism; Simple-Mix attains exactly
    /// `alpha + (1 - alpha)^2` of the optimum here.
    pub fn tightness(alpha: f64) -> Result<OracleInstance> {
        check_unit("alpha", alpha)?;
        let values = TabularValue::new(vec![1.0, 0.0])?;
        let prior = Distribution::from_weights([(SolutionId(0), 1.0 - alpha), (SolutionId(1), alpha)])?;
        OracleInstance::new(values, prior, SolutionId(0), 1.0, alpha)
    }

    /// Every prior solution is worth 0 and the mechanism returns a solution
    /// worth exactly `lambda * V(Opt)`.
    pub fn zero_prior(lambda: f64, alpha: f64) -> Result<OracleInstance> {
        let values = TabularValue::new(vec![0.0, 0.0, 0.0, 1.0, lambda])?;
        let prior = Distribution::uniform([SolutionId(0), SolutionId(1), SolutionId(2)])?;
        OracleInstance::new(values, prior, SolutionId(4), lambda, alpha)
    }

    /// `n` solutions with uniform random values in `[0, 1)`, a random prior
    /// on a random non-empty subset and an exact mechanism.
    pub fn random(n: usize, alpha: f64, rng: &mut dyn RngCore) -> Result<OracleInstance> {
        if n == 0 {
            return Err(Error::param("need at least one solution"));
        }
        let values = TabularValue::new((0..n).map(|_| rng.random::<f64>()).collect())?;
        let mut weights = Vec::new();
        for i in 0..n {
            if rng.random_bool(0.7) {
                weights.push((SolutionId(i), rng.random::<f64>() + 1e-3));
            }
        }
        if weights.is_empty() {
            weights.push((SolutionId(rng.random_range(0..n)), 1.0));
        }
        let prior = Distribution::from_weights(weights)?;
        let opt = values.argmax();
        OracleInstance::new(values, prior, opt, 1.0, alpha)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ids(entries: &[(usize, f64)]) -> Distribution {
        Distribution::new(entries.iter().map(|&(i, p)| (SolutionId(i), p))).unwrap()
    }

    #[test]
    fn p_opt_alpha_zero_is_prior() {
        let prior = ids(&[(0, 0.2), (1, 0.3), (2, 0.5)]);
        let v = TabularValue::new(vec![3.0, 1.0, 0.0]).unwrap();
        let d = build_p_opt(&prior, &v, 0.0).unwrap();
        assert_eq!(d.p_opt, prior);
        assert!(d.p_alpha_tilde.is_none());
        assert!((v_p_opt(&d, &v) - expected_value(&prior, &v)).abs() < 1e-12);
    }

    #[test]
    fn p_opt_tightness_example() {
        let prior = ids(&[(0, 0.5), (1, 0.5)]);
        let v = TabularValue::new(vec![1.0, 0.0]).unwrap();
        let d = build_p_opt(&prior, &v, 0.5).unwrap();
        assert_eq!(d.p_opt, Distribution::point_mass(SolutionId(0)));
        assert_eq!(v_p_opt(&d, &v), 1.0);
    }

    #[test]
    fn p_opt_three_solutions() {
        let prior = ids(&[(0, 0.2), (1, 0.3), (2, 0.5)]);
        let v = TabularValue::new(vec![3.0, 1.0, 0.0]).unwrap();
        let d = build_p_opt(&prior, &v, 0.4).unwrap();
        assert!((d.p_opt.prob(&SolutionId(0)) - 0.6).abs() < 1e-12);
        assert!((d.p_opt.prob(&SolutionId(1)) - 0.3).abs() < 1e-12);
        assert!((d.p_opt.prob(&SolutionId(2)) - 0.1).abs() < 1e-12);
        assert!((v_p_opt(&d, &v) - 2.1).abs() < 1e-12);
        assert!((expected_value(&d.p_opt, &v) - 2.1).abs() < 1e-12);
        assert!(tv_distance(&d.p_opt, &prior) <= 0.4 + 1e-12);
    }

    #[test]
    fn decomposition_identity() {
        let prior = ids(&[(0, 0.1), (1, 0.2), (2, 0.3), (3, 0.4)]);
        let v = TabularValue::new(vec![0.5, 0.5, 2.0, 0.1]).unwrap();
        for alpha in [0.05, 0.35, 0.5, 0.95] {
            let d = build_p_opt(&prior, &v, alpha).unwrap();
            let top = d.p_alpha.as_ref().unwrap();
            let bottom = d.p_alpha_tilde.as_ref().unwrap();
            for (s, p) in prior.iter() {
                let recomposed = (1.0 - alpha) * top.prob(s) + alpha * bottom.prob(s);
                assert!((recomposed - p).abs() < 1e-9);
            }
            assert!((d.residual.values().sum::<f64>() - (1.0 - alpha)).abs() < 1e-9);
        }
    }

    #[test]
    fn opt_inside_removal_region() {
        // The argmax carries little prior mass but the budget covers the
        // whole support, so mass is removed from Opt and re-added.
        let prior = ids(&[(0, 0.1), (1, 0.9)]);
        let v = TabularValue::new(vec![1.0, 0.5]).unwrap();
        let d = build_p_opt(&prior, &v, 1.0).unwrap();
        assert_eq!(d.p_opt, Distribution::point_mass(SolutionId(0)));
        assert!(d.p_alpha.is_none());
        assert_eq!(v_p_opt(&d, &v), 1.0);
        let d = build_p_opt(&prior, &v, 0.95).unwrap();
        assert!((v_p_opt(&d, &v) - expected_value(&d.p_opt, &v)).abs() < 1e-12);
    }

    #[test]
    fn p_opt_rejects_empty_or_bad_alpha() {
        let v = TabularValue::new(vec![1.0]).unwrap();
        assert!(build_p_opt(&ids(&[(0, 1.0)]), &v, 1.5).is_err());
    }

    #[test]
    fn smix_bound_examples() {
        assert_eq!(smix_lower_bound(1.0, 0.5), 0.75);
        assert_eq!(smix_lower_bound(1.0, 0.0), 1.0);
        assert_eq!(smix_lower_bound(0.5, 0.3), 0.5);
    }

    #[test]
    fn estimate_requires_epsilon_for_emix() {
        let inst = presets::tightness(0.5).unwrap().to_fwi();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(estimate_output_law(AlgorithmKind::EpsilonMix, &inst, None, 10, &mut rng).is_err());
        assert!(estimate_output_law(AlgorithmKind::SimpleMix, &inst, None, 0, &mut rng).is_err());
    }

    #[test]
    fn estimate_point_mass_at_alpha_one() {
        let inst = presets::zero_prior(0.5, 1.0).unwrap().to_fwi();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let law = estimate_output_law(AlgorithmKind::SimpleMix, &inst, None, 1000, &mut rng).unwrap();
        assert_eq!(law, Distribution::point_mass(SolutionId(4)));
    }

    #[test]
    fn estimate_simple_mix_and_emix_at_zero() {
        let oracle =
            OracleInstance::new(TabularValue::new(vec![1.0, 0.3]).unwrap(), ids(&[(0, 0.2), (1, 0.8)]), SolutionId(0), 1.0, 0.5)
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let law = estimate_output_law(AlgorithmKind::SimpleMix, &oracle.to_fwi(), None, n, &mut rng).unwrap();
        let se = (0.24 / n as f64).sqrt();
        assert!((law.prob(&SolutionId(0)) - 0.6).abs() < 3.0 * se);

        let zero = oracle.with_alpha(0.0).unwrap().to_fwi();
        let law = estimate_output_law(AlgorithmKind::EpsilonMix, &zero, Some(0.2), n, &mut rng).unwrap();
        let se = (0.16 / n as f64).sqrt();
        assert!((law.prob(&SolutionId(0)) - 0.2).abs() < 3.0 * se);
    }

    #[test]
    fn estimate_is_deterministic_per_seed() {
        let inst = presets::random(6, 0.3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap().to_fwi();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            estimate_output_law(AlgorithmKind::EpsilonMix, &inst, Some(0.3), 20_000, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn guarantees_on_tightness_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for alpha in [0.25, 0.5, 0.75] {
            let report = check_guarantees(&presets::tightness(alpha).unwrap(), None, 50_000, &mut rng).unwrap();
            assert!(report.passed(), "{report:?}");
            let expected = alpha + (1.0 - alpha).powi(2);
            assert!((report.welfare_exact.unwrap() - expected).abs() < 1e-12);
            assert!((report.welfare_ratio() - expected).abs() < report.welfare_slack + 1e-9);
        }
    }

    #[test]
    fn guarantees_on_zero_prior() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = presets::zero_prior(0.4, 0.3).unwrap();
        let report = check_guarantees(&inst, None, 50_000, &mut rng).unwrap();
        assert!(report.passed());
        assert!((report.welfare_exact.unwrap() - 0.4 * report.v_p_opt).abs() < 1e-12);
    }

    #[test]
    fn guarantees_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let alpha = rng.random_range(0.05..0.95);
            let inst = presets::random(6, alpha, &mut rng).unwrap();
            let s = check_guarantees(&inst, None, 20_000, &mut rng).unwrap();
            let e = check_guarantees(&inst, Some(0.3), 20_000, &mut rng).unwrap();
            assert!(s.passed(), "{s:?}");
            assert!(e.passed(), "{e:?}");
        }
    }

    #[test]
    fn report_record_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r = check_guarantees(&presets::tightness(0.5).unwrap(), None, 1000, &mut rng).unwrap();
        let rec = r.to_record();
        for line in rec.lines() {
            let (k, v) = line.split_once('=').unwrap();
            assert!(!k.is_empty());
            assert!(v.parse::<f64>().is_ok(), "{line}");
        }
        assert!(rec.contains("welfare_ratio_exact=0.750000000000"));
    }

    #[test]
    fn individual_fairness_examples() {
        let prior = ids(&[(0, 0.2), (1, 0.8)]);
        assert!(check_individual_fairness(&prior, SolutionId(0), 0.0, None).unwrap());
        assert!(check_individual_fairness(&prior, SolutionId(0), 1.0, None).unwrap());
        let table = UtilityTable::new(vec![vec![2.0, 1.0]]).unwrap();
        assert!(check_individual_fairness(&prior, SolutionId(0), 0.5, Some(&table)).unwrap());
        let ps = simple_mix_distribution(&prior, &SolutionId(0), 0.5).unwrap();
        assert!((table.expected(0, &ps) - 1.6).abs() < 1e-12);
        assert!((table.expected(0, &prior) - 1.2).abs() < 1e-12);
    }

    #[test]
    fn oracle_instance_validation() {
        let v = TabularValue::new(vec![1.0, 0.2]).unwrap();
        let prior = ids(&[(0, 0.5), (1, 0.5)]);
        assert!(OracleInstance::new(v.clone(), prior.clone(), SolutionId(1), 0.5, 0.5).is_err());
        assert!(OracleInstance::new(v.clone(), prior.clone(), SolutionId(1), 0.2, 0.5).is_ok());
        assert!(OracleInstance::new(v.clone(), ids(&[(5, 1.0)]), SolutionId(0), 1.0, 0.5).is_err());
        assert!(OracleInstance::new(v, prior, SolutionId(0), 1.0, 2.0).is_err());
        let big = TabularValue::new(vec![1.0; MAX_ORACLE_SOLUTIONS + 1]).unwrap();
        assert!(matches!(
            OracleInstance::new(big, ids(&[(0, 1.0)]), SolutionId(0), 1.0, 0.5),
            Err(Error::Scale { .. })
        ));
    }
}
