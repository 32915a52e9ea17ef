//! Value functions, samplers, welfare mechanisms and the instance contract
//! tying them together.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::hash::Hash;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Binomial, Distribution as _};

use crate::distribution::{Distribution, SolutionId};
use crate::error::{check_unit, Error, Result};

/// Anything that can serve as a point of a solution space.
pub trait Solution: Clone + Ord + Hash + Debug + Send + Sync + 'static {}

impl<T: Clone + Ord + Hash + Debug + Send + Sync + 'static> Solution for T {}

/// Non-negative welfare of a solution.
pub trait ValueFunction<S>: Send + Sync {
    fn value(&self, solution: &S) -> f64;
}

impl<S, F> ValueFunction<S> for F
where
    F: Fn(&S) -> f64 + Send + Sync,
{
    fn value(&self, solution: &S) -> f64 {
        self(solution)
    }
}

/// Sampling access to an ex-ante fair mechanism.
pub trait FairPrior<S>: Send + Sync {
    /// Draws one solution. Successive calls are independent given
    /// independent randomness.
    fn sample(&self, rng: &mut dyn RngCore) -> Result<S>;

    /// Draws `n` i.i.d. solutions as `(solution, multiplicity)` runs whose
    /// multiplicities sum to `n`. Runs need not be merged.
    fn sample_tally(&self, n: usize, rng: &mut dyn RngCore) -> Result<Vec<(S, usize)>> {
        (0..n).map(|_| self.sample(rng).map(|s| (s, 1))).collect()
    }

    /// The prior's law, when it is known explicitly (oracle instances).
    fn explicit(&self) -> Option<&Distribution<S>> {
        None
    }
}

/// A welfare-maximizing mechanism returning a `lambda`-approximate solution.
pub trait WelfareMechanism<S>: Send + Sync {
    fn run(&self, rng: &mut dyn RngCore) -> Result<S>;

    /// Claimed approximation factor in `(0, 1]`.
    fn lambda(&self) -> f64;
}

/// The quadruplet (value, fair prior, welfare mechanism, alpha).
pub struct FwiInstance<S> {
    value: Arc<dyn ValueFunction<S>>,
    prior: Arc<dyn FairPrior<S>>,
    mechanism: Arc<dyn WelfareMechanism<S>>,
    alpha: f64,
}

impl<S> Clone for FwiInstance<S> {
    fn clone(&self) -> Self {
        FwiInstance {
            value: Arc::clone(&self.value),
            prior: Arc::clone(&self.prior),
            mechanism: Arc::clone(&self.mechanism),
            alpha: self.alpha,
        }
    }
}

impl<S> FwiInstance<S> {
    pub fn new(
        value: Arc<dyn ValueFunction<S>>,
        prior: Arc<dyn FairPrior<S>>,
        mechanism: Arc<dyn WelfareMechanism<S>>,
        alpha: f64,
    ) -> Result<Self> {
        check_unit("alpha", alpha)?;
        let lambda = mechanism.lambda();
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::param(format!("lambda must lie in (0, 1], got {lambda}")));
        }
        Ok(FwiInstance { value, prior, mechanism, alpha })
    }

    /// Same components with a different fairness budget.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_unit("alpha", alpha)?;
        Ok(FwiInstance { alpha, ..self.clone() })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.mechanism.lambda()
    }

    pub fn value(&self) -> &dyn ValueFunction<S> {
        &*self.value
    }

    pub fn prior(&self) -> &dyn FairPrior<S> {
        &*self.prior
    }

    pub fn mechanism(&self) -> &dyn WelfareMechanism<S> {
        &*self.mechanism
    }
}

/// A value function over `SolutionId(0..n)` stored as a dense table.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularValue {
    values: Vec<f64>,
}

impl TabularValue {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("value table is empty"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::param(format!("values must be finite and non-negative, got {v}")));
        }
        Ok(TabularValue { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn solutions(&self) -> impl Iterator<Item = SolutionId> {
        (0..self.values.len()).map(SolutionId)
    }

    /// Highest-valued solution; ties go to the smallest id.
    pub fn argmax(&self) -> SolutionId {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        SolutionId(best)
    }

    pub fn max_value(&self) -> f64 {
        self.values[self.argmax().0]
    }
}

impl ValueFunction<SolutionId> for TabularValue {
    fn value(&self, solution: &SolutionId) -> f64 {
        self.values.get(solution.0).copied().unwrap_or(0.0)
    }
}

/// A fair prior whose law is known explicitly.
#[derive(Clone, Debug)]
pub struct ExplicitPrior<S = SolutionId> {
    law: Distribution<S>,
    solutions: Vec<S>,
    cumulative: Vec<f64>,
}

impl<S: Solution> ExplicitPrior<S> {
    pub fn new(law: Distribution<S>) -> Self {
        let mut solutions = Vec::with_capacity(law.len());
        let mut cumulative = Vec::with_capacity(law.len());
        let mut acc = 0.0;
        for (s, p) in law.iter() {
            acc += p;
            solutions.push(s.clone());
            cumulative.push(acc);
        }
        ExplicitPrior { law, solutions, cumulative }
    }

    pub fn law(&self) -> &Distribution<S> {
        &self.law
    }
}

impl<S: Solution> FairPrior<S> for ExplicitPrior<S> {
    fn sample(&self, rng: &mut dyn RngCore) -> Result<S> {
        let total = *self.cumulative.last().expect("distributions are never empty");
        let u = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|c| *c <= u);
        Ok(self.solutions[idx.min(self.solutions.len() - 1)].clone())
    }

    /// Multinomial counts via sequential conditional binomials: the same law
    /// as `n` independent draws, in time linear in the support size.
    fn sample_tally(&self, n: usize, rng: &mut dyn RngCore) -> Result<Vec<(S, usize)>> {
        let mut tally = Vec::with_capacity(self.solutions.len());
        let mut remaining = n as u64;
        let mut mass_left = 1.0;
        let last = self.solutions.len() - 1;
        for (i, (s, p)) in self.law.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            let count = if i == last || p >= mass_left {
                remaining
            } else {
                let q = (p / mass_left).clamp(0.0, 1.0);
                Binomial::new(remaining, q)
                    .map_err(|e| Error::Prior(e.to_string()))?
                    .sample(rng)
            };
            if count > 0 {
                tally.push((s.clone(), count as usize));
            }
            remaining -= count;
            mass_left -= p;
        }
        Ok(tally)
    }

    fn explicit(&self) -> Option<&Distribution<S>> {
        Some(&self.law)
    }
}

/// A mechanism that always returns the same precomputed solution.
#[derive(Clone, Debug)]
pub struct FixedMechanism<S> {
    solution: S,
    lambda: f64,
}

impl<S: Solution> FixedMechanism<S> {
    pub fn new(solution: S, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::param(format!("lambda must lie in (0, 1], got {lambda}")));
        }
        Ok(FixedMechanism { solution, lambda })
    }

    pub fn solution(&self) -> &S {
        &self.solution
    }
}

impl<S: Solution> WelfareMechanism<S> for FixedMechanism<S> {
    fn run(&self, _rng: &mut dyn RngCore) -> Result<S> {
        Ok(self.solution.clone())
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Per-agent utilities over an enumerable solution space, one dense row per
/// agent.
#[derive(Clone, Debug, PartialEq)]
pub struct UtilityTable {
    rows: Vec<Vec<f64>>,
}

impl UtilityTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || width == 0 {
            return Err(Error::param("utility table is empty"));
        }
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::param("utility rows have different lengths"));
        }
        if rows.iter().flatten().any(|u| !u.is_finite() || *u < 0.0) {
            return Err(Error::param("utilities must be finite and non-negative"));
        }
        Ok(UtilityTable { rows })
    }

    pub fn n_agents(&self) -> usize {
        self.rows.len()
    }

    pub fn utility(&self, agent: usize, solution: SolutionId) -> f64 {
        self.rows[agent].get(solution.0).copied().unwrap_or(0.0)
    }

    /// Expected utility `u_a(p)` of `agent` under `dist`.
    pub fn expected(&self, agent: usize, dist: &Distribution<SolutionId>) -> f64 {
        dist.iter().map(|(s, p)| p * self.utility(agent, *s)).sum()
    }
}

/// Counts per solution, merged; used by tests and tally consumers.
pub fn merge_tally<S: Ord>(tally: impl IntoIterator<Item = (S, usize)>) -> BTreeMap<S, usize> {
    let mut merged = BTreeMap::new();
    for (s, c) in tally {
        *merged.entry(s).or_insert(0) += c;
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn prior() -> ExplicitPrior {
        ExplicitPrior::new(
            Distribution::new([(SolutionId(0), 0.1), (SolutionId(1), 0.6), (SolutionId(4), 0.3)]).unwrap(),
        )
    }

    #[test]
    fn explicit_sampler_matches_law() {
        let prior = prior();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let counts = merge_tally((0..n).map(|_| (prior.sample(&mut rng).unwrap(), 1)));
        for (s, p) in prior.law().iter() {
            let freq = counts.get(s).copied().unwrap_or(0) as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 4.0 * se, "{s}: {freq} vs {p}");
        }
    }

    #[test]
    fn tally_sums_to_n_and_matches_law() {
        let prior = prior();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut totals = BTreeMap::new();
        let rounds = 2_000;
        for _ in 0..rounds {
            let tally = prior.sample_tally(100, &mut rng).unwrap();
            assert_eq!(tally.iter().map(|t| t.1).sum::<usize>(), 100);
            for (s, c) in tally {
                *totals.entry(s).or_insert(0usize) += c;
            }
        }
        let n = (rounds * 100) as f64;
        for (s, p) in prior.law().iter() {
            let freq = totals[s] as f64 / n;
            assert!((freq - p).abs() < 4.0 * (p * (1.0 - p) / n).sqrt());
        }
        assert!(prior.sample_tally(0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn tabular_argmax_breaks_ties_low() {
        let v = TabularValue::new(vec![1.0, 3.0, 3.0, 2.0]).unwrap();
        assert_eq!(v.argmax(), SolutionId(1));
        assert!(TabularValue::new(vec![1.0, -1.0]).is_err());
        assert!(TabularValue::new(vec![]).is_err());
    }

    #[test]
    fn instance_validates_parameters() {
        let v: Arc<dyn ValueFunction<SolutionId>> = Arc::new(TabularValue::new(vec![1.0]).unwrap());
        let p: Arc<dyn FairPrior<SolutionId>> = Arc::new(prior());
        let m: Arc<dyn WelfareMechanism<SolutionId>> =
            Arc::new(FixedMechanism::new(SolutionId(0), 1.0).unwrap());
        assert!(FwiInstance::new(v.clone(), p.clone(), m.clone(), 1.2).is_err());
        let inst = FwiInstance::new(v, p, m, 0.3).unwrap();
        assert_eq!(inst.with_alpha(0.7).unwrap().alpha(), 0.7);
        assert!(FixedMechanism::new(SolutionId(0), 0.0).is_err());
    }
}
