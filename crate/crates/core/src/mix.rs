//! epsilon-Mix and Simple-Mix.
//!
//! Both algorithms flip an `alpha`-biased coin and return the welfare
//! mechanism's solution on heads. On tails, Simple-Mix returns a single draw
//! from the fair prior, while epsilon-Mix draws `s` prior samples, sorts them
//! by value, removes `alpha * s` units of mass from the low-value end and
//! returns a sample with probability proportional to the remaining weight.

use rand::{Rng, RngCore};

use crate::distribution::Distribution;
use crate::error::{check_unit, Error, Result};
use crate::instance::{FwiInstance, Solution, ValueFunction};

/// Number of prior samples epsilon-Mix draws:
/// `ceil(8 / ((1 - alpha) * epsilon^2) * ln(2 / epsilon))`.
pub fn sample_size(alpha: f64, epsilon: f64) -> Result<usize> {
    check_epsilon(epsilon)?;
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::param(format!("alpha must lie in [0, 1) for sampling, got {alpha}")));
    }
    let s = 8.0 / ((1.0 - alpha) * epsilon * epsilon) * (2.0 / epsilon).ln();
    Ok(s.ceil() as usize)
}

/// Sample count in the two-step rounded form `ceil(ceil(8 / epsilon^2 *
/// ln(2 / epsilon)) / (1 - alpha))`, which is never smaller than
/// [`sample_size`] and matches the published experiment settings.
pub fn tabulated_sample_size(alpha: f64, epsilon: f64) -> Result<usize> {
    let base = sample_size(0.0, epsilon)?;
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::param(format!("alpha must lie in [0, 1) for sampling, got {alpha}")));
    }
    Ok((base as f64 / (1.0 - alpha)).ceil() as usize)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("epsilon must lie in (0, 1), got {epsilon}")))
    }
}

/// Per-sample weights after trimming: a prefix of ones, at most one
/// fractional entry, then zeros.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightVector {
    len: usize,
    ones: usize,
    fractional: Option<f64>,
}

impl WeightVector {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Number of leading entries equal to one.
    pub fn ones(&self) -> usize {
        self.ones
    }

    /// The partially trimmed entry, located at index [`Self::ones`].
    pub fn fractional(&self) -> Option<f64> {
        self.fractional
    }

    pub fn get(&self, index: usize) -> f64 {
        if index < self.ones {
            1.0
        } else if index == self.ones {
            self.fractional.unwrap_or(0.0)
        } else {
            0.0
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.iter().collect()
    }

    pub fn total(&self) -> f64 {
        self.ones as f64 + self.fractional.unwrap_or(0.0)
    }

    /// Inverts the cumulative weights at `u` in `[0, total)`.
    pub fn select(&self, u: f64) -> usize {
        let last_positive = if self.fractional.is_some() { self.ones } else { self.ones.saturating_sub(1) };
        let idx = if u <= 0.0 { 0 } else { u.floor() as usize };
        idx.min(last_positive)
    }
}

/// Starts from `s` unit weights and removes `alpha * s` mass beginning at the
/// last entry and moving toward the first.
pub fn trim_weights(s: usize, alpha: f64) -> WeightVector {
    let alpha = alpha.clamp(0.0, 1.0);
    let mut removed = alpha * s as f64;
    // Snap products like 0.3 * 10 that land a rounding error off an integer.
    let nearest = removed.round();
    if (removed - nearest).abs() <= 1e-9 * (s.max(1) as f64) {
        removed = nearest;
    }
    let zeroed = (removed.floor() as usize).min(s);
    let partial = removed - zeroed as f64;
    if partial > 0.0 && zeroed < s {
        WeightVector { len: s, ones: s - zeroed - 1, fractional: Some(1.0 - partial) }
    } else {
        WeightVector { len: s, ones: s - zeroed, fractional: None }
    }
}

/// Prior samples sorted by value, highest first, stored as runs of equal
/// solutions. Ties in value are ordered by solution ascending.
#[derive(Clone, Debug)]
pub struct SortedSampleVector<S> {
    runs: Vec<(S, f64, usize)>,
    len: usize,
}

impl<S: Solution> SortedSampleVector<S> {
    pub fn from_tally<V>(tally: Vec<(S, usize)>, value: &V) -> Self
    where
        V: ValueFunction<S> + ?Sized,
    {
        let mut runs: Vec<(S, f64, usize)> = tally
            .into_iter()
            .filter(|(_, c)| *c > 0)
            .map(|(s, c)| {
                let v = value.value(&s);
                (s, v, c)
            })
            .collect();
        runs.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let len = runs.iter().map(|r| r.2).sum();
        let sorted = SortedSampleVector { runs, len };
        debug_assert!(sorted.is_sorted());
        sorted
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The `index`-th order statistic (0 is the highest-valued sample).
    pub fn get(&self, index: usize) -> Option<(&S, f64)> {
        let mut offset = 0;
        for (s, v, c) in &self.runs {
            offset += c;
            if index < offset {
                return Some((s, *v));
            }
        }
        None
    }

    /// Values in sorted order, one per sample.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.runs.iter().flat_map(|(_, v, c)| std::iter::repeat_n(*v, *c))
    }

    pub fn is_sorted(&self) -> bool {
        self.runs.windows(2).all(|w| w[0].1 >= w[1].1)
    }
}

/// One invocation of epsilon-Mix with `s = sample_size(alpha, epsilon)`.
pub fn epsilon_mix<S: Solution>(
    instance: &FwiInstance<S>,
    epsilon: f64,
    rng: &mut dyn RngCore,
) -> Result<S> {
    check_epsilon(epsilon)?;
    let alpha = instance.alpha();
    if rng.random_bool(alpha) {
        return instance.mechanism().run(rng);
    }
    let s = sample_size(alpha, epsilon)?;
    trimmed_draw(instance, s, rng)
}

/// epsilon-Mix with an explicit per-call sample count instead of the
/// epsilon-derived one.
pub fn epsilon_mix_with_samples<S: Solution>(
    instance: &FwiInstance<S>,
    samples: usize,
    rng: &mut dyn RngCore,
) -> Result<S> {
    if samples == 0 {
        return Err(Error::param("epsilon-Mix needs at least one prior sample"));
    }
    if rng.random_bool(instance.alpha()) {
        return instance.mechanism().run(rng);
    }
    trimmed_draw(instance, samples, rng)
}

fn trimmed_draw<S: Solution>(instance: &FwiInstance<S>, s: usize, rng: &mut dyn RngCore) -> Result<S> {
    let tally = instance.prior().sample_tally(s, rng)?;
    let sorted = SortedSampleVector::from_tally(tally, instance.value());
    if sorted.len() != s {
        return Err(Error::Prior(format!("expected {s} samples, prior returned {}", sorted.len())));
    }
    let weights = trim_weights(s, instance.alpha());
    let u = rng.random::<f64>() * weights.total();
    let (solution, _) = sorted.get(weights.select(u)).expect("selection stays within the sample vector");
    Ok(solution.clone())
}

/// One invocation of Simple-Mix.
pub fn simple_mix<S: Solution>(instance: &FwiInstance<S>, rng: &mut dyn RngCore) -> Result<S> {
    if rng.random_bool(instance.alpha()) {
        instance.mechanism().run(rng)
    } else {
        instance.prior().sample(rng)
    }
}

/// Exact output law of Simple-Mix: `alpha * [i = a] + (1 - alpha) * prior_i`.
pub fn simple_mix_distribution<S: Solution>(
    prior: &Distribution<S>,
    a: &S,
    alpha: f64,
) -> Result<Distribution<S>> {
    check_unit("alpha", alpha)?;
    let mut entries: std::collections::BTreeMap<S, f64> =
        prior.iter().map(|(s, p)| (s.clone(), (1.0 - alpha) * p)).collect();
    *entries.entry(a.clone()).or_insert(0.0) += alpha;
    entries.retain(|_, p| *p > 0.0);
    Ok(Distribution::from_map_unchecked(entries))
}

/// Which interpolation algorithm to run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Algorithm {
    SimpleMix,
    /// epsilon-Mix; `samples` overrides the epsilon-derived sample count.
    EpsilonMix { epsilon: f64, samples: Option<usize> },
}

impl Algorithm {
    pub fn run<S: Solution>(&self, instance: &FwiInstance<S>, rng: &mut dyn RngCore) -> Result<S> {
        match *self {
            Algorithm::SimpleMix => simple_mix(instance, rng),
            Algorithm::EpsilonMix { epsilon: _, samples: Some(n) } => {
                epsilon_mix_with_samples(instance, n, rng)
            }
            Algorithm::EpsilonMix { epsilon, samples: None } => epsilon_mix(instance, epsilon, rng),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::SimpleMix => "simple_mix",
            Algorithm::EpsilonMix { .. } => "epsilon_mix",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::SolutionId;
    use crate::instance::{merge_tally, ExplicitPrior, FairPrior, FixedMechanism, TabularValue};
    use crate::tv_distance;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn ids(entries: &[(usize, f64)]) -> Distribution {
        Distribution::new(entries.iter().map(|&(i, p)| (SolutionId(i), p))).unwrap()
    }

    fn instance(values: Vec<f64>, prior: Distribution, a: usize, alpha: f64) -> FwiInstance<SolutionId> {
        FwiInstance::new(
            Arc::new(TabularValue::new(values).unwrap()),
            Arc::new(ExplicitPrior::new(prior)),
            Arc::new(FixedMechanism::new(SolutionId(a), 1.0).unwrap()),
            alpha,
        )
        .unwrap()
    }

    #[test]
    fn sample_size_table_values() {
        assert_eq!(sample_size(0.0, 0.1).unwrap(), 2397);
        assert_eq!(sample_size(0.0, 0.05).unwrap(), 11805);
        assert_eq!(sample_size(0.5, 0.1).unwrap(), 4794);
        assert_eq!(sample_size(0.0, 0.01).unwrap(), 423866);
    }

    #[test]
    fn sample_size_rejects_bad_parameters() {
        assert!(sample_size(1.0, 0.1).is_err());
        assert!(sample_size(0.5, 0.0).is_err());
        assert!(sample_size(0.5, 1.0).is_err());
        assert!(sample_size(-0.1, 0.1).is_err());
    }

    #[test]
    fn tabulated_size_matches_published_numerators() {
        for k in 1..20 {
            let alpha = k as f64 / 20.0;
            let expected = (2397.0 / (1.0 - alpha)).ceil() as usize;
            assert_eq!(tabulated_sample_size(alpha, 0.1).unwrap(), expected);
            assert!(expected >= sample_size(alpha, 0.1).unwrap());
        }
    }

    #[test]
    fn trim_examples() {
        assert_eq!(trim_weights(4, 0.5).to_vec(), vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(trim_weights(4, 0.25).to_vec(), vec![1.0, 1.0, 1.0, 0.0]);
        let w = trim_weights(5, 0.3).to_vec();
        assert_eq!(w.len(), 5);
        for (got, want) in w.iter().zip([1.0, 1.0, 1.0, 0.5, 0.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(trim_weights(3, 0.0).to_vec(), vec![1.0; 3]);
        assert_eq!(trim_weights(3, 1.0).total(), 0.0);
    }

    #[test]
    fn select_inverts_cumulative_weights() {
        let w = trim_weights(5, 0.3);
        assert_eq!(w.select(0.0), 0);
        assert_eq!(w.select(2.99), 2);
        assert_eq!(w.select(3.2), 3);
        assert_eq!(w.select(w.total()), 3);
        let w = trim_weights(4, 0.5);
        assert_eq!(w.select(1.999_999), 1);
        assert_eq!(w.select(2.0), 1);
    }

    proptest! {
        #[test]
        fn trimmed_mass_is_exact(s in 1usize..5000, alpha in 0.0f64..=1.0) {
            let w = trim_weights(s, alpha);
            prop_assert_eq!(w.len(), s);
            prop_assert!((w.total() - (1.0 - alpha) * s as f64).abs() < 1e-9 * s as f64);
            let v = w.to_vec();
            prop_assert!(v.windows(2).all(|p| p[0] >= p[1]));
            prop_assert!(v.iter().filter(|x| **x > 0.0 && **x < 1.0).count() <= 1);
        }

        #[test]
        fn simple_mix_law_is_exact(
            weights in prop::collection::vec(0.0f64..1.0, 1..30),
            a in 0usize..40,
            alpha in 0.0f64..=1.0,
        ) {
            prop_assume!(weights.iter().sum::<f64>() > 0.0);
            let prior = Distribution::from_weights(weights.iter().enumerate().map(|(i, w)| (SolutionId(i), *w))).unwrap();
            let ps = simple_mix_distribution(&prior, &SolutionId(a), alpha).unwrap();
            prop_assert!((ps.total_mass() - 1.0).abs() < 1e-9);
            let expected = alpha * (1.0 - prior.prob(&SolutionId(a)));
            prop_assert!((tv_distance(&ps, &prior) - expected).abs() < 1e-12);
            for (s, p) in prior.iter() {
                prop_assert!(ps.prob(s) >= (1.0 - alpha) * p);
                if *s != SolutionId(a) {
                    prop_assert_eq!(ps.prob(s), (1.0 - alpha) * p);
                }
                if alpha < 1.0 {
                    prop_assert!(ps.contains(s));
                }
            }
        }
    }

    #[test]
    fn simple_mix_distribution_examples() {
        let prior = ids(&[(0, 0.2), (1, 0.8)]);
        assert_eq!(simple_mix_distribution(&prior, &SolutionId(0), 0.0).unwrap(), prior);
        assert_eq!(
            simple_mix_distribution(&prior, &SolutionId(1), 1.0).unwrap(),
            Distribution::point_mass(SolutionId(1))
        );
        let ps = simple_mix_distribution(&prior, &SolutionId(0), 0.5).unwrap();
        assert!((ps.prob(&SolutionId(0)) - 0.6).abs() < 1e-15);
        assert!((ps.prob(&SolutionId(1)) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn alpha_one_always_returns_mechanism_output() {
        let inst = instance(vec![0.0, 1.0, 5.0], ids(&[(0, 0.5), (1, 0.5)]), 2, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            assert_eq!(simple_mix(&inst, &mut rng).unwrap(), SolutionId(2));
            assert_eq!(epsilon_mix(&inst, 0.1, &mut rng).unwrap(), SolutionId(2));
        }
    }

    #[test]
    fn alpha_zero_reproduces_prior() {
        let prior = ids(&[(0, 0.1), (1, 0.3), (2, 0.6)]);
        let inst = instance(vec![3.0, 2.0, 1.0, 9.0], prior.clone(), 3, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 60_000;
        for alg in [Algorithm::SimpleMix, Algorithm::EpsilonMix { epsilon: 0.3, samples: None }] {
            let counts = merge_tally((0..n).map(|_| (alg.run(&inst, &mut rng).unwrap(), 1)));
            assert!(!counts.contains_key(&SolutionId(3)));
            for (s, p) in prior.iter() {
                let freq = counts[s] as f64 / n as f64;
                assert!((freq - p).abs() < 3.5 * (p * (1.0 - p) / n as f64).sqrt(), "{alg:?} {s}");
            }
        }
    }

    #[test]
    fn simple_mix_frequencies_match_closed_form() {
        let inst = instance(vec![1.0, 0.5], ids(&[(0, 0.2), (1, 0.8)]), 0, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let counts = merge_tally((0..n).map(|_| (simple_mix(&inst, &mut rng).unwrap(), 1)));
        let freq = counts[&SolutionId(0)] as f64 / n as f64;
        assert!((freq - 0.6).abs() < 3.0 * (0.24f64 / n as f64).sqrt());
    }

    #[test]
    fn epsilon_mix_zero_valued_prior_mean() {
        // Every prior solution is worth 0 and V(A) = lambda * V(Opt), so the
        // mean welfare is alpha * V(A).
        let values = vec![0.0, 0.0, 0.0, 0.6, 1.0];
        let lambda = 0.6;
        let alpha = 0.4;
        let inst = FwiInstance::new(
            Arc::new(TabularValue::new(values.clone()).unwrap()),
            Arc::new(ExplicitPrior::new(ids(&[(0, 0.3), (1, 0.3), (2, 0.4)]))),
            Arc::new(FixedMechanism::new(SolutionId(3), lambda).unwrap()),
            alpha,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| values[epsilon_mix(&inst, 0.1, &mut rng).unwrap().0])
            .sum::<f64>()
            / n as f64;
        let expected = alpha * lambda;
        let se = (alpha * (1.0 - alpha)).sqrt() * 0.6 / (n as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * se, "{mean} vs {expected}");
    }

    #[test]
    fn per_sample_and_tally_paths_agree() {
        // The same prior seen through the default one-at-a-time tally and the
        // multinomial tally must induce the same epsilon-Mix law.
        struct OneByOne(ExplicitPrior);
        impl FairPrior<SolutionId> for OneByOne {
            fn sample(&self, rng: &mut dyn rand::RngCore) -> Result<SolutionId> {
                self.0.sample(rng)
            }
        }
        let prior = ids(&[(0, 0.25), (1, 0.25), (2, 0.25), (3, 0.25)]);
        let values: Arc<dyn ValueFunction<SolutionId>> =
            Arc::new(TabularValue::new(vec![4.0, 3.0, 2.0, 1.0]).unwrap());
        let mech = Arc::new(FixedMechanism::new(SolutionId(0), 1.0).unwrap());
        let fast = FwiInstance::new(values.clone(), Arc::new(ExplicitPrior::new(prior.clone())), mech.clone(), 0.5)
            .unwrap();
        let slow = FwiInstance::new(values, Arc::new(OneByOne(ExplicitPrior::new(prior))), mech, 0.5).unwrap();
        let n = 40_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let law = |inst: &FwiInstance<SolutionId>, rng: &mut ChaCha8Rng| {
            Distribution::from_counts(
                merge_tally((0..n).map(|_| (epsilon_mix_with_samples(inst, 7, rng).unwrap(), 1)))
                    .into_iter()
                    .map(|(s, c)| (s, c as u64)),
            )
            .unwrap()
        };
        let a = law(&fast, &mut rng);
        let b = law(&slow, &mut rng);
        assert!(tv_distance(&a, &b) < 3.0 * (4.0 / n as f64).sqrt());
    }

    #[test]
    fn sorted_sample_vector_orders_by_value_then_id() {
        let v = TabularValue::new(vec![1.0, 5.0, 1.0, 3.0]).unwrap();
        let tally = vec![(SolutionId(2), 1), (SolutionId(0), 2), (SolutionId(1), 1), (SolutionId(3), 1)];
        let sorted = SortedSampleVector::from_tally(tally, &v);
        assert_eq!(sorted.len(), 5);
        let order: Vec<_> = (0..5).map(|j| sorted.get(j).unwrap().0 .0).collect();
        assert_eq!(order, vec![1, 3, 0, 0, 2]);
        assert!(sorted.values().collect::<Vec<_>>().windows(2).all(|w| w[0] >= w[1]));
        assert!(sorted.get(5).is_none());
    }

    #[test]
    fn bad_epsilon_rejected() {
        let inst = instance(vec![1.0], ids(&[(0, 1.0)]), 0, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(epsilon_mix(&inst, 0.0, &mut rng).is_err());
        assert!(epsilon_mix(&inst, 1.5, &mut rng).is_err());
        assert!(epsilon_mix_with_samples(&inst, 0, &mut rng).is_err());
    }
}
