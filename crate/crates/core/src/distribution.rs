//! Sparse probability distributions over a solution space.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{check_unit, Error, Result};
use crate::instance::ValueFunction;
use crate::TOLERANCE;

/// Opaque handle into an enumerable solution space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SolutionId(pub usize);

impl SolutionId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for SolutionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl From<usize> for SolutionId {
    fn from(value: usize) -> Self {
        SolutionId(value)
    }
}

/// A probability vector stored sparsely: only solutions with positive mass
/// are kept, ordered by solution so iteration is deterministic.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution<S = SolutionId> {
    entries: BTreeMap<S, f64>,
}

impl<S: Ord + Clone> Distribution<S> {
    /// Builds a distribution from `(solution, probability)` pairs. Repeated
    /// solutions are merged and zero entries dropped. The probabilities must
    /// be non-negative and sum to one within [`TOLERANCE`].
    pub fn new(entries: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let entries = collect(entries)?;
        let total: f64 = entries.values().sum();
        if (total - 1.0).abs() > TOLERANCE {
            return Err(Error::Distribution(format!("probabilities sum to {total}, expected 1")));
        }
        Ok(Distribution { entries })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let mut entries = collect(weights)?;
        let total: f64 = entries.values().sum();
        if total <= 0.0 {
            return Err(Error::Distribution("weights have no positive mass".into()));
        }
        for p in entries.values_mut() {
            *p /= total;
        }
        Ok(Distribution { entries })
    }

    /// Empirical law of observed counts.
    pub fn from_counts(counts: impl IntoIterator<Item = (S, u64)>) -> Result<Self> {
        Self::from_weights(counts.into_iter().map(|(s, c)| (s, c as f64)))
    }

    pub fn point_mass(solution: S) -> Self {
        Distribution { entries: BTreeMap::from([(solution, 1.0)]) }
    }

    pub fn uniform(solutions: impl IntoIterator<Item = S>) -> Result<Self> {
        Self::from_weights(solutions.into_iter().map(|s| (s, 1.0)))
    }

    /// `t * p + (1 - t) * q`.
    pub fn mixture(t: f64, p: &Self, q: &Self) -> Result<Self> {
        check_unit("mixture weight", t)?;
        let mut entries: BTreeMap<S, f64> = BTreeMap::new();
        for (s, pi) in p.iter() {
            *entries.entry(s.clone()).or_default() += t * pi;
        }
        for (s, qi) in q.iter() {
            *entries.entry(s.clone()).or_default() += (1.0 - t) * qi;
        }
        entries.retain(|_, v| *v > 0.0);
        Ok(Distribution { entries })
    }

    /// Probability of `solution`; zero outside the support.
    pub fn prob(&self, solution: &S) -> f64 {
        self.entries.get(solution).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&S, f64)> + '_ {
        self.entries.iter().map(|(s, p)| (s, *p))
    }

    pub fn support(&self) -> impl Iterator<Item = &S> + '_ {
        self.entries.keys()
    }

    pub fn contains(&self, solution: &S) -> bool {
        self.entries.contains_key(solution)
    }

    /// Number of solutions with positive probability.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.values().sum()
    }

    pub(crate) fn from_map_unchecked(entries: BTreeMap<S, f64>) -> Self {
        debug_assert!(entries.values().all(|p| *p > 0.0));
        Distribution { entries }
    }
}

fn collect<S: Ord>(entries: impl IntoIterator<Item = (S, f64)>) -> Result<BTreeMap<S, f64>> {
    let mut map: BTreeMap<S, f64> = BTreeMap::new();
    for (s, p) in entries {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::Distribution(format!("invalid probability {p}")));
        }
        if p > 0.0 {
            *map.entry(s).or_default() += p;
        }
    }
    Ok(map)
}

/// `sum_i p_i * V(i)` over the support of `dist`.
pub fn expected_value<S, V>(dist: &Distribution<S>, value: &V) -> f64
where
    S: Ord + Clone,
    V: ValueFunction<S> + ?Sized,
{
    dist.iter().map(|(s, p)| p * value.value(s)).sum()
}

/// Total variation distance `1/2 * sum_i |p_i - q_i|`, clamped to `[0, 1]`.
pub fn tv_distance<S: Ord + Clone>(p: &Distribution<S>, q: &Distribution<S>) -> f64 {
    let mut left = p.entries.iter().peekable();
    let mut right = q.entries.iter().peekable();
    let mut sum = 0.0;
    loop {
        match (left.peek(), right.peek()) {
            (Some((ls, lp)), Some((rs, rp))) => match ls.cmp(rs) {
                std::cmp::Ordering::Less => {
                    sum += **lp;
                    left.next();
                }
                std::cmp::Ordering::Greater => {
                    sum += **rp;
                    right.next();
                }
                std::cmp::Ordering::Equal => {
                    sum += (**lp - **rp).abs();
                    left.next();
                    right.next();
                }
            },
            (Some((_, lp)), None) => {
                sum += **lp;
                left.next();
            }
            (None, Some((_, rp))) => {
                sum += **rp;
                right.next();
            }
            (None, None) => break,
        }
    }
    (0.5 * sum).clamp(0.0, 1.0)
}

/// Whether `p` lies within total variation `alpha` of `prior`.
pub fn is_alpha_fair<S: Ord + Clone>(
    p: &Distribution<S>,
    prior: &Distribution<S>,
    alpha: f64,
) -> Result<bool> {
    check_unit("alpha", alpha)?;
    Ok(tv_distance(p, prior) <= alpha + TOLERANCE)
}
