//! Panel selection over a demographic point cloud.
//!
//! A panel is a set of `k` distinct individuals. Its cost is the k-means
//! objective with the panel members as centers; welfare is
//! `exp(-cost / n_points)`, an order-preserving transform of the Gaussian
//! mixture likelihood. k-means++ seeding serves as the welfare mechanism and
//! RandomReplace (perturbing a seeded panel by swapping members for nearby
//! individuals) as the fair prior.

use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instance::{FairPrior, FwiInstance, ValueFunction, WelfareMechanism};

const COST_CHUNK: usize = 1024;

/// Points in Euclidean space, one row per individual, without duplicates.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() {
            return Err(Error::param("point set is empty"));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::param("rows have different dimensions"));
        }
        if rows.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::param("coordinates must be finite"));
        }
        let mut sorted: Vec<&Vec<f64>> = rows.iter().collect();
        sorted.sort_by(|a, b| cmp_rows(a, b));
        if sorted.windows(2).any(|w| cmp_rows(w[0], w[1]).is_eq()) {
            return Err(Error::param("point set contains duplicate rows"));
        }
        Ok(PointSet { dim, coords: rows.into_iter().flatten().collect() })
    }

    /// Removes duplicate rows and sorts the rest, so the result does not
    /// depend on input order.
    pub fn deduplicated(mut rows: Vec<Vec<f64>>) -> Result<Self> {
        rows.sort_by(|a, b| cmp_rows(a, b));
        rows.dedup_by(|a, b| cmp_rows(a, b).is_eq());
        Self::new(rows)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn dist2(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.point(i), self.point(j))
    }

    /// The `q` points closest to `center`, excluding `center` itself; ties
    /// go to the lower index.
    pub fn nearest_neighbors(&self, center: usize, q: usize) -> Vec<usize> {
        let mut others: Vec<(f64, usize)> =
            (0..self.len()).filter(|&j| j != center).map(|j| (self.dist2(center, j), j)).collect();
        let q = q.min(others.len());
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if q < others.len() && q > 0 {
            others.select_nth_unstable_by(q - 1, by_distance);
        }
        others.truncate(q);
        others.sort_by(by_distance);
        others.into_iter().map(|(_, j)| j).collect()
    }
}

fn cmp_rows(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(a.len().cmp(&b.len()))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A set of distinct point indices, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Panel {
    members: Vec<usize>,
}

impl Panel {
    pub fn new(mut members: Vec<usize>, n_points: usize) -> Result<Self> {
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("panel members must be distinct"));
        }
        if let Some(m) = members.iter().find(|m| **m >= n_points) {
            return Err(Error::param(format!("panel member {m} is not a point index")));
        }
        Ok(Panel { members })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, point: usize) -> bool {
        self.members.binary_search(&point).is_ok()
    }
}

/// `sum_p min_{k in panel} ||p - k||^2`.
pub fn panel_cost(panel: &Panel, points: &PointSet) -> Result<f64> {
    if panel.is_empty() {
        return Err(Error::param("panel is empty"));
    }
    let nearest = |p: usize| {
        panel.members.iter().map(|&k| points.dist2(p, k)).fold(f64::INFINITY, f64::min)
    };
    let n = points.len();
    if n <= COST_CHUNK {
        return Ok((0..n).map(nearest).sum());
    }
    // Fixed chunking keeps the floating-point sum order independent of the
    // thread pool.
    let partial: Vec<f64> = (0..n.div_ceil(COST_CHUNK))
        .into_par_iter()
        .map(|c| (c * COST_CHUNK..((c + 1) * COST_CHUNK).min(n)).map(nearest).sum())
        .collect();
    Ok(partial.into_iter().sum())
}

/// Welfare `exp(-cost / n_points)`, in `(0, 1]`.
#[derive(Clone, Debug)]
pub struct LikelihoodValue {
    points: Arc<PointSet>,
}

pub fn likelihood_value(points: Arc<PointSet>) -> LikelihoodValue {
    LikelihoodValue { points }
}

impl LikelihoodValue {
    pub fn from_cost(&self, cost: f64) -> f64 {
        (-cost / self.points.len() as f64).exp()
    }
}

impl ValueFunction<Panel> for LikelihoodValue {
    fn value(&self, panel: &Panel) -> f64 {
        panel_cost(panel, &self.points).map(|c| self.from_cost(c)).unwrap_or(0.0)
    }
}

/// k-means++ seeding over the data points: the first center is uniform, each
/// further center is drawn with probability proportional to its squared
/// distance from the nearest chosen center.
pub fn kmeanspp_select(points: &PointSet, k: usize, rng: &mut dyn RngCore) -> Result<Panel> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::param(format!("panel size must lie in 1..={n}, got {k}")));
    }
    let mut chosen = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    chosen.push(first);
    let mut nearest: Vec<f64> = (0..n).map(|p| points.dist2(p, first)).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (p, d) in nearest.iter().enumerate() {
                acc += d;
                if *d > 0.0 && u < acc {
                    pick = Some(p);
                    break;
                }
            }
            // Rounding can leave u at the very top of the range.
            pick.unwrap_or_else(|| nearest.iter().rposition(|d| *d > 0.0).expect("positive total"))
        } else {
            // Only reachable with coincident points; fall back to uniform.
            let free: Vec<usize> = (0..n).filter(|p| !chosen.contains(p)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (p, d) in nearest.iter_mut().enumerate() {
            *d = d.min(points.dist2(p, next));
        }
    }
    Panel::new(chosen, n)
}

/// RandomReplace perturbation of a fixed initial panel. Neighbor lists of the
/// initial members are computed once.
#[derive(Clone, Debug)]
pub struct RandomReplace {
    initial: Panel,
    q: usize,
    neighbors: Vec<Vec<usize>>,
}

impl RandomReplace {
    pub fn new(points: &PointSet, initial: Panel, q: usize) -> Result<Self> {
        if q > initial.len() {
            return Err(Error::param(format!("q = {q} exceeds the panel size {}", initial.len())));
        }
        if let Some(m) = initial.members.iter().find(|m| **m >= points.len()) {
            return Err(Error::param(format!("panel member {m} is not a point index")));
        }
        let neighbors = if q == 0 {
            Vec::new()
        } else {
            initial.members.iter().map(|&c| points.nearest_neighbors(c, q)).collect()
        };
        Ok(RandomReplace { initial, q, neighbors })
    }

    pub fn initial(&self) -> &Panel {
        &self.initial
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Neighbor list of the initial member at `position`.
    pub fn neighbors_of(&self, position: usize) -> &[usize] {
        &self.neighbors[position]
    }

    /// Picks `q` members uniformly without replacement and replaces each by a
    /// uniform draw from its `q` nearest neighbors. A neighbor already on the
    /// panel is discarded and the draw repeated; with no candidates left the
    /// member stays.
    pub fn sample(&self, rng: &mut dyn RngCore) -> Panel {
        self.sample_traced(rng).0
    }

    /// Like [`RandomReplace::sample`], also returning each `(replaced, newcomer)` pair.
    pub fn sample_traced(&self, rng: &mut dyn RngCore) -> (Panel, Vec<(usize, usize)>) {
        let mut members = self.initial.members.clone();
        let mut swaps = Vec::new();
        if self.q == 0 {
            return (self.initial.clone(), swaps);
        }
        let mut on_panel: std::collections::HashSet<usize> = members.iter().copied().collect();
        for position in index::sample(rng, members.len(), self.q) {
            let center = members[position];
            let mut candidates = self.neighbors[position].clone();
            while !candidates.is_empty() {
                let pick = candidates.swap_remove(rng.random_range(0..candidates.len()));
                if !on_panel.contains(&pick) {
                    on_panel.remove(&center);
                    on_panel.insert(pick);
                    members[position] = pick;
                    swaps.push((center, pick));
                    break;
                }
            }
        }
        members.sort_unstable();
        (Panel { members }, swaps)
    }
}

pub fn random_replace_sample(points: &PointSet, initial: &Panel, q: usize, rng: &mut dyn RngCore) -> Result<Panel> {
    Ok(RandomReplace::new(points, initial.clone(), q)?.sample(rng))
}

impl FairPrior<Panel> for RandomReplace {
    fn sample(&self, rng: &mut dyn RngCore) -> Result<Panel> {
        Ok(RandomReplace::sample(self, rng))
    }
}

/// k-means++ as a welfare mechanism; `lambda` is a configured constant.
#[derive(Clone, Debug)]
pub struct KMeansPlusPlus {
    points: Arc<PointSet>,
    k: usize,
    lambda: f64,
}

impl KMeansPlusPlus {
    pub fn new(points: Arc<PointSet>, k: usize, lambda: f64) -> Result<Self> {
        if k == 0 || k > points.len() {
            return Err(Error::param(format!("panel size must lie in 1..={}, got {k}", points.len())));
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::param(format!("lambda must lie in (0, 1], got {lambda}")));
        }
        Ok(KMeansPlusPlus { points, k, lambda })
    }
}

impl WelfareMechanism<Panel> for KMeansPlusPlus {
    fn run(&self, rng: &mut dyn RngCore) -> Result<Panel> {
        kmeanspp_select(&self.points, self.k, rng)
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// How RandomReplace obtains its starting panel.
#[derive(Clone, Debug)]
pub enum InitialPanel {
    /// A k-means++ panel drawn once from this seed.
    Seeded(u64),
    Given(Panel),
}

/// RandomReplace replaces `floor(3/4 * k)` members.
pub fn replacement_count(k: usize) -> usize {
    3 * k / 4
}

/// Sortition instance: k-means++ mechanism, RandomReplace prior started from
/// `initial`, likelihood welfare.
pub fn sortition_fwi_instance(
    points: Arc<PointSet>,
    n_k: usize,
    initial: InitialPanel,
    lambda: f64,
    alpha: f64,
) -> Result<FwiInstance<Panel>> {
    let mechanism = KMeansPlusPlus::new(points.clone(), n_k, lambda)?;
    let start = match initial {
        InitialPanel::Seeded(seed) => kmeanspp_select(&points, n_k, &mut ChaCha8Rng::seed_from_u64(seed))?,
        InitialPanel::Given(panel) => {
            if panel.len() != n_k {
                return Err(Error::param(format!("initial panel has {} members, expected {n_k}", panel.len())));
            }
            panel
        }
    };
    let prior = RandomReplace::new(&points, start, replacement_count(n_k))?;
    FwiInstance::new(Arc::new(likelihood_value(points)), Arc::new(prior), Arc::new(mechanism), alpha)
}
