//! Weighted bipartite B-matchings: agents (or reviewers) on the left, items
//! (goods or papers) on the right. Every item must be matched exactly
//! `demand` times to distinct agents and no agent may exceed `load_cap`
//! matches.

mod flow;

use std::collections::VecDeque;
use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::distribution::SolutionId;
use crate::error::{Error, Result};
use crate::instance::{FairPrior, FixedMechanism, FwiInstance, UtilityTable, ValueFunction};
use flow::MinCostFlow;

/// Largest node count (agents plus items) [`max_matching`] will solve.
pub const MAX_EXACT_NODES: usize = 500;

#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteInstance {
    n_left: usize,
    n_right: usize,
    weights: Vec<f64>,
    demand: usize,
    load_cap: usize,
}

impl BipartiteInstance {
    /// `weights` is row-major, one row of `n_right` entries per agent.
    pub fn new(n_left: usize, n_right: usize, weights: Vec<f64>, demand: usize, load_cap: usize) -> Result<Self> {
        if n_left == 0 || n_right == 0 {
            return Err(Error::param("both sides need at least one node"));
        }
        if weights.len() != n_left * n_right {
            return Err(Error::param(format!(
                "expected {} weights for a {n_left}x{n_right} graph, got {}",
                n_left * n_right,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::param("weights must be finite and non-negative"));
        }
        if demand == 0 || load_cap == 0 {
            return Err(Error::param("demand and load cap must be positive"));
        }
        if demand > n_left {
            return Err(Error::Infeasible(format!("items need {demand} distinct agents but only {n_left} exist")));
        }
        if n_left * load_cap < n_right * demand {
            return Err(Error::Infeasible(format!(
                "{n_left} agents with cap {load_cap} cannot cover {n_right} items with demand {demand}"
            )));
        }
        Ok(BipartiteInstance { n_left, n_right, weights, demand, load_cap })
    }

    pub fn n_left(&self) -> usize {
        self.n_left
    }

    pub fn n_right(&self) -> usize {
        self.n_right
    }

    pub fn demand(&self) -> usize {
        self.demand
    }

    pub fn load_cap(&self) -> usize {
        self.load_cap
    }

    pub fn weight(&self, agent: usize, item: usize) -> f64 {
        self.weights[agent * self.n_right + item]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of edges in every feasible solution.
    pub fn solution_size(&self) -> usize {
        self.n_right * self.demand
    }
}

/// Load cap that keeps reviewer loads within one of each other:
/// `ceil(demand * n_right / n_left)`.
pub fn balanced_load_cap(n_left: usize, n_right: usize, demand: usize) -> usize {
    (demand * n_right).div_ceil(n_left.max(1))
}

/// A set of `(agent, item)` edges, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct AssignmentSolution {
    edges: Vec<(u32, u32)>,
}

impl AssignmentSolution {
    pub fn from_edges(edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut edges: Vec<(u32, u32)> = edges.into_iter().map(|(a, i)| (a as u32, i as u32)).collect();
        edges.sort_unstable();
        edges.dedup();
        AssignmentSolution { edges }
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().map(|&(a, i)| (a as usize, i as usize))
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, agent: usize, item: usize) -> bool {
        self.edges.binary_search(&(agent as u32, item as u32)).is_ok()
    }

    pub fn total_weight(&self, instance: &BipartiteInstance) -> f64 {
        self.edges().map(|(a, i)| instance.weight(a, i)).sum()
    }

    /// Checks that every item is matched exactly `demand` times and every
    /// agent at most `load_cap` times.
    pub fn validate(&self, instance: &BipartiteInstance) -> Result<()> {
        let mut item_count = vec![0usize; instance.n_right];
        let mut agent_count = vec![0usize; instance.n_left];
        for (a, i) in self.edges() {
            if a >= instance.n_left || i >= instance.n_right {
                return Err(Error::Infeasible(format!("edge ({a}, {i}) is outside the graph")));
            }
            item_count[i] += 1;
            agent_count[a] += 1;
        }
        if let Some(i) = item_count.iter().position(|c| *c != instance.demand) {
            return Err(Error::Infeasible(format!(
                "item {i} matched {} times, demand is {}",
                item_count[i], instance.demand
            )));
        }
        if let Some(a) = agent_count.iter().position(|c| *c > instance.load_cap) {
            return Err(Error::Infeasible(format!(
                "agent {a} matched {} times, cap is {}",
                agent_count[a], instance.load_cap
            )));
        }
        Ok(())
    }
}

/// Complete bipartite goods instance with i.i.d. `Uniform[0, 1)` weights,
/// demand one and the smallest load cap that keeps it feasible.
pub fn synthetic_instance(n_left: usize, n_right: usize, rng: &mut dyn RngCore) -> Result<BipartiteInstance> {
    let weights = (0..n_left * n_right).map(|_| rng.random::<f64>()).collect();
    BipartiteInstance::new(n_left, n_right, weights, 1, balanced_load_cap(n_left, n_right, 1))
}

/// Partial assignment with per-node counters.
struct Builder<'a> {
    instance: &'a BipartiteInstance,
    matched: Vec<bool>,
    agent_load: Vec<usize>,
    item_fill: Vec<usize>,
    missing: usize,
}

impl<'a> Builder<'a> {
    fn new(instance: &'a BipartiteInstance) -> Self {
        Builder {
            instance,
            matched: vec![false; instance.n_left * instance.n_right],
            agent_load: vec![0; instance.n_left],
            item_fill: vec![0; instance.n_right],
            missing: instance.solution_size(),
        }
    }

    fn can_add(&self, agent: usize, item: usize) -> bool {
        self.agent_load[agent] < self.instance.load_cap
            && self.item_fill[item] < self.instance.demand
            && !self.matched[agent * self.instance.n_right + item]
    }

    fn add(&mut self, agent: usize, item: usize) {
        self.matched[agent * self.instance.n_right + item] = true;
        self.agent_load[agent] += 1;
        self.item_fill[item] += 1;
        self.missing -= 1;
    }

    fn done(&self) -> bool {
        self.missing == 0
    }

    /// Fills remaining demand along augmenting paths, which may re-route
    /// existing edges. Needed when local choices block a feasible completion.
    fn complete(&mut self) -> Result<()> {
        let (nl, nr) = (self.instance.n_left, self.instance.n_right);
        while !self.done() {
            // BFS over agents (0..nl) and items (nl..nl+nr) in the residual graph.
            let mut parent: Vec<Option<usize>> = vec![None; nl + nr];
            let mut seen = vec![false; nl + nr];
            let mut queue = VecDeque::new();
            for (a, &load) in self.agent_load.iter().enumerate() {
                if load < self.instance.load_cap {
                    seen[a] = true;
                    queue.push_back(a);
                }
            }
            let mut end = None;
            while let Some(node) = queue.pop_front() {
                if node < nl {
                    for i in 0..nr {
                        if !self.matched[node * nr + i] && !seen[nl + i] {
                            seen[nl + i] = true;
                            parent[nl + i] = Some(node);
                            if self.item_fill[i] < self.instance.demand {
                                end = Some(nl + i);
                                break;
                            }
                            queue.push_back(nl + i);
                        }
                    }
                    if end.is_some() {
                        break;
                    }
                } else {
                    let i = node - nl;
                    for a in 0..nl {
                        if self.matched[a * nr + i] && !seen[a] {
                            seen[a] = true;
                            parent[a] = Some(node);
                            queue.push_back(a);
                        }
                    }
                }
            }
            let Some(mut node) = end else {
                return Err(Error::Infeasible("no feasible completion of the assignment".into()));
            };
            // Walk back, flipping edges: item <- agent is added, agent <- item removed.
            let mut flips = Vec::new();
            while let Some(p) = parent[node] {
                flips.push((p, node));
                node = p;
            }
            for (from, to) in flips.into_iter().rev() {
                if from < nl {
                    // agent -> item: new edge; counters adjusted below
                    self.matched[from * nr + (to - nl)] = true;
                } else {
                    self.matched[to * nr + (from - nl)] = false;
                }
            }
            // Net effect: the path's first agent and last item gain one match.
            let first_agent = node;
            let last_item = end.expect("path found") - nl;
            self.agent_load[first_agent] += 1;
            self.item_fill[last_item] += 1;
            self.missing -= 1;
        }
        Ok(())
    }

    fn finish(self) -> AssignmentSolution {
        let nr = self.instance.n_right;
        AssignmentSolution::from_edges(
            self.matched.iter().enumerate().filter(|(_, m)| **m).map(|(k, _)| (k / nr, k % nr)),
        )
    }
}

/// Scans edges by descending weight (ties by `(agent, item)`) and keeps each
/// edge that respects both constraints. If that greedy pass leaves demand
/// unmet, the remainder is filled along augmenting paths.
pub fn greedy_matching(instance: &BipartiteInstance) -> Result<AssignmentSolution> {
    let nr = instance.n_right;
    let mut order: Vec<usize> = (0..instance.weights.len()).collect();
    order.sort_by(|&x, &y| instance.weights[y].total_cmp(&instance.weights[x]).then(x.cmp(&y)));
    let mut builder = Builder::new(instance);
    for k in order {
        if builder.done() {
            break;
        }
        let (a, i) = (k / nr, k % nr);
        if builder.can_add(a, i) {
            builder.add(a, i);
        }
    }
    builder.complete()?;
    Ok(builder.finish())
}

/// Maximum-weight feasible B-matching via min-cost flow.
pub fn max_matching(instance: &BipartiteInstance) -> Result<AssignmentSolution> {
    let (nl, nr) = (instance.n_left, instance.n_right);
    if nl + nr > MAX_EXACT_NODES {
        return Err(Error::Scale { what: "exact matching", size: nl + nr, limit: MAX_EXACT_NODES });
    }
    let source = nl + nr;
    let sink = source + 1;
    let mut graph = MinCostFlow::new(nl + nr + 2);
    for a in 0..nl {
        graph.add_edge(source, a, instance.load_cap as i64, 0.0);
    }
    let mut edges = Vec::with_capacity(nl * nr);
    for a in 0..nl {
        for i in 0..nr {
            edges.push((a, i, graph.add_edge(a, nl + i, 1, -instance.weight(a, i))));
        }
    }
    for i in 0..nr {
        graph.add_edge(nl + i, sink, instance.demand as i64, 0.0);
    }
    let required = instance.solution_size() as i64;
    let (sent, _) = graph.run(source, sink, required);
    if sent < required {
        return Err(Error::Infeasible(format!("only {sent} of {required} matches can be routed")));
    }
    Ok(AssignmentSolution::from_edges(
        edges.into_iter().filter(|e| graph.flow(e.2) > 0).map(|(a, i, _)| (a, i)),
    ))
}

/// Randomized round robin: agents are drawn in a fresh uniformly random order
/// on every pass and each picks its highest-weight item that still lacks
/// demand (ties to the lower item index). Agents at their cap are skipped.
/// With demand one and `n_left >= n_right` this is a single pass over the
/// first `n_right` agents of a random permutation.
pub fn round_robin_sample(instance: &BipartiteInstance, rng: &mut dyn RngCore) -> Result<AssignmentSolution> {
    let (nl, nr) = (instance.n_left, instance.n_right);
    let mut builder = Builder::new(instance);
    let mut order: Vec<usize> = (0..nl).collect();
    while !builder.done() {
        let before = builder.missing;
        for t in 0..nl {
            if builder.done() {
                break;
            }
            // Lazy Fisher-Yates: only as much of the permutation as is used.
            let j = rng.random_range(t..nl);
            order.swap(t, j);
            let agent = order[t];
            if builder.agent_load[agent] >= instance.load_cap {
                continue;
            }
            let row = &instance.weights[agent * nr..(agent + 1) * nr];
            let mut best: Option<usize> = None;
            for (i, w) in row.iter().enumerate() {
                if builder.can_add(agent, i) && best.is_none_or(|b| *w > row[b]) {
                    best = Some(i);
                }
            }
            if let Some(i) = best {
                builder.add(agent, i);
            }
        }
        if builder.missing == before {
            builder.complete()?;
        }
    }
    Ok(builder.finish())
}

/// Sum of selected edge weights.
#[derive(Clone, Debug)]
pub struct UtilitarianValue {
    instance: Arc<BipartiteInstance>,
}

pub fn utilitarian_value(instance: Arc<BipartiteInstance>) -> UtilitarianValue {
    UtilitarianValue { instance }
}

impl ValueFunction<AssignmentSolution> for UtilitarianValue {
    fn value(&self, solution: &AssignmentSolution) -> f64 {
        solution.total_weight(&self.instance)
    }
}

/// Per-agent utilities of a solution.
pub trait AgentUtilities<S>: Send + Sync {
    fn n_agents(&self) -> usize;
    fn utility(&self, agent: usize, solution: &S) -> f64;
}

impl AgentUtilities<SolutionId> for UtilityTable {
    fn n_agents(&self) -> usize {
        UtilityTable::n_agents(self)
    }

    fn utility(&self, agent: usize, solution: &SolutionId) -> f64 {
        UtilityTable::utility(self, agent, *solution)
    }
}

/// An agent's utility is the total weight of its own edges.
impl AgentUtilities<AssignmentSolution> for BipartiteInstance {
    fn n_agents(&self) -> usize {
        self.n_left
    }

    fn utility(&self, agent: usize, solution: &AssignmentSolution) -> f64 {
        solution.edges().filter(|(a, _)| *a == agent).map(|(a, i)| self.weight(a, i)).sum()
    }
}

impl<S, U: AgentUtilities<S> + ?Sized> AgentUtilities<S> for Arc<U> {
    fn n_agents(&self) -> usize {
        (**self).n_agents()
    }

    fn utility(&self, agent: usize, solution: &S) -> f64 {
        (**self).utility(agent, solution)
    }
}

/// Nash social welfare: the geometric mean of agent utilities.
#[derive(Clone, Debug)]
pub struct NashValue<U> {
    utilities: U,
}

pub fn nash_value<U>(utilities: U) -> NashValue<U> {
    NashValue { utilities }
}

impl<S, U: AgentUtilities<S>> ValueFunction<S> for NashValue<U> {
    fn value(&self, solution: &S) -> f64 {
        let n = self.utilities.n_agents();
        if n == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for a in 0..n {
            let u = self.utilities.utility(a, solution);
            if u <= 0.0 {
                return 0.0;
            }
            log_sum += u.ln();
        }
        (log_sum / n as f64).exp()
    }
}

/// Round-robin fair prior over an instance.
#[derive(Clone, Debug)]
pub struct RoundRobinPrior {
    instance: Arc<BipartiteInstance>,
}

impl RoundRobinPrior {
    pub fn new(instance: Arc<BipartiteInstance>) -> Self {
        RoundRobinPrior { instance }
    }
}

impl FairPrior<AssignmentSolution> for RoundRobinPrior {
    fn sample(&self, rng: &mut dyn RngCore) -> Result<AssignmentSolution> {
        round_robin_sample(&self.instance, rng)
    }
}

/// Goods allocation: exact max-weight matching (lambda = 1) against the
/// round-robin prior, utilitarian welfare.
pub fn goods_fwi_instance(instance: Arc<BipartiteInstance>, alpha: f64) -> Result<FwiInstance<AssignmentSolution>> {
    let best = max_matching(&instance)?;
    FwiInstance::new(
        Arc::new(utilitarian_value(instance.clone())),
        Arc::new(RoundRobinPrior::new(instance)),
        Arc::new(FixedMechanism::new(best, 1.0)?),
        alpha,
    )
}

/// Reviewer matching: greedy B-matching with a configured approximation
/// factor against the round-robin prior, utilitarian welfare.
pub fn reviewer_fwi_instance(
    instance: Arc<BipartiteInstance>,
    alpha: f64,
    lambda: f64,
) -> Result<FwiInstance<AssignmentSolution>> {
    let greedy = greedy_matching(&instance)?;
    FwiInstance::new(
        Arc::new(utilitarian_value(instance.clone())),
        Arc::new(RoundRobinPrior::new(instance)),
        Arc::new(FixedMechanism::new(greedy, lambda)?),
        alpha,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::merge_tally;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn square(w: &[[f64; 2]; 2]) -> BipartiteInstance {
        BipartiteInstance::new(2, 2, w.iter().flatten().copied().collect(), 1, 1).unwrap()
    }

    #[test]
    fn synthetic_is_seeded_and_bounded() {
        let a = synthetic_instance(100, 5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = synthetic_instance(100, 5, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.weights().len(), 500);
        assert!(a.weights().iter().all(|w| (0.0..1.0).contains(w)));
        assert_eq!((a.demand(), a.load_cap()), (1, 1));
        let one = synthetic_instance(1, 1, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!((0.0..1.0).contains(&one.weight(0, 0)));
    }

    #[test]
    fn greedy_examples() {
        let diag = square(&[[1.0, 0.0], [0.0, 1.0]]);
        let g = greedy_matching(&diag).unwrap();
        assert_eq!(g, AssignmentSolution::from_edges([(0, 0), (1, 1)]));
        assert_eq!(g.total_weight(&diag), 2.0);

        let trap = square(&[[3.0, 2.0], [2.0, 0.0]]);
        let g = greedy_matching(&trap).unwrap();
        assert_eq!(g, AssignmentSolution::from_edges([(0, 0), (1, 1)]));
        assert_eq!(g.total_weight(&trap), 3.0);
        let m = max_matching(&trap).unwrap();
        assert_eq!(m, AssignmentSolution::from_edges([(0, 1), (1, 0)]));
        assert_eq!(m.total_weight(&trap), 4.0);

        let forced = BipartiteInstance::new(2, 1, vec![0.3, 0.7], 2, 1).unwrap();
        assert_eq!(greedy_matching(&forced).unwrap(), AssignmentSolution::from_edges([(0, 0), (1, 0)]));
    }

    #[test]
    fn greedy_repairs_blocked_completion() {
        // Three items needing two agents each, three agents with cap two:
        // greedy saturates agents 0 and 1 on items 0 and 1, leaving item 2
        // unreachable without re-routing.
        let w = vec![
            9.0, 9.0, 0.0, //
            9.0, 9.0, 0.0, //
            1.0, 1.0, 0.5,
        ];
        let inst = BipartiteInstance::new(3, 3, w, 2, 2).unwrap();
        let g = greedy_matching(&inst).unwrap();
        g.validate(&inst).unwrap();
        let m = max_matching(&inst).unwrap();
        m.validate(&inst).unwrap();
        assert!(m.total_weight(&inst) >= g.total_weight(&inst));
    }

    #[test]
    fn identity_max_matching_is_trace() {
        let n = 4;
        let w: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { 1.0 + k as f64 } else { 0.5 }).collect();
        let inst = BipartiteInstance::new(n, n, w, 1, 1).unwrap();
        let m = max_matching(&inst).unwrap();
        assert_eq!(m, AssignmentSolution::from_edges((0..n).map(|i| (i, i))));
    }

    #[test]
    fn infeasible_and_oversized_rejected() {
        assert!(matches!(BipartiteInstance::new(1, 2, vec![1.0, 1.0], 1, 1), Err(Error::Infeasible(_))));
        assert!(matches!(BipartiteInstance::new(1, 1, vec![1.0], 2, 5), Err(Error::Infeasible(_))));
        assert!(BipartiteInstance::new(2, 2, vec![1.0; 3], 1, 1).is_err());
        assert!(BipartiteInstance::new(1, 1, vec![-1.0], 1, 1).is_err());
        let big = BipartiteInstance::new(300, 250, vec![0.0; 75_000], 1, 1).unwrap();
        assert!(matches!(max_matching(&big), Err(Error::Scale { .. })));
    }

    #[test]
    fn round_robin_single_and_symmetric() {
        let one = BipartiteInstance::new(1, 1, vec![0.4], 1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(round_robin_sample(&one, &mut rng).unwrap(), AssignmentSolution::from_edges([(0, 0)]));

        // Identical preferences: whoever is drawn first takes item 0.
        let same = square(&[[1.0, 0.5], [1.0, 0.5]]);
        let n = 20_000;
        let counts = merge_tally((0..n).map(|_| (round_robin_sample(&same, &mut rng).unwrap(), 1)));
        assert_eq!(counts.len(), 2);
        for c in counts.values() {
            let freq = *c as f64 / n as f64;
            assert!((freq - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
        }
    }

    #[test]
    fn round_robin_reviewer_variant_is_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let nl = rng.random_range(3..8);
            let nr = rng.random_range(1..10);
            let demand = rng.random_range(1..=3.min(nl));
            let cap = balanced_load_cap(nl, nr, demand);
            let w = (0..nl * nr).map(|_| rng.random::<f64>()).collect();
            let inst = BipartiteInstance::new(nl, nr, w, demand, cap).unwrap();
            round_robin_sample(&inst, &mut rng).unwrap().validate(&inst).unwrap();
            greedy_matching(&inst).unwrap().validate(&inst).unwrap();
        }
    }

    #[test]
    fn utilitarian_and_nash_values() {
        let inst = Arc::new(square(&[[1.0, 0.0], [0.0, 1.0]]));
        let v = utilitarian_value(inst.clone());
        assert_eq!(v.value(&AssignmentSolution::default()), 0.0);
        assert_eq!(v.value(&AssignmentSolution::from_edges([(0, 0), (1, 1)])), 2.0);

        let single = UtilityTable::new(vec![vec![5.0]]).unwrap();
        assert!((nash_value(single).value(&SolutionId(0)) - 5.0).abs() < 1e-12);
        let equal = UtilityTable::new(vec![vec![3.0], vec![3.0], vec![3.0]]).unwrap();
        assert!((nash_value(equal).value(&SolutionId(0)) - 3.0).abs() < 1e-12);
        let pair = UtilityTable::new(vec![vec![1.0], vec![4.0]]).unwrap();
        assert!((nash_value(pair).value(&SolutionId(0)) - 2.0).abs() < 1e-12);
        let zero = UtilityTable::new(vec![vec![0.0], vec![4.0]]).unwrap();
        assert_eq!(nash_value(zero).value(&SolutionId(0)), 0.0);

        let nash = nash_value(inst);
        assert!((nash.value(&AssignmentSolution::from_edges([(0, 0), (1, 1)])) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn goods_instance_uses_max_matching() {
        let inst = Arc::new(synthetic_instance(10, 3, &mut ChaCha8Rng::seed_from_u64(8)).unwrap());
        let fwi = goods_fwi_instance(inst.clone(), 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = fwi.mechanism().run(&mut rng).unwrap();
        assert_eq!(a, max_matching(&inst).unwrap());
        let sample = fwi.prior().sample(&mut rng).unwrap();
        sample.validate(&inst).unwrap();
        assert!(fwi.value().value(&a) >= fwi.value().value(&sample) - 1e-12);
    }
}
