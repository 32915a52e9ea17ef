//! Successive-shortest-path min-cost flow with Johnson potentials.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Clone, Debug)]
struct Edge {
    to: usize,
    rev: usize,
    cap: i64,
    cost: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct MinCostFlow {
    graph: Vec<Vec<Edge>>,
}

/// Handle to an edge added with [`MinCostFlow::add_edge`].
#[derive(Clone, Copy, Debug)]
pub(crate) struct EdgeRef {
    from: usize,
    index: usize,
}

#[derive(Copy, Clone, PartialEq)]
struct State {
    dist: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const EPS: f64 = 1e-12;

impl MinCostFlow {
    pub(crate) fn new(nodes: usize) -> Self {
        MinCostFlow { graph: vec![Vec::new(); nodes] }
    }

    pub(crate) fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: f64) -> EdgeRef {
        let index = self.graph[from].len();
        let rev = self.graph[to].len() + usize::from(from == to);
        self.graph[from].push(Edge { to, rev, cap, cost });
        self.graph[to].push(Edge { to: from, rev: index, cap: 0, cost: -cost });
        EdgeRef { from, index }
    }

    /// Flow currently routed through `edge`.
    pub(crate) fn flow(&self, edge: EdgeRef) -> i64 {
        let e = &self.graph[edge.from][edge.index];
        self.graph[e.to][e.rev].cap
    }

    /// Pushes up to `limit` units from `source` to `sink` along successive
    /// cheapest paths. Returns the amount sent and its total cost.
    pub(crate) fn run(&mut self, source: usize, sink: usize, limit: i64) -> (i64, f64) {
        let n = self.graph.len();
        let mut potential = self.bellman_ford(source);
        let mut sent = 0;
        let mut cost = 0.0;
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
        while sent < limit {
            let mut dist = vec![f64::INFINITY; n];
            prev.iter_mut().for_each(|p| *p = None);
            dist[source] = 0.0;
            let mut heap = BinaryHeap::from([State { dist: 0.0, node: source }]);
            while let Some(State { dist: d, node }) = heap.pop() {
                if d > dist[node] + EPS {
                    continue;
                }
                for (i, e) in self.graph[node].iter().enumerate() {
                    if e.cap <= 0 || !potential[e.to].is_finite() {
                        continue;
                    }
                    let reduced = e.cost + potential[node] - potential[e.to];
                    let nd = d + reduced.max(0.0);
                    if nd + EPS < dist[e.to] {
                        dist[e.to] = nd;
                        prev[e.to] = Some((node, i));
                        heap.push(State { dist: nd, node: e.to });
                    }
                }
            }
            if !dist[sink].is_finite() {
                break;
            }
            for v in 0..n {
                if dist[v].is_finite() {
                    potential[v] += dist[v];
                }
            }
            let mut push = limit - sent;
            let mut v = sink;
            while let Some((u, i)) = prev[v] {
                push = push.min(self.graph[u][i].cap);
                v = u;
            }
            let mut v = sink;
            while let Some((u, i)) = prev[v] {
                let e = &mut self.graph[u][i];
                e.cap -= push;
                cost += push as f64 * e.cost;
                let (to, rev) = (e.to, e.rev);
                self.graph[to][rev].cap += push;
                v = u;
            }
            sent += push;
        }
        (sent, cost)
    }

    fn bellman_ford(&self, source: usize) -> Vec<f64> {
        let n = self.graph.len();
        let mut dist = vec![f64::INFINITY; n];
        dist[source] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if !dist[u].is_finite() {
                    continue;
                }
                for e in &self.graph[u] {
                    if e.cap > 0 && dist[u] + e.cost < dist[e.to] - EPS {
                        dist[e.to] = dist[u] + e.cost;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        dist
    }
}
