//! Min-cost max-flow by successive shortest augmenting paths.
//!
//! Dijkstra runs on reduced costs `cost(u,v) + π(u) − π(v)`, which stay
//! nonnegative once the potentials π are seeded with exact shortest-path
//! distances (Bellman-Ford, so negative edge costs are fine as long as the
//! graph has no negative cycle).

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: i64,
    cost: f64,
}

/// Residual network with paired forward/backward edges (`e ^ 1` is the twin).
#[derive(Debug, Clone)]
pub struct MinCostFlow {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowResult {
    pub flow: i64,
    pub cost: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance, then on node id for determinism.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl MinCostFlow {
    pub fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            edges: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Adds `from → to` and returns the forward edge id.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: f64) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap, cost });
        self.edges.push(Edge {
            to: from,
            cap: 0,
            cost: -cost,
        });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    /// Flow currently routed through forward edge `id`.
    pub fn flow_on(&self, id: usize) -> i64 {
        self.edges[id ^ 1].cap
    }

    /// Shortest distances from `source` over residual edges (SPFA).
    fn bellman_ford(&self, source: usize) -> Vec<f64> {
        let n = self.node_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut queued = vec![false; n];
        let mut queue = VecDeque::from([source]);
        dist[source] = 0.0;
        queued[source] = true;
        while let Some(u) = queue.pop_front() {
            queued[u] = false;
            for &e in &self.adj[u] {
                let edge = &self.edges[e];
                if edge.cap > 0 && dist[u] + edge.cost < dist[edge.to] {
                    dist[edge.to] = dist[u] + edge.cost;
                    if !queued[edge.to] {
                        queued[edge.to] = true;
                        queue.push_back(edge.to);
                    }
                }
            }
        }
        dist
    }

    /// Sends up to `limit` units from `source` to `sink` at minimum cost.
    pub fn run(&mut self, source: usize, sink: usize, limit: i64) -> FlowResult {
        let n = self.node_count();
        let mut potential: Vec<f64> = self
            .bellman_ford(source)
            .into_iter()
            .map(|d| if d.is_finite() { d } else { 0.0 })
            .collect();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut flow = 0;
        let mut cost = 0.0;

        while flow < limit {
            dist.fill(f64::INFINITY);
            parent.fill(usize::MAX);
            dist[source] = 0.0;
            let mut heap = BinaryHeap::from([HeapItem {
                dist: 0.0,
                node: source,
            }]);
            while let Some(HeapItem { dist: d, node: u }) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &e in &self.adj[u] {
                    let edge = &self.edges[e];
                    if edge.cap <= 0 {
                        continue;
                    }
                    // Rounding can push a reduced cost a hair below zero.
                    let reduced = (edge.cost + potential[u] - potential[edge.to]).max(0.0);
                    let nd = d + reduced;
                    if nd < dist[edge.to] {
                        dist[edge.to] = nd;
                        parent[edge.to] = e;
                        heap.push(HeapItem {
                            dist: nd,
                            node: edge.to,
                        });
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

            let mut push = limit - flow;
            let mut v = sink;
            while v != source {
                let e = parent[v];
                push = push.min(self.edges[e].cap);
                v = self.edges[e ^ 1].to;
            }
            let mut v = sink;
            while v != source {
                let e = parent[v];
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                cost += push as f64 * self.edges[e].cost;
                v = self.edges[e ^ 1].to;
            }
            flow += push;
        }
        FlowResult { flow, cost }
    }
}

/// Optimal one-to-one assignment of rows to distinct columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `row_to_col[i]` is the column matched to row `i`.
    pub row_to_col: Vec<usize>,
    pub total_cost: f64,
}

/// Assigns each of the `K` rows of `cost` to a distinct column (`N ≥ K`) so
/// that the summed cost is minimal.
///
/// Network: source → row (cap 1, cost 0), row → column (cap 1, cost
/// `cost[i][j]`), column → sink (cap 1, cost 0).
pub fn mcmf_assign(cost: &[Vec<f64>]) -> Result<Matching> {
    let k = cost.len();
    let n = cost.first().map_or(0, Vec::len);
    if cost.iter().any(|row| row.len() != n) {
        return Err(Error::invalid("cost", "rows differ in length"));
    }
    if k == 0 {
        return Ok(Matching {
            row_to_col: Vec::new(),
            total_cost: 0.0,
        });
    }
    if n < k {
        return Err(Error::Infeasible {
            targets: k,
            candidates: n,
        });
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("matching cost"));
    }

    let source = 0;
    let sink = k + n + 1;
    let mut graph = MinCostFlow::new(k + n + 2);
    for i in 0..k {
        graph.add_edge(source, 1 + i, 1, 0.0);
    }
    let mut row_edges = Vec::with_capacity(k);
    for (i, row) in cost.iter().enumerate() {
        let first = graph.add_edge(1 + i, 1 + k, 1, row[0]);
        for (j, &c) in row.iter().enumerate().skip(1) {
            graph.add_edge(1 + i, 1 + k + j, 1, c);
        }
        row_edges.push(first);
    }
    for j in 0..n {
        graph.add_edge(1 + k + j, sink, 1, 0.0);
    }

    let result = graph.run(source, sink, k as i64);
    if result.flow < k as i64 {
        return Err(Error::Infeasible {
            targets: k,
            candidates: n,
        });
    }
    // Row i's edges were added consecutively, two slots per edge.
    let row_to_col: Vec<usize> = row_edges
        .iter()
        .map(|&first| {
            (0..n)
                .find(|&j| graph.flow_on(first + 2 * j) == 1)
                .expect("every row carries one unit")
        })
        .collect();
    let total_cost = row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .sum();
    Ok(Matching {
        row_to_col,
        total_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive minimum over ordered K-subsets of columns.
    pub(crate) fn brute_force(cost: &[Vec<f64>]) -> f64 {
        fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row][j] + go(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        go(cost, 0, &mut vec![false; cost[0].len()])
    }

    #[test]
    fn identity_cost_prefers_diagonal() {
        let cost: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        let m = mcmf_assign(&cost).unwrap();
        assert_eq!(m.row_to_col, vec![0, 1, 2, 3]);
        assert_eq!(m.total_cost, 0.0);
    }

    #[test]
    fn large_diagonal_is_avoided() {
        let cost: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| if i == j { 100.0 } else { 0.0 }).collect())
            .collect();
        let m = mcmf_assign(&cost).unwrap();
        assert_eq!(m.total_cost, 0.0);
        assert!(m.row_to_col.iter().enumerate().all(|(i, &j)| i != j));
    }

    #[test]
    fn single_row_picks_minimum_column() {
        let m = mcmf_assign(&[vec![3.0, -1.0, 2.0, -0.5]]).unwrap();
        assert_eq!(m.row_to_col, vec![1]);
        assert_eq!(m.total_cost, -1.0);
    }

    #[test]
    fn fewer_columns_than_rows_is_infeasible() {
        let err = mcmf_assign(&[vec![1.0], vec![2.0]]).unwrap_err();
        assert!(matches!(err, Error::Infeasible { targets: 2, candidates: 1 }));
    }

    #[test]
    fn rejects_non_finite_costs() {
        assert!(mcmf_assign(&[vec![f64::NAN, 1.0]]).is_err());
    }

    #[test]
    fn row_shift_leaves_assignment_unchanged() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let shifted: Vec<Vec<f64>> = cost
            .iter()
            .enumerate()
            .map(|(i, r)| r.iter().map(|c| c - 10.0 * i as f64).collect())
            .collect();
        assert_eq!(
            mcmf_assign(&cost).unwrap().row_to_col,
            mcmf_assign(&shifted).unwrap().row_to_col
        );
    }

    fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..=6, 0usize..=2).prop_flat_map(|(k, extra)| {
            prop::collection::vec(prop::collection::vec(-5.0f64..5.0, k + extra), k)
        })
    }

    proptest! {
        #[test]
        fn matches_exhaustive_optimum(cost in matrix()) {
            let m = mcmf_assign(&cost).unwrap();
            let mut cols = m.row_to_col.clone();
            cols.sort_unstable();
            cols.dedup();
            prop_assert_eq!(cols.len(), cost.len());
            prop_assert!((m.total_cost - brute_force(&cost)).abs() <= 1e-9);
        }
    }
}
