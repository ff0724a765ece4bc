//! Kantorovich transport linear program on `{1, ..., K}` with cost `|j - i|`,
//! solved as an integer min-cost flow.
//!
//! Masses are scaled to integers with a common denominator, so the solver is
//! exact on the scaled instance and shares nothing with the CDF formula in
//! [`crate::wasserstein`].

use crate::error::{Error, Result};

/// Common denominator for the integer-scaled masses.
pub const MASS_SCALE: i64 = 1_000_000_000_000;

/// Optimal value and plan `q[j][i]` (mass moved from `j` to `i`).
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub value: f64,
    pub plan: Vec<Vec<f64>>,
}

pub fn lp_transport_oracle(f: &[f64], g: &[f64]) -> Result<TransportPlan> {
    if f.len() != g.len() {
        return Err(Error::Shape(format!("histograms of length {} and {}", f.len(), g.len())));
    }
    let supply = scale_masses(f, MASS_SCALE)?;
    let demand = scale_masses(g, MASS_SCALE)?;
    let k = f.len();
    // nodes: 0 source, 1..=k supply, k+1..=2k demand, 2k+1 sink
    let source = 0;
    let sink = 2 * k + 1;
    let mut net = FlowNetwork::new(2 * k + 2);
    for (j, &s) in supply.iter().enumerate() {
        net.add_edge(source, 1 + j, s, 0);
    }
    let mut arcs = vec![vec![usize::MAX; k]; k];
    for (j, row) in arcs.iter_mut().enumerate() {
        for (i, arc) in row.iter_mut().enumerate() {
            *arc = net.add_edge(1 + j, 1 + k + i, MASS_SCALE, j.abs_diff(i) as i64);
        }
    }
    for (i, &d) in demand.iter().enumerate() {
        net.add_edge(1 + k + i, sink, d, 0);
    }
    let (flow, cost) = net.min_cost_flow(source, sink);
    if flow != MASS_SCALE {
        return Err(Error::Infeasible(format!("transport moved {flow} of {MASS_SCALE} units")));
    }
    let scale = MASS_SCALE as f64;
    let plan = arcs
        .iter()
        .map(|row| row.iter().map(|&e| net.flow(e) as f64 / scale).collect())
        .collect();
    Ok(TransportPlan {
        value: cost as f64 / scale,
        plan,
    })
}

/// Rounds `masses * scale` to integers summing exactly to `scale`
/// (largest-remainder rounding).
fn scale_masses(masses: &[f64], scale: i64) -> Result<Vec<i64>> {
    if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Err(Error::Rationalization(format!("masses must be finite and nonnegative: {masses:?}")));
    }
    let total: f64 = masses.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Rationalization(format!("masses sum to {total}, not 1")));
    }
    let raw: Vec<f64> = masses.iter().map(|m| m / total * scale as f64).collect();
    let mut units: Vec<i64> = raw.iter().map(|r| r.floor() as i64).collect();
    let mut missing = scale - units.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..masses.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let mut idx = 0;
    while missing != 0 {
        let j = order[idx % order.len()];
        if missing > 0 {
            units[j] += 1;
            missing -= 1;
        } else if units[j] > 0 {
            units[j] -= 1;
            missing += 1;
        }
        idx += 1;
    }
    Ok(units)
}

struct Edge {
    to: usize,
    cap: i64,
    cost: i64,
}

/// Successive shortest paths with Dijkstra on reduced costs.
struct FlowNetwork {
    edges: Vec<Edge>,
    adjacency: Vec<Vec<usize>>,
}

impl FlowNetwork {
    fn new(n: usize) -> Self {
        FlowNetwork {
            edges: Vec::new(),
            adjacency: vec![Vec::new(); n],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap, cost });
        self.edges.push(Edge {
            to: from,
            cap: 0,
            cost: -cost,
        });
        self.adjacency[from].push(id);
        self.adjacency[to].push(id + 1);
        id
    }

    /// Flow on a forward edge (the residual capacity of its twin).
    fn flow(&self, id: usize) -> i64 {
        self.edges[id + 1].cap
    }

    fn min_cost_flow(&mut self, source: usize, sink: usize) -> (i64, i64) {
        let n = self.adjacency.len();
        // all initial costs are nonnegative, so zero potentials are feasible
        let mut potential = vec![0i64; n];
        let (mut flow, mut cost) = (0i64, 0i64);
        loop {
            let mut dist = vec![i64::MAX; n];
            let mut parent = vec![usize::MAX; n];
            let mut done = vec![false; n];
            dist[source] = 0;
            for _ in 0..n {
                let Some(u) = (0..n).filter(|&v| !done[v] && dist[v] < i64::MAX).min_by_key(|&v| dist[v]) else {
                    break;
                };
                done[u] = true;
                for &e in &self.adjacency[u] {
                    let edge = &self.edges[e];
                    if edge.cap == 0 {
                        continue;
                    }
                    let nd = dist[u] + edge.cost + potential[u] - potential[edge.to];
                    if nd < dist[edge.to] {
                        dist[edge.to] = nd;
                        parent[edge.to] = e;
                    }
                }
            }
            if dist[sink] == i64::MAX {
                return (flow, cost);
            }
            for v in 0..n {
                if dist[v] < i64::MAX {
                    potential[v] += dist[v];
                }
            }
            let mut push = i64::MAX;
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
                cost += push * self.edges[e].cost;
                v = self.edges[e ^ 1].to;
            }
            flow += push;
        }
    }
}
