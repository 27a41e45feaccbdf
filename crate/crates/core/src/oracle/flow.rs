//! Min-cost flow by successive shortest paths with Dijkstra on reduced costs.
//! Used for discretized corridors too large for the dense tableau.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const CAP_EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
struct Arc {
    to: usize,
    cap: f64,
    cost: f64,
}

#[derive(Clone, Debug)]
pub struct FlowNetwork {
    arcs: Vec<Arc>,
    /// Capacity each arc was created with; the residual lives in `arcs`.
    initial: Vec<f64>,
    adj: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowStatus {
    Optimal,
    Infeasible,
}

#[derive(Clone, Debug)]
pub struct FlowOutcome {
    pub status: FlowStatus,
    pub flow: f64,
    pub cost: f64,
    /// Node potentials: shortest residual distances from the source.
    pub potentials: Vec<f64>,
    pub augmentations: usize,
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        FlowNetwork {
            arcs: Vec::new(),
            initial: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    /// Adds a directed arc and returns its id; the paired reverse arc is `id ^ 1`.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: f64, cost: f64) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap, cost });
        self.arcs.push(Arc {
            to: from,
            cap: 0.0,
            cost: -cost,
        });
        self.initial.push(cap);
        self.initial.push(0.0);
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    /// Flow currently on arc `id`.
    pub fn flow(&self, id: usize) -> f64 {
        self.initial[id] - self.arcs[id].cap
    }

    fn initial_potentials(&self, source: usize) -> Vec<f64> {
        // Bellman-Ford over arcs with capacity, tolerating negative costs.
        let n = self.n_nodes();
        let mut d = vec![f64::INFINITY; n];
        d[source] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if d[u].is_infinite() {
                    continue;
                }
                for &a in &self.adj[u] {
                    let arc = &self.arcs[a];
                    if arc.cap > CAP_EPS && d[u] + arc.cost < d[arc.to] {
                        d[arc.to] = d[u] + arc.cost;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let reach = d
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max);
        d.iter()
            .map(|&v| if v.is_finite() { v } else { reach })
            .collect()
    }

    /// Sends up to `required` units from `source` to `sink` at minimum cost.
    pub fn solve(&mut self, source: usize, sink: usize, required: f64) -> FlowOutcome {
        let n = self.n_nodes();
        let mut pi = self.initial_potentials(source);
        let mut sent = 0.0;
        let mut cost = 0.0;
        let mut augmentations = 0;
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        let mut pred = vec![usize::MAX; n];
        let mut touched: Vec<usize> = Vec::new();
        let tol = CAP_EPS * required.max(1.0);

        while required - sent > tol {
            for &v in &touched {
                dist[v] = f64::INFINITY;
                done[v] = false;
                pred[v] = usize::MAX;
            }
            touched.clear();
            dist[source] = 0.0;
            touched.push(source);
            let mut heap = BinaryHeap::new();
            heap.push(Entry(0.0, source));
            while let Some(Entry(du, u)) = heap.pop() {
                if done[u] || du > dist[u] {
                    continue;
                }
                done[u] = true;
                if u == sink {
                    break;
                }
                for &a in &self.adj[u] {
                    let arc = &self.arcs[a];
                    if arc.cap <= CAP_EPS {
                        continue;
                    }
                    let v = arc.to;
                    let nd = du + (arc.cost + pi[u] - pi[v]).max(0.0);
                    if nd < dist[v] {
                        if dist[v].is_infinite() {
                            touched.push(v);
                        }
                        dist[v] = nd;
                        pred[v] = a;
                        heap.push(Entry(nd, v));
                    }
                }
            }
            if !done[sink] {
                return FlowOutcome {
                    status: FlowStatus::Infeasible,
                    flow: sent,
                    cost,
                    potentials: pi,
                    augmentations,
                };
            }
            let cap_t = dist[sink];
            for v in 0..n {
                pi[v] += if done[v] { dist[v] } else { cap_t };
            }
            let mut push = required - sent;
            let mut v = sink;
            while v != source {
                let a = pred[v];
                push = push.min(self.arcs[a].cap);
                v = self.arcs[a ^ 1].to;
            }
            let mut v = sink;
            while v != source {
                let a = pred[v];
                self.arcs[a].cap -= push;
                self.arcs[a ^ 1].cap += push;
                cost += push * self.arcs[a].cost;
                v = self.arcs[a ^ 1].to;
            }
            sent += push;
            augmentations += 1;
        }
        FlowOutcome {
            status: FlowStatus::Optimal,
            flow: sent,
            cost,
            potentials: pi,
            augmentations,
        }
    }
}
