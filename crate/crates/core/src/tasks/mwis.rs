//! Greedy maximum-weight independent set with the `w / (1 + deg)^ρ` rule.
//!
//! Degrees are taken in the residual graph at every step, so the ranking of
//! two vertices can flip at any `ln(w_v/w_u) / ln((1+d_v)/(1+d_u))` for
//! residual degrees `d_u, d_v`. Those values form a superset of the loss
//! breakpoints.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::knapsack::sort_dedup;
use crate::{Error, Interval, PiecewiseConstant, Result};

/// Cells narrower than this are not subdivided further.
pub const SUBDIVIDE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n {
            return Err(Error::InvalidArgument(format!("{} weights for {n} vertices", weights.len())));
        }
        if let Some(w) = weights.iter().find(|&&w| !(w > 0.0 && w <= 1.0)) {
            return Err(Error::InvalidArgument(format!("vertex weight {w} outside (0, 1]")));
        }
        let mut canon: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b || a >= n || b >= n {
                return Err(Error::InvalidArgument(format!("invalid edge ({a}, {b})")));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(WeightedGraph { n, edges: canon, weights })
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Repeatedly takes the remaining vertex with the largest
/// `w_v / (1 + residual degree)^ρ` (lower index on ties) and deletes it with
/// its neighbours. Returns `(selected, weight)`.
pub fn mwis_greedy(g: &WeightedGraph, rho: f64) -> (Vec<usize>, f64) {
    let adj = g.adjacency();
    let mut alive = vec![true; g.n];
    let mut deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut selected = Vec::new();
    let mut total = 0.0;
    loop {
        let mut best: Option<(usize, f64)> = None;
        for v in (0..g.n).filter(|&v| alive[v]) {
            let s = g.weights[v].ln() - rho * (1.0 + deg[v] as f64).ln();
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((v, s));
            }
        }
        let Some((v, _)) = best else { break };
        selected.push(v);
        total += g.weights[v];
        let mut removed = vec![v];
        removed.extend(adj[v].iter().copied().filter(|&x| alive[x]));
        for &x in &removed {
            alive[x] = false;
        }
        for &x in &removed {
            for &y in &adj[x] {
                if alive[y] {
                    deg[y] -= 1;
                }
            }
        }
    }
    selected.sort_unstable();
    (selected, total)
}

/// Every parameter in the open domain where two vertices could swap rank
/// for some pair of residual degrees.
pub fn mwis_critical_superset(g: &WeightedGraph, domain: Interval) -> Vec<f64> {
    let deg: Vec<usize> = g.adjacency().iter().map(Vec::len).collect();
    let mut out = Vec::new();
    for u in 0..g.n {
        for v in u + 1..g.n {
            let lw = (g.weights[v] / g.weights[u]).ln();
            for du in 0..=deg[u] {
                for dv in 0..=deg[v] {
                    if du == dv {
                        continue;
                    }
                    let rho = lw / ((1.0 + dv as f64) / (1.0 + du as f64)).ln();
                    if rho > domain.lo && rho < domain.hi {
                        out.push(rho);
                    }
                }
            }
        }
    }
    sort_dedup(&mut out);
    out
}

/// `1 − weight(ρ) / Σ w` as a piecewise-constant function.
pub fn mwis_loss(g: &WeightedGraph, domain: Interval) -> Result<PiecewiseConstant> {
    let total = g.total_weight();
    if total <= 0.0 {
        return PiecewiseConstant::constant(domain, 0.0);
    }
    let value = |rho: f64| mwis_greedy(g, rho).1;
    let mut edges = vec![domain.lo];
    edges.extend(mwis_critical_superset(g, domain));
    edges.push(domain.hi);
    let mut out_edges = vec![domain.lo];
    let mut out_vals = Vec::new();
    for w in edges.windows(2) {
        subdivide(&value, w[0], w[1], &mut out_edges, &mut out_vals);
    }
    let loss = out_vals.iter().map(|v| (1.0 - v / total).clamp(0.0, 1.0)).collect();
    Ok(PiecewiseConstant::new(domain, out_edges, loss)?.normalize())
}

fn subdivide(value: &impl Fn(f64) -> f64, a: f64, b: f64, edges: &mut Vec<f64>, vals: &mut Vec<f64>) {
    let probes = [0.25, 0.5, 0.75].map(|t| value(a + t * (b - a)));
    if (probes[0] == probes[1] && probes[1] == probes[2]) || b - a <= SUBDIVIDE_TOL {
        edges.push(b);
        vals.push(probes[1]);
        return;
    }
    let mid = 0.5 * (a + b);
    subdivide(value, a, mid, edges, vals);
    subdivide(value, mid, b, edges, vals);
}

/// Erdős–Rényi `G(n, p)` with the given vertex weights.
pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, weights: Vec<f64>, rng: &mut R) -> Result<WeightedGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("edge probability {p} outside [0, 1]")));
    }
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < p {
                edges.push((a, b));
            }
        }
    }
    WeightedGraph::new(n, edges, weights)
}

/// Weights uniform on `(0, 1]`.
pub fn uniform_weights<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| 1.0 - rng.random::<f64>()).collect()
}

/// Per-instance weights: the task's base weights plus Gaussian noise,
/// clamped into `[1e-3, 1]`.
pub fn perturb_weights<R: Rng + ?Sized>(base: &[f64], sd: f64, rng: &mut R) -> Vec<f64> {
    let noise = Normal::new(0.0, sd.max(0.0)).expect("valid normal");
    base.iter().map(|w| (w + noise.sample(rng)).clamp(1e-3, 1.0)).collect()
}
