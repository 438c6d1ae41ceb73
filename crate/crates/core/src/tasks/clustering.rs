//! α-Lloyd seeding on two-dimensional point sets with a Hamming loss.
//!
//! Centers are drawn with probability proportional to `d^α`, where `d` is
//! the distance to the nearest chosen center. All draws come from a fixed
//! vector of uniforms, so for a given vector the chosen centers, and hence
//! the loss, are piecewise constant in `α`.

use itertools::Itertools;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Interval, PiecewiseConstant, Result};

/// Grid points per interval in the breakpoint scan.
pub const SCAN_POINTS: usize = 1025;
/// Bisection stops at this width.
pub const BISECT_TOL: f64 = 1e-9;
pub const MAX_PERM_K: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDataset {
    pub points: Vec<[f64; 2]>,
    pub truth: Vec<usize>,
    pub k: usize,
}

impl ClusterDataset {
    pub fn new(points: Vec<[f64; 2]>, truth: Vec<usize>, k: usize) -> Result<Self> {
        if points.len() != truth.len() {
            return Err(Error::InvalidArgument("one label per point required".into()));
        }
        if k == 0 || points.len() < k {
            return Err(Error::InvalidArgument(format!("need at least k = {k} points")));
        }
        if let Some(l) = truth.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidArgument(format!("label {l} out of range for k = {k}")));
        }
        Ok(ClusterDataset { points, truth, k })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub const POINTS_PER_CLASS: usize = 100;

/// Two classes of 100 points: centers `(0,0)` and `(dσ, 0)`, covariance
/// `diag(σ, 2σ)`.
pub fn gaussian_mixture_gen<R: Rng + ?Sized>(d: f64, sigma: f64, rng: &mut R) -> Result<ClusterDataset> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    if !(2.0..=3.0).contains(&d) {
        return Err(Error::InvalidArgument(format!("separation must lie in [2, 3], got {d}")));
    }
    let nx = Normal::new(0.0, sigma.sqrt()).expect("valid normal");
    let ny = Normal::new(0.0, (2.0 * sigma).sqrt()).expect("valid normal");
    let mut points = Vec::with_capacity(2 * POINTS_PER_CLASS);
    let mut truth = Vec::with_capacity(2 * POINTS_PER_CLASS);
    for (label, cx) in [(0usize, 0.0), (1, d * sigma)] {
        for _ in 0..POINTS_PER_CLASS {
            points.push([cx + nx.sample(rng), ny.sample(rng)]);
            truth.push(label);
        }
    }
    ClusterDataset::new(points, truth, 2)
}

/// Minimum over label permutations of the fraction of mismatched points.
pub fn hamming_loss(pred: &[usize], truth: &[usize], k: usize) -> Result<f64> {
    if k > MAX_PERM_K {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds {MAX_PERM_K}")));
    }
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::InvalidArgument("label vectors must be nonempty and equal length".into()));
    }
    if pred.iter().chain(truth).any(|&l| l >= k) {
        return Err(Error::InvalidArgument(format!("label out of range for k = {k}")));
    }
    let best = (0..k)
        .permutations(k)
        .map(|perm| pred.iter().zip(truth).filter(|(&p, &t)| perm[p] != t).count())
        .min()
        .expect("k ≥ 1 has a permutation");
    Ok(best as f64 / pred.len() as f64)
}

fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Index picked by inverse-CDF sampling from weights `d_i^α` with uniform `u`.
fn pick(min_dist: &[f64], alpha: f64, u: f64) -> Result<usize> {
    let dmax = min_dist.iter().copied().fold(0.0, f64::max);
    if dmax <= 0.0 {
        return Err(Error::DegenerateWeights("all candidate distances are zero".into()));
    }
    let lmax = dmax.ln();
    let weight = |d: f64| if d > 0.0 { (alpha * (d.ln() - lmax)).exp() } else { 0.0 };
    let total: f64 = min_dist.iter().map(|&d| weight(d)).sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &d) in min_dist.iter().enumerate() {
        let w = weight(d);
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if acc > target {
            return Ok(i);
        }
    }
    Ok(last)
}

fn check_uniforms(data: &ClusterDataset, u: &[f64]) -> Result<()> {
    if u.len() != data.k {
        return Err(Error::InvalidArgument(format!("{} uniforms for k = {}", u.len(), data.k)));
    }
    if u.iter().any(|x| !(0.0..1.0).contains(x)) {
        return Err(Error::InvalidArgument("uniforms must lie in [0, 1)".into()));
    }
    Ok(())
}

fn first_center(data: &ClusterDataset, u: &[f64]) -> usize {
    ((u[0] * data.len() as f64) as usize).min(data.len() - 1)
}

fn update_min_dist(data: &ClusterDataset, min_dist: &mut [f64], center: usize) {
    let c = data.points[center];
    for (md, p) in min_dist.iter_mut().zip(&data.points) {
        *md = md.min(dist(p, &c));
    }
}

/// Seeds `k` centers at a fixed `α` with the given uniforms.
pub fn lloyd_seed_centers(data: &ClusterDataset, alpha: f64, u: &[f64]) -> Result<Vec<usize>> {
    check_uniforms(data, u)?;
    let first = first_center(data, u);
    let mut centers = vec![first];
    let mut min_dist = vec![f64::INFINITY; data.len()];
    update_min_dist(data, &mut min_dist, first);
    for &uj in &u[1..] {
        let c = pick(&min_dist, alpha, uj)?;
        centers.push(c);
        update_min_dist(data, &mut min_dist, c);
    }
    Ok(centers)
}

/// Label of each point: rank of its nearest center (earlier center on ties).
pub fn assign_labels(data: &ClusterDataset, centers: &[usize]) -> Vec<usize> {
    data.points
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for (j, &c) in centers.iter().enumerate() {
                let d = dist(p, &data.points[c]);
                if d < bd {
                    bd = d;
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Hamming loss of seeding at a fixed `α`.
pub fn lloyd_seed_loss_at(data: &ClusterDataset, alpha: f64, u: &[f64]) -> Result<f64> {
    let centers = lloyd_seed_centers(data, alpha, u)?;
    hamming_loss(&assign_labels(data, &centers), &data.truth, data.k)
}

/// Hamming loss of seeding as an exact piecewise-constant function of `α`.
pub fn lloyd_seed_loss(data: &ClusterDataset, alpha_domain: Interval, u: &[f64]) -> Result<PiecewiseConstant> {
    check_uniforms(data, u)?;
    if !(alpha_domain.width() > 0.0) {
        return Err(Error::InvalidInterval(alpha_domain.lo, alpha_domain.hi));
    }
    let first = first_center(data, u);
    let mut min_dist = vec![f64::INFINITY; data.len()];
    update_min_dist(data, &mut min_dist, first);
    let mut pieces = Vec::new();
    descend(data, u, 1, vec![first], &min_dist, alpha_domain.lo, alpha_domain.hi, &mut pieces)?;
    let mut edges = vec![alpha_domain.lo];
    let mut values = Vec::with_capacity(pieces.len());
    for (right, v) in pieces {
        edges.push(right);
        values.push(v);
    }
    *edges.last_mut().expect("nonempty") = alpha_domain.hi;
    Ok(PiecewiseConstant::new(alpha_domain, edges, values)?.normalize())
}

/// Splits `[a, b]` by the index picked at step `step` and recurses; pushes
/// `(right end, loss)` for each final piece in left-to-right order.
#[allow(clippy::too_many_arguments)]
fn descend(
    data: &ClusterDataset,
    u: &[f64],
    step: usize,
    centers: Vec<usize>,
    min_dist: &[f64],
    a: f64,
    b: f64,
    out: &mut Vec<(f64, f64)>,
) -> Result<()> {
    if step == data.k {
        let loss = hamming_loss(&assign_labels(data, &centers), &data.truth, data.k)?;
        out.push((b, loss));
        return Ok(());
    }
    let choice = |alpha: f64| pick(min_dist, alpha, u[step]);
    let h = (b - a) / (SCAN_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..SCAN_POINTS)
        .map(|i| if i + 1 == SCAN_POINTS { b } else { a + i as f64 * h })
        .collect();
    let picks = grid.iter().map(|&x| choice(x)).collect::<Result<Vec<_>>>()?;
    let mut cuts = Vec::new();
    for i in 0..SCAN_POINTS - 1 {
        if picks[i] == picks[i + 1] {
            continue;
        }
        let (mut lo, mut hi) = (grid[i], grid[i + 1]);
        while hi - lo > BISECT_TOL {
            let mid = 0.5 * (lo + hi);
            if choice(mid)? == picks[i] {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        cuts.push(hi);
    }
    let mut edges = vec![a];
    edges.extend(cuts);
    edges.push(b);
    for w in edges.windows(2) {
        let (l, r) = (w[0], w[1]);
        if r <= l {
            continue;
        }
        let c = choice(0.5 * (l + r))?;
        let mut next_dist = min_dist.to_vec();
        update_min_dist(data, &mut next_dist, c);
        let mut next_centers = centers.clone();
        next_centers.push(c);
        descend(data, u, step + 1, next_centers, &next_dist, l, r, out)?;
    }
    Ok(())
}
