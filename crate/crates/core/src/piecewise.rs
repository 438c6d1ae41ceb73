//! Piecewise-constant functions on a closed interval.
//!
//! A [`PiecewiseConstant`] stores strictly increasing breakpoints
//! `b_0 = lo < b_1 < ... < b_n = hi` and one value per cell. Cells are
//! closed-open, `[b_k, b_{k+1})`, except the last one which also contains
//! `hi`, so the value at an interior breakpoint belongs to the cell on its
//! right.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Breakpoints closer than this are merged by [`PiecewiseConstant::normalize`].
pub const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::InvalidInterval(lo, hi));
        }
        Ok(Interval { lo, hi })
    }

    /// Closed ball `[center - radius, center + radius]`.
    pub fn ball(center: f64, radius: f64) -> Result<Self> {
        Interval::new(center - radius, center + radius)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Length of the overlap with `other` (zero when disjoint).
    pub fn overlap(&self, other: &Interval) -> f64 {
        (self.hi.min(other.hi) - self.lo.max(other.lo)).max(0.0)
    }

    /// Intersection, or `None` when the overlap has zero width.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (hi > lo).then_some(Interval { lo, hi })
    }

    pub fn approx_eq(&self, other: &Interval) -> bool {
        (self.lo - other.lo).abs() <= MERGE_TOL && (self.hi - other.hi).abs() <= MERGE_TOL
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = Error;
    fn try_from(v: [f64; 2]) -> Result<Self> {
        Interval::new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

/// Result of [`PiecewiseConstant::argmin`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArgMin {
    pub cell: Interval,
    pub value: f64,
    /// Midpoint of `cell`.
    pub representative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPiecewise")]
pub struct PiecewiseConstant {
    domain: Interval,
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPiecewise {
    domain: Interval,
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawPiecewise> for PiecewiseConstant {
    type Error = Error;
    fn try_from(raw: RawPiecewise) -> Result<Self> {
        PiecewiseConstant::new(raw.domain, raw.breakpoints, raw.values)
    }
}

impl PiecewiseConstant {
    pub fn new(domain: Interval, breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if domain.width() <= 0.0 {
            return Err(Error::InvalidPiecewise("domain has zero width".into()));
        }
        if breakpoints.len() < 2 || values.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidPiecewise(format!(
                "{} breakpoints for {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        if breakpoints[0] != domain.lo || breakpoints[breakpoints.len() - 1] != domain.hi {
            return Err(Error::InvalidPiecewise(
                "breakpoints must start at domain.lo and end at domain.hi".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidPiecewise("breakpoints not strictly increasing".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidPiecewise(format!("non-finite value {v}")));
        }
        Ok(PiecewiseConstant { domain, breakpoints, values })
    }

    pub fn constant(domain: Interval, value: f64) -> Result<Self> {
        PiecewiseConstant::new(domain, vec![domain.lo, domain.hi], vec![value])
    }

    /// Builds a function from interior cut points. Cuts outside the open
    /// domain are dropped; `values` must have one entry per resulting cell.
    pub fn from_cuts(domain: Interval, cuts: &[f64], values: Vec<f64>) -> Result<Self> {
        let mut bps = Vec::with_capacity(cuts.len() + 2);
        bps.push(domain.lo);
        bps.extend(cuts.iter().copied().filter(|&c| c > domain.lo && c < domain.hi));
        bps.push(domain.hi);
        PiecewiseConstant::new(domain, bps, values)
    }

    /// `inside` on `[interval.lo, interval.hi)` (closed at `hi` when it is the
    /// domain end), `outside` elsewhere.
    pub fn indicator(domain: Interval, interval: Interval, inside: f64, outside: f64) -> Result<Self> {
        let Some(clip) = domain.intersect(&interval) else {
            return PiecewiseConstant::constant(domain, outside);
        };
        let mut bps = vec![domain.lo];
        let mut vals = Vec::new();
        if clip.lo > domain.lo {
            vals.push(outside);
            bps.push(clip.lo);
        }
        vals.push(inside);
        if clip.hi < domain.hi {
            bps.push(clip.hi);
            vals.push(outside);
        }
        bps.push(domain.hi);
        PiecewiseConstant::new(domain, bps, vals)
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    pub fn cell(&self, k: usize) -> Interval {
        Interval { lo: self.breakpoints[k], hi: self.breakpoints[k + 1] }
    }

    pub fn cells(&self) -> impl Iterator<Item = (Interval, f64)> + '_ {
        (0..self.num_cells()).map(move |k| (self.cell(k), self.values[k]))
    }

    /// Index of the cell containing `x`; points outside the domain are clamped.
    pub fn locate(&self, x: f64) -> usize {
        let n = self.num_cells();
        // first breakpoint strictly greater than x, minus one
        let idx = self.breakpoints.partition_point(|&b| b <= x);
        idx.saturating_sub(1).min(n - 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.values[self.locate(x)]
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `∫ f` over the domain.
    pub fn integral(&self) -> f64 {
        self.cells().map(|(c, v)| v * c.width()).sum()
    }

    /// `∫ f` over `interval ∩ domain`.
    pub fn integral_over(&self, interval: &Interval) -> f64 {
        self.cells().map(|(c, v)| v * c.overlap(interval)).sum()
    }

    /// Merges breakpoints closer than [`MERGE_TOL`] and adjacent cells with
    /// equal values. A sliver cell takes the value of the widest original
    /// cell inside its merged replacement.
    pub fn normalize(&self) -> Self {
        let bps = &self.breakpoints;
        let hi = self.domain.hi;
        let mut kept = vec![bps[0]];
        for &b in &bps[1..bps.len() - 1] {
            if b - kept[kept.len() - 1] >= MERGE_TOL && hi - b >= MERGE_TOL {
                kept.push(b);
            }
        }
        kept.push(hi);
        let mut out_b = vec![kept[0]];
        let mut out_v: Vec<f64> = Vec::with_capacity(kept.len());
        let mut k = 0;
        for w in kept.windows(2) {
            let (mut best, mut best_w) = (self.values[k], -1.0);
            while k < self.num_cells() && bps[k + 1] <= w[1] {
                let width = bps[k + 1] - bps[k];
                if width > best_w {
                    best = self.values[k];
                    best_w = width;
                }
                k += 1;
            }
            if out_v.last() == Some(&best) {
                *out_b.last_mut().unwrap() = w[1];
            } else {
                out_v.push(best);
                out_b.push(w[1]);
            }
        }
        PiecewiseConstant { domain: self.domain, breakpoints: out_b, values: out_v }
    }

    /// Applies `op` cellwise on the common refinement of `self` and `other`.
    /// The result is normalized.
    pub fn zip_with(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_domain(other)?;
        let (bps, a_idx, b_idx) = merge_partitions(&self.breakpoints, &other.breakpoints);
        let values = a_idx
            .iter()
            .zip(&b_idx)
            .map(|(&i, &j)| op(self.values[i], other.values[j]))
            .collect();
        Ok(PiecewiseConstant { domain: self.domain, breakpoints: bps, values }.normalize())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn map(&self, op: impl Fn(f64) -> f64) -> Self {
        PiecewiseConstant {
            domain: self.domain,
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|&v| op(v)).collect(),
        }
        .normalize()
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Sum of a nonempty sequence on a shared domain.
    pub fn sum<'a>(mut fs: impl Iterator<Item = &'a PiecewiseConstant>) -> Result<Self> {
        let first = fs
            .next()
            .ok_or_else(|| Error::InvalidArgument("sum of an empty sequence".into()))?;
        fs.try_fold(first.clone(), |acc, f| acc.add(f))
    }

    /// Leftmost cell attaining the minimum value.
    pub fn argmin(&self) -> ArgMin {
        let mut best = 0;
        for k in 1..self.num_cells() {
            if self.values[k] < self.values[best] {
                best = k;
            }
        }
        let cell = self.cell(best);
        ArgMin { cell, value: self.values[best], representative: cell.midpoint() }
    }

    /// Interior breakpoints at which the value actually changes.
    pub fn discontinuities(&self) -> Vec<f64> {
        let norm = self.normalize();
        norm.breakpoints[1..norm.breakpoints.len() - 1].to_vec()
    }

    pub(crate) fn check_domain(&self, other: &Self) -> Result<()> {
        if self.domain.approx_eq(&other.domain) {
            Ok(())
        } else {
            Err(Error::domain_mismatch(self.domain, other.domain))
        }
    }
}

/// Union of two breakpoint lists sharing endpoints, with the source cell
/// index of each merged cell.
fn merge_partitions(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>, Vec<usize>) {
    let mut bps = vec![a[0]];
    let (mut i, mut j) = (1, 1);
    let mut ai = Vec::new();
    let mut bi = Vec::new();
    while i < a.len() && j < b.len() {
        let next = a[i].min(b[j]);
        ai.push(i - 1);
        bi.push(j - 1);
        bps.push(next);
        if (a[i] - next).abs() <= MERGE_TOL {
            i += 1;
        }
        if (b[j] - next).abs() <= MERGE_TOL {
            j += 1;
        }
    }
    *bps.last_mut().unwrap() = a[a.len() - 1];
    (bps, ai, bi)
}

/// A nonnegative piecewise-constant function with its total mass cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PiecewiseConstant", into = "PiecewiseConstant")]
pub struct Density {
    pc: PiecewiseConstant,
    mass: f64,
}

impl TryFrom<PiecewiseConstant> for Density {
    type Error = Error;
    fn try_from(pc: PiecewiseConstant) -> Result<Self> {
        Density::new(pc)
    }
}

impl From<Density> for PiecewiseConstant {
    fn from(d: Density) -> Self {
        d.pc
    }
}

impl Density {
    pub fn new(pc: PiecewiseConstant) -> Result<Self> {
        if let Some(v) = pc.values().iter().find(|&&v| v < 0.0) {
            return Err(Error::InvalidPiecewise(format!("negative density value {v}")));
        }
        let mass = pc.integral();
        Ok(Density { pc, mass })
    }

    pub fn uniform(domain: Interval) -> Result<Self> {
        Density::new(PiecewiseConstant::constant(domain, 1.0 / domain.width())?)
    }

    /// Density with `probs[k]` mass spread uniformly over `cells[k]`.
    /// Cells must tile their hull in order.
    pub fn from_cell_masses(domain: Interval, cuts: &[f64], probs: &[f64]) -> Result<Self> {
        let mut bps = vec![domain.lo];
        bps.extend_from_slice(cuts);
        bps.push(domain.hi);
        if bps.len() != probs.len() + 1 {
            return Err(Error::InvalidArgument("one mass per cell required".into()));
        }
        let values = probs
            .iter()
            .zip(bps.windows(2))
            .map(|(p, w)| p / (w[1] - w[0]))
            .collect();
        Density::new(PiecewiseConstant::new(domain, bps, values)?)
    }

    pub fn pc(&self) -> &PiecewiseConstant {
        &self.pc
    }

    pub fn domain(&self) -> Interval {
        self.pc.domain()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn mass_in(&self, interval: &Interval) -> f64 {
        self.pc.integral_over(interval)
    }

    /// Rescaled to unit mass.
    pub fn normalized(&self) -> Result<Self> {
        if !(self.mass > 0.0) {
            return Err(Error::InvalidArgument("density has zero mass".into()));
        }
        let pc = self.pc.scale(1.0 / self.mass);
        let mass = pc.integral();
        Ok(Density { pc, mass })
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Density::new(self.pc.scale(c))
    }
}

/// Cell weights of `base · exp(-λ F)` on the common refinement of `F` and
/// `base`, stored relative to the smallest exponent for stability: the true
/// weight of cell `k` is `weights[k] * exp(-shift)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCells {
    pub cells: Vec<Interval>,
    pub weights: Vec<f64>,
    pub shift: f64,
}

impl WeightedCells {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Cell probabilities (weights normalized to one).
    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total();
        self.weights.iter().map(|w| w / total).collect()
    }

    pub fn masses(&self) -> Vec<(Interval, f64)> {
        let scale = (-self.shift).exp();
        self.cells.iter().zip(&self.weights).map(|(&c, &w)| (c, w * scale)).collect()
    }
}

/// Shift-stabilised form of [`exp_neg_masses`].
pub fn exp_neg_weights(f: &PiecewiseConstant, lambda: f64, base: &Density) -> Result<WeightedCells> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be nonnegative, got {lambda}")));
    }
    f.check_domain(base.pc())?;
    let (bps, fi, bi) = merge_partitions(f.breakpoints(), base.pc().breakpoints());
    let fmin = fi
        .iter()
        .zip(&bi)
        .filter(|(_, &j)| base.pc().values()[j] > 0.0)
        .map(|(&i, _)| f.values()[i])
        .fold(f64::INFINITY, f64::min);
    let fmin = if fmin.is_finite() { fmin } else { 0.0 };
    let mut cells = Vec::with_capacity(fi.len());
    let mut weights = Vec::with_capacity(fi.len());
    for (k, (&i, &j)) in fi.iter().zip(&bi).enumerate() {
        let cell = Interval { lo: bps[k], hi: bps[k + 1] };
        let b = base.pc().values()[j];
        let w = if b > 0.0 { b * cell.width() * (-lambda * (f.values()[i] - fmin)).exp() } else { 0.0 };
        cells.push(cell);
        weights.push(w);
    }
    Ok(WeightedCells { cells, weights, shift: lambda * fmin })
}

/// Exact cell masses of `base · exp(-λ F)`.
pub fn exp_neg_masses(f: &PiecewiseConstant, lambda: f64, base: &Density) -> Result<Vec<(Interval, f64)>> {
    Ok(exp_neg_weights(f, lambda, base)?.masses())
}
