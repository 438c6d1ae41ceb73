//! Adaptive discretization and the FTRL initializer.
//!
//! Each finished task contributes the ball around its optimum. The ball
//! endpoints cut the domain into cells, and the initializer is a
//! distribution over those cells (uniform inside each cell) solving
//!
//! ```text
//! argmin_{Σw = 1, w ≥ γ v̂}  KL(w ‖ v̂) − η Σ_s log w(C_s)
//! ```
//!
//! with `v̂` the uniform distribution. Solving on the current cells loses
//! nothing: refining further and aggregating back gives the same masses.

use crate::piecewise::MERGE_TOL;
use crate::simplex::{LogOverlapProblem, Term, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::{Density, Error, Interval, PiecewiseConstant, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CellPartition {
    domain: Interval,
    cuts: Vec<f64>,
}

impl CellPartition {
    pub fn new(domain: Interval) -> Result<Self> {
        if !(domain.width() > MERGE_TOL) {
            return Err(Error::InvalidInterval(domain.lo, domain.hi));
        }
        Ok(CellPartition { domain, cuts: Vec::new() })
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn num_cells(&self) -> usize {
        self.cuts.len() + 1
    }

    fn edge(&self, k: usize) -> f64 {
        if k == 0 {
            self.domain.lo
        } else if k > self.cuts.len() {
            self.domain.hi
        } else {
            self.cuts[k - 1]
        }
    }

    pub fn cell(&self, k: usize) -> Interval {
        Interval { lo: self.edge(k), hi: self.edge(k + 1) }
    }

    pub fn cells(&self) -> Vec<Interval> {
        (0..self.num_cells()).map(|k| self.cell(k)).collect()
    }

    /// Index of the cell containing `x` (clamped to the domain).
    pub fn locate(&self, x: f64) -> usize {
        self.cuts.partition_point(|&c| c <= x)
    }

    /// Adds the endpoints of `ball ∩ domain` as cuts.
    pub fn refine(&self, ball: &Interval) -> Result<Self> {
        let clip = self
            .domain
            .intersect(ball)
            .filter(|c| c.width() > MERGE_TOL)
            .ok_or(Error::DisjointBall(ball.lo, ball.hi))?;
        let mut next = self.clone();
        for x in [clip.lo, clip.hi] {
            next.insert_cut(x);
        }
        Ok(next)
    }

    fn insert_cut(&mut self, x: f64) {
        if x - self.domain.lo < MERGE_TOL || self.domain.hi - x < MERGE_TOL {
            return;
        }
        let pos = self.cuts.partition_point(|&c| c < x);
        let near_left = pos > 0 && x - self.cuts[pos - 1] < MERGE_TOL;
        let near_right = pos < self.cuts.len() && self.cuts[pos] - x < MERGE_TOL;
        if !(near_left || near_right) {
            self.cuts.insert(pos, x);
        }
    }

    /// Cell index range `[start, end)` covering `ball ∩ domain`.
    pub fn cell_range(&self, ball: &Interval) -> Result<(usize, usize)> {
        let clip = self.domain.intersect(ball).ok_or(Error::DisjointBall(ball.lo, ball.hi))?;
        let find_edge = |x: f64| -> Option<usize> {
            (0..=self.num_cells()).find(|&k| (self.edge(k) - x).abs() < MERGE_TOL)
        };
        match (find_edge(clip.lo), find_edge(clip.hi)) {
            (Some(s), Some(e)) if s < e => Ok((s, e)),
            _ => Err(Error::NotRefined(ball.lo, ball.hi)),
        }
    }

    /// 1 for cells inside the ball, 0 otherwise.
    pub fn indicator_vector(&self, ball: &Interval) -> Result<Vec<u8>> {
        let (s, e) = self.cell_range(ball)?;
        Ok((0..self.num_cells()).map(|k| u8::from(k >= s && k < e)).collect())
    }

    /// Cell masses of the uniform distribution.
    pub fn uniform_probs(&self) -> Vec<f64> {
        let vol = self.domain.width();
        self.cells().iter().map(|c| c.width() / vol).collect()
    }

    /// Density that is constant on each cell with the given cell masses.
    pub fn density(&self, probs: &[f64]) -> Result<Density> {
        if probs.len() != self.num_cells() {
            return Err(Error::InvalidArgument(format!(
                "{} masses for {} cells",
                probs.len(),
                self.num_cells()
            )));
        }
        let mut bps = vec![self.domain.lo];
        bps.extend_from_slice(&self.cuts);
        bps.push(self.domain.hi);
        let values = probs
            .iter()
            .enumerate()
            .map(|(k, p)| p.max(0.0) / self.cell(k).width())
            .collect();
        Density::new(PiecewiseConstant::new(self.domain, bps, values)?)
    }

    /// Sums masses given on `self` (a refinement of `coarse`) onto the cells
    /// of `coarse`.
    pub fn aggregate_to(&self, probs: &[f64], coarse: &CellPartition) -> Result<Vec<f64>> {
        let mut out = vec![0.0; coarse.num_cells()];
        for (k, p) in probs.iter().enumerate() {
            let c = self.cell(k);
            let j = coarse.locate(c.midpoint());
            let target = coarse.cell(j);
            if c.lo < target.lo - MERGE_TOL || c.hi > target.hi + MERGE_TOL {
                return Err(Error::NotRefined(target.lo, target.hi));
            }
            out[j] += p;
        }
        Ok(out)
    }
}

/// Clipped optimum balls of the tasks seen so far.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BallHistory {
    pub balls: Vec<Interval>,
}

impl BallHistory {
    pub fn new() -> Self {
        BallHistory::default()
    }

    pub fn push(&mut self, ball: Interval) {
        self.balls.push(ball);
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellDistribution {
    pub partition: CellPartition,
    pub probs: Vec<f64>,
    pub gamma: f64,
    /// Solver iterations spent (zero for the closed-form cases).
    pub iterations: usize,
    pub converged: bool,
}

impl CellDistribution {
    pub fn uniform(partition: CellPartition, gamma: f64) -> Self {
        let probs = partition.uniform_probs();
        CellDistribution { partition, probs, gamma, iterations: 0, converged: true }
    }

    pub fn to_density(&self) -> Result<Density> {
        self.partition.density(&self.probs)
    }

    /// Mass assigned to `ball`, which must be refined into the partition.
    pub fn mass_in(&self, ball: &Interval) -> Result<f64> {
        let (s, e) = self.partition.cell_range(ball)?;
        Ok(self.probs[s..e].iter().sum())
    }
}

fn ftrl_problem(history: &BallHistory, partition: &CellPartition, gamma: f64, eta: f64) -> Result<LogOverlapProblem> {
    let terms = history
        .balls
        .iter()
        .map(|b| {
            let (start, end) = partition.cell_range(b)?;
            Ok(Term { start, end, coef: eta })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LogOverlapProblem::new(partition.uniform_probs(), gamma, 1.0, terms))
}

/// The FTRL objective evaluated at cell masses `probs`.
pub fn ftrl_objective(
    history: &BallHistory,
    partition: &CellPartition,
    gamma: f64,
    eta: f64,
    probs: &[f64],
) -> Result<f64> {
    Ok(ftrl_problem(history, partition, gamma, eta)?.value_w(probs))
}

/// Minimizer of the FTRL objective over the cells of `partition`.
pub fn ftrl_update(history: &BallHistory, partition: &CellPartition, gamma: f64, eta: f64) -> Result<CellDistribution> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    let problem = ftrl_problem(history, partition, gamma, eta)?;
    if history.is_empty() || gamma == 1.0 {
        return Ok(CellDistribution::uniform(partition.clone(), gamma));
    }
    let sol = problem.solve(&problem.vhat, DEFAULT_TOL, DEFAULT_MAX_ITER);
    if !sol.converged {
        log::debug!("ftrl solver stopped after {} iterations without converging", sol.iterations);
    }
    Ok(CellDistribution {
        partition: partition.clone(),
        probs: sol.w,
        gamma,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

/// Parameters from the regret analysis: `γ² = G·B/√T` (capped at 0.5) and
/// `η² = B²γ²/(T·G²)`. Returns `(γ, η, capped)`.
pub fn theory_gamma_eta(b: f64, g: f64, t: usize) -> Result<(f64, f64, bool)> {
    if !(b > 0.0 && g > 0.0 && t > 0) {
        return Err(Error::InvalidArgument("B, G and T must be positive".into()));
    }
    let t = t as f64;
    let raw = (g * b / t.sqrt()).sqrt();
    let capped = raw > 0.5;
    let gamma = raw.min(0.5);
    let eta = (b * b * gamma * gamma / (t * g * g)).sqrt();
    Ok((gamma, eta, capped))
}

/// `sqrt(mean_t (vol(C)/vol(C_t))²)` over clipped balls.
pub fn lipschitz_scale(balls: &[Interval], domain: Interval) -> Result<f64> {
    if balls.is_empty() {
        return Err(Error::InvalidArgument("no balls".into()));
    }
    let vol = domain.width();
    let mut acc = 0.0;
    for b in balls {
        let c = domain.intersect(b).ok_or(Error::DisjointBall(b.lo, b.hi))?;
        acc += (vol / c.width()).powi(2);
    }
    Ok((acc / balls.len() as f64).sqrt())
}

/// Stateful wrapper: partition, history and current iterate.
#[derive(Debug, Clone)]
pub struct MetaInitializer {
    gamma: f64,
    eta: f64,
    partition: CellPartition,
    history: BallHistory,
    current: CellDistribution,
}

impl MetaInitializer {
    pub fn new(domain: Interval, gamma: f64, eta: f64) -> Result<Self> {
        let partition = CellPartition::new(domain)?;
        let current = ftrl_update(&BallHistory::new(), &partition, gamma, eta)?;
        Ok(MetaInitializer { gamma, eta, partition, history: BallHistory::new(), current })
    }

    pub fn current(&self) -> &CellDistribution {
        &self.current
    }

    pub fn history(&self) -> &BallHistory {
        &self.history
    }

    pub fn partition(&self) -> &CellPartition {
        &self.partition
    }

    pub fn density(&self) -> Result<Density> {
        self.current.to_density()
    }

    /// Records the ball of a finished task and recomputes the iterate.
    pub fn observe(&mut self, ball: Interval) -> Result<()> {
        let clip = self
            .partition
            .domain()
            .intersect(&ball)
            .ok_or(Error::DisjointBall(ball.lo, ball.hi))?;
        self.partition = self.partition.refine(&clip)?;
        self.history.push(clip);
        self.current = ftrl_update(&self.history, &self.partition, self.gamma, self.eta)?;
        Ok(())
    }
}
