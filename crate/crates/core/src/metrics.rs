//! Overlap, task similarity, dispersion counting and regret summaries.

use std::collections::HashMap;

use crate::meta_init::CellPartition;
use crate::simplex::{LogOverlapProblem, Term, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::{Density, Error, Interval, PiecewiseConstant, Result};

/// `−log Z` with `Z` the fraction of the mass of `w` inside `ball`.
/// Returns `+∞` when the ball carries no mass.
pub fn neg_log_overlap(w: &Density, ball: &Interval) -> f64 {
    let inside = w.mass_in(ball);
    if inside <= 0.0 {
        return f64::INFINITY;
    }
    -(inside / w.mass()).ln().min(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSimilarity {
    /// Minimized average negative log-overlap.
    pub v2: f64,
    /// `sqrt(v2)`.
    pub v: f64,
    pub density: Density,
    pub partition: CellPartition,
    pub probs: Vec<f64>,
}

/// Minimizes `−(1/T) Σ_t log ∫_{B_t} w` over probability densities `w`.
///
/// The minimizer is constant on the cells cut out by the ball endpoints, so
/// the problem is solved exactly over those cells.
pub fn task_similarity(balls: &[Interval], domain: Interval) -> Result<TaskSimilarity> {
    if balls.is_empty() {
        return Err(Error::InvalidArgument("task similarity needs at least one ball".into()));
    }
    let mut partition = CellPartition::new(domain)?;
    let mut clipped = Vec::with_capacity(balls.len());
    for b in balls {
        let c = domain.intersect(b).ok_or(Error::DisjointBall(b.lo, b.hi))?;
        partition = partition.refine(&c)?;
        clipped.push(c);
    }
    let coef = 1.0 / balls.len() as f64;
    let terms = clipped
        .iter()
        .map(|b| {
            let (start, end) = partition.cell_range(b)?;
            Ok(Term { start, end, coef })
        })
        .collect::<Result<Vec<_>>>()?;
    let vhat = partition.uniform_probs();
    let problem = LogOverlapProblem::new(vhat.clone(), 0.0, 0.0, terms);
    let sol = problem.solve(&vhat, DEFAULT_TOL, DEFAULT_MAX_ITER);
    let v2 = sol.value.max(0.0);
    let density = partition.density(&sol.w)?;
    Ok(TaskSimilarity { v2, v: v2.sqrt(), density, partition, probs: sol.w })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionReport {
    pub epsilon: f64,
    pub max_window_count: usize,
    pub total_discontinuities: usize,
    pub windows_scanned: usize,
}

/// Largest number of distinct functions with a discontinuity inside any
/// closed window of width `epsilon`.
pub fn dispersion_count(losses: &[PiecewiseConstant], epsilon: f64) -> Result<DispersionReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("window width must be positive, got {epsilon}")));
    }
    let mut events: Vec<(f64, usize)> = losses
        .iter()
        .enumerate()
        .flat_map(|(i, f)| f.discontinuities().into_iter().map(move |x| (x, i)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut counts: HashMap<usize, usize> = HashMap::new();
    let mut distinct = 0;
    let mut best = 0;
    let mut left = 0;
    for right in 0..events.len() {
        let c = counts.entry(events[right].1).or_insert(0);
        if *c == 0 {
            distinct += 1;
        }
        *c += 1;
        while events[right].0 - events[left].0 > epsilon {
            let c = counts.get_mut(&events[left].1).expect("tracked");
            *c -= 1;
            if *c == 0 {
                distinct -= 1;
            }
            left += 1;
        }
        best = best.max(distinct);
    }
    Ok(DispersionReport {
        epsilon,
        max_window_count: best,
        total_discontinuities: events.len(),
        windows_scanned: events.len(),
    })
}

/// Mean of the per-task regrets.
pub fn task_averaged_regret(regrets: &[f64]) -> Result<f64> {
    if regrets.is_empty() {
        return Err(Error::InvalidArgument("no tasks".into()));
    }
    Ok(mean(regrets))
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean (zero for fewer than two samples).
pub fn std_err(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (mx, my) = (mean(&lx), mean(&ly));
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

/// Binary entropy in nats.
pub fn binary_entropy(p: f64) -> f64 {
    let h = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    h(p) + h(1.0 - p)
}
