//! Exponential forecaster over a one-dimensional parameter interval.
//!
//! The weight function is kept implicitly as `init · exp(-λ · U)` where `U`
//! is the cumulative loss, so no density is ever multiplied round by round
//! and nothing underflows.

use rand::Rng;

use crate::metrics::neg_log_overlap;
use crate::piecewise::{exp_neg_weights, WeightedCells};
use crate::{Density, Error, Interval, PiecewiseConstant, Result};

const LOSS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ForecasterState {
    domain: Interval,
    cumulative: PiecewiseConstant,
    init: Density,
    lambda: f64,
    round: usize,
}

impl ForecasterState {
    pub fn new(domain: Interval, init: Density, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {lambda}")));
        }
        if !(init.mass() > 0.0) {
            return Err(Error::InvalidArgument("initialization has zero mass".into()));
        }
        if !init.domain().approx_eq(&domain) {
            return Err(Error::domain_mismatch(domain, init.domain()));
        }
        Ok(ForecasterState {
            domain,
            cumulative: PiecewiseConstant::constant(domain, 0.0)?,
            init,
            lambda,
            round: 0,
        })
    }

    pub fn uniform(domain: Interval, lambda: f64) -> Result<Self> {
        ForecasterState::new(domain, Density::uniform(domain)?, lambda)
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn init(&self) -> &Density {
        &self.init
    }

    pub fn cumulative_loss(&self) -> &PiecewiseConstant {
        &self.cumulative
    }

    /// Unnormalized cell weights of the current sampling distribution.
    pub fn weights(&self) -> Result<WeightedCells> {
        exp_neg_weights(&self.cumulative, self.lambda, &self.init)
    }

    /// Cell probabilities of the current sampling distribution.
    pub fn distribution(&self) -> Result<Vec<(Interval, f64)>> {
        let w = self.weights()?;
        let p = w.probabilities();
        Ok(w.cells.into_iter().zip(p).collect())
    }

    /// The current sampling density, normalized.
    pub fn current_density(&self) -> Result<Density> {
        let w = self.weights()?;
        let total = w.total();
        let mut bps = Vec::with_capacity(w.cells.len() + 1);
        bps.push(self.domain.lo);
        let mut values = Vec::with_capacity(w.cells.len());
        for (c, wk) in w.cells.iter().zip(&w.weights) {
            bps.push(c.hi);
            values.push(wk / total / c.width());
        }
        Density::new(PiecewiseConstant::new(self.domain, bps, values)?.normalize())
    }

    /// Draws one parameter: a cell with probability proportional to its
    /// weight, then a uniform point inside it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let w = self.weights()?;
        sample_cells(&w, rng)
    }

    /// Applies one full-information loss.
    pub fn update(&self, loss: &PiecewiseConstant) -> Result<Self> {
        check_loss(loss)?;
        let mut next = self.clone();
        next.cumulative = self.cumulative.add(loss)?;
        next.round += 1;
        Ok(next)
    }
}

pub(crate) fn sample_cells<R: Rng + ?Sized>(w: &WeightedCells, rng: &mut R) -> Result<f64> {
    let total = w.total();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateWeights(format!("total weight {total}")));
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut pick = None;
    for (k, &wk) in w.weights.iter().enumerate() {
        if wk <= 0.0 {
            continue;
        }
        acc += wk;
        pick = Some(k);
        if target < acc {
            break;
        }
    }
    let cell = w.cells[pick.expect("positive total implies a positive cell")];
    Ok(cell.lo + rng.random::<f64>() * cell.width())
}

pub(crate) fn check_loss(loss: &PiecewiseConstant) -> Result<()> {
    for (cell, &v) in loss.values().iter().enumerate() {
        if !(-LOSS_SLACK..=1.0 + LOSS_SLACK).contains(&v) {
            return Err(Error::LossOutOfRange { value: v, cell });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskTrace {
    pub plays: Vec<f64>,
    pub incurred: Vec<f64>,
    pub opt_value: f64,
    pub opt_rho: f64,
    pub regret: f64,
}

impl TaskTrace {
    pub fn total_incurred(&self) -> f64 {
        self.incurred.iter().sum()
    }
}

/// Runs the forecaster over one task: each parameter is drawn before its
/// loss is revealed.
pub fn run_task<R: Rng + ?Sized>(
    losses: &[PiecewiseConstant],
    init: &Density,
    lambda: f64,
    rng: &mut R,
) -> Result<TaskTrace> {
    let first = losses
        .first()
        .ok_or_else(|| Error::InvalidArgument("a task needs at least one loss".into()))?;
    let mut state = ForecasterState::new(first.domain(), init.clone(), lambda)?;
    let mut plays = Vec::with_capacity(losses.len());
    let mut incurred = Vec::with_capacity(losses.len());
    for loss in losses {
        let rho = state.sample(rng)?;
        plays.push(rho);
        incurred.push(loss.eval(rho));
        state = state.update(loss)?;
    }
    let best = state.cumulative_loss().argmin();
    let regret = incurred.iter().sum::<f64>() - best.value;
    Ok(TaskTrace { plays, incurred, opt_value: best.value, opt_rho: best.representative, regret })
}

/// Leftmost minimizer of the summed losses: `(representative, total)`.
pub fn task_optimum(losses: &[PiecewiseConstant]) -> Result<(f64, f64)> {
    let total = PiecewiseConstant::sum(losses.iter())?;
    let best = total.argmin();
    Ok((best.representative, best.value))
}

/// Ball of radius `m^{-β}` around `center`, clipped to `domain`.
pub fn optimum_ball(center: f64, m: usize, beta: f64, domain: Interval) -> Result<Interval> {
    let r = (m as f64).powf(-beta);
    let ball = Interval::ball(center, r)?;
    domain.intersect(&ball).ok_or(Error::DisjointBall(ball.lo, ball.hi))
}

/// Step size minimizing `mλ + log(1/Z)/λ`: `sqrt(max(log(1/Z), 1e-6) / m)`,
/// where `Z` is the mass fraction `init` assigns to `ball`.
pub fn theory_lambda(init: &Density, ball: &Interval, m: usize) -> f64 {
    let nlo = neg_log_overlap(init, ball).max(1e-6);
    (nlo / m as f64).sqrt()
}
