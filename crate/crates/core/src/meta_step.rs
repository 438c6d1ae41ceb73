//! Step-size learners and the full meta-learning loop.
//!
//! After task `t` the learner sees the overlap `⟨w*_t, w_t⟩`, the mass the
//! deployed initializer put on the ball around the task optimum, and picks
//! the next step size from the accumulated `Σ_s (ε² − log overlap_s)`.

use rand::Rng;

use crate::forecaster::{optimum_ball, run_task, task_optimum, theory_lambda};
use crate::meta_init::{CellDistribution, MetaInitializer};
use crate::metrics::{neg_log_overlap, task_averaged_regret};
use crate::quad::simpson_with_splits;
use crate::{Error, Interval, PiecewiseConstant, Result};

/// Relative tolerance of both EWOO integrals.
pub const EWOO_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepVariant {
    Ftl,
    Ewoo,
}

impl StepVariant {
    /// Default offset `ε` for `tasks` tasks.
    pub fn default_epsilon(self, tasks: usize) -> f64 {
        let t = tasks.max(1) as f64;
        match self {
            StepVariant::Ftl => t.powf(-0.2),
            StepVariant::Ewoo => t.powf(-0.25),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaMode {
    /// Learned across tasks by the step-size learner.
    Meta,
    /// `sqrt(log(1/Z*)/m)` computed from the realized optimum of each task.
    TheoryFixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepSizeState {
    pub epsilon: f64,
    pub d: f64,
    pub gamma: f64,
    pub running_sum: f64,
    pub t: usize,
    pub variant: StepVariant,
}

impl StepSizeState {
    pub fn new(variant: StepVariant, epsilon: f64, d: f64, gamma: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be nonnegative, got {epsilon}")));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidArgument(format!("D must be positive, got {d}")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "step-size learning needs gamma in (0, 1], got {gamma}"
            )));
        }
        Ok(StepSizeState { epsilon, d, gamma, running_sum: 0.0, t: 0, variant })
    }

    /// Right end of the scalar learner's interval, `sqrt(D² + ε² − log γ)`.
    pub fn upper(&self) -> f64 {
        (self.d * self.d + self.epsilon * self.epsilon - self.gamma.ln()).sqrt()
    }

    /// Midpoint of the scalar interval, scaled by `1/√m`.
    pub fn initial_lambda(&self, m: usize) -> f64 {
        (self.epsilon + self.upper()) / (2.0 * (m as f64).sqrt())
    }

    /// Adds one task's overlap.
    pub fn observe(&mut self, overlap: f64) {
        let o = overlap.clamp(f64::MIN_POSITIVE, 1.0);
        self.running_sum += self.epsilon * self.epsilon - o.ln();
        self.t += 1;
    }

    /// `sqrt(running_sum / (t·m))` clamped to the scalar interval over `√m`.
    pub fn ftl_lambda(&self, m: usize) -> Result<f64> {
        if self.t == 0 {
            return Err(Error::InvalidArgument("no tasks observed yet".into()));
        }
        let sm = (m as f64).sqrt();
        let raw = (self.running_sum / (self.t as f64 * m as f64)).sqrt();
        Ok(raw.clamp(self.epsilon / sm, self.upper() / sm))
    }

    /// EWOO mean of the scalar interval over `√m`.
    pub fn ewoo_lambda(&self, m: usize) -> Result<f64> {
        if self.t == 0 {
            return Err(Error::InvalidArgument("no tasks observed yet".into()));
        }
        let alpha = 2.0 / self.d * (self.epsilon * self.epsilon / (self.d * self.d)).min(1.0);
        let x = ewoo_mean(self.epsilon, self.upper(), alpha, self.t as f64, self.running_sum)?;
        Ok(x / (m as f64).sqrt())
    }

    /// Step size for the next task.
    pub fn lambda(&self, m: usize) -> Result<f64> {
        if self.t == 0 {
            return Ok(self.initial_lambda(m));
        }
        match self.variant {
            StepVariant::Ftl => self.ftl_lambda(m),
            StepVariant::Ewoo => self.ewoo_lambda(m),
        }
    }
}

/// `∫ x μ / ∫ μ` over `[lo, hi]` with `μ(x) = exp(−α(t·x + s/x))`.
///
/// The exponent is shifted by its maximum, attained at `sqrt(s/t)` clipped
/// to the interval, which is also used as a split point.
pub fn ewoo_mean(lo: f64, hi: f64, alpha: f64, t: f64, s: f64) -> Result<f64> {
    if !(lo > 0.0) || hi < lo {
        return Err(Error::InvalidInterval(lo, hi));
    }
    if hi - lo <= f64::EPSILON * hi {
        return Ok(lo);
    }
    let peak = if t > 0.0 { (s / t).sqrt().clamp(lo, hi) } else { lo };
    let phi = |x: f64| -alpha * (t * x + s / x);
    let top = phi(peak);
    let mu = |x: f64| (phi(x) - top).exp();
    let num = simpson_with_splits(|x| x * mu(x), lo, hi, &[peak], EWOO_REL_TOL)?;
    let den = simpson_with_splits(mu, lo, hi, &[peak], EWOO_REL_TOL)?;
    Ok((num / den).clamp(lo, hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaConfig {
    /// Rounds per task.
    pub m: usize,
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    /// Offset; `None` uses the variant default for the number of tasks.
    pub epsilon: Option<f64>,
    /// Domain parameter; `None` uses `D² = β log m`, floored at `ε`.
    pub d: Option<f64>,
    pub variant: StepVariant,
    pub lambda_mode: LambdaMode,
}

impl MetaConfig {
    pub fn new(m: usize, beta: f64) -> Self {
        MetaConfig {
            m,
            beta,
            gamma: 0.01,
            eta: 0.01,
            epsilon: None,
            d: None,
            variant: StepVariant::Ftl,
            lambda_mode: LambdaMode::Meta,
        }
    }

    pub fn resolved_epsilon(&self, tasks: usize) -> f64 {
        self.epsilon.unwrap_or_else(|| self.variant.default_epsilon(tasks))
    }

    pub fn resolved_d(&self, tasks: usize) -> f64 {
        self.d
            .unwrap_or_else(|| (self.beta * (self.m as f64).ln()).sqrt().max(self.resolved_epsilon(tasks)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskOutcome {
    pub regret: f64,
    pub lambda: f64,
    /// `−log` of the deployed initializer's mass on the optimum ball.
    pub neg_log_overlap: f64,
    pub opt_rho: f64,
    pub ball: Interval,
}

#[derive(Debug, Clone)]
pub struct MetaResults {
    pub tasks: Vec<TaskOutcome>,
    pub task_averaged_regret: f64,
    pub final_initializer: CellDistribution,
    pub epsilon: f64,
    pub d: f64,
}

impl MetaResults {
    pub fn regrets(&self) -> Vec<f64> {
        self.tasks.iter().map(|t| t.regret).collect()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.tasks.iter().map(|t| t.lambda).collect()
    }
}

/// Runs the forecaster task by task, updating the initializer and step
/// size between tasks.
pub fn meta_run<R: Rng + ?Sized>(
    tasks: &[Vec<PiecewiseConstant>],
    cfg: &MetaConfig,
    rng: &mut R,
) -> Result<MetaResults> {
    let domain = tasks
        .first()
        .and_then(|t| t.first())
        .ok_or_else(|| Error::InvalidArgument("meta_run needs at least one nonempty task".into()))?
        .domain();
    if !(cfg.beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta must be positive, got {}", cfg.beta)));
    }
    let epsilon = cfg.resolved_epsilon(tasks.len());
    let d = cfg.resolved_d(tasks.len());
    let mut init = MetaInitializer::new(domain, cfg.gamma, cfg.eta)?;
    let mut step = match cfg.lambda_mode {
        LambdaMode::Meta => Some(StepSizeState::new(cfg.variant, epsilon, d, cfg.gamma)?),
        LambdaMode::TheoryFixed => None,
    };
    let mut outcomes = Vec::with_capacity(tasks.len());
    for losses in tasks {
        if losses.len() != cfg.m {
            return Err(Error::InvalidArgument(format!(
                "task has {} losses, expected {}",
                losses.len(),
                cfg.m
            )));
        }
        let w = init.density()?;
        let (opt_rho, _) = task_optimum(losses)?;
        let ball = optimum_ball(opt_rho, cfg.m, cfg.beta, domain)?;
        let lambda = match &step {
            Some(s) => s.lambda(cfg.m)?,
            None => theory_lambda(&w, &ball, cfg.m),
        };
        let trace = run_task(losses, &w, lambda, rng)?;
        let nlo = neg_log_overlap(&w, &ball);
        if let Some(s) = step.as_mut() {
            s.observe((-nlo).exp());
        }
        init.observe(ball)?;
        outcomes.push(TaskOutcome { regret: trace.regret, lambda, neg_log_overlap: nlo, opt_rho, ball });
    }
    let regrets: Vec<f64> = outcomes.iter().map(|o| o.regret).collect();
    Ok(MetaResults {
        task_averaged_regret: task_averaged_regret(&regrets)?,
        tasks: outcomes,
        final_initializer: init.current().clone(),
        epsilon,
        d,
    })
}
