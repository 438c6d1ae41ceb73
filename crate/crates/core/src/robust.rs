//! Online learning under bounded, dispersed loss perturbations.
//!
//! An attack adds a rectangular bump to the true loss of one round; the
//! learner only sees the perturbed loss `clip(l + a, 0, 1)`. Regret is
//! tracked against both the perturbed and the true sequence.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::forecaster::check_loss;
use crate::{Error, Interval, PiecewiseConstant, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attack {
    pub center: f64,
    pub delta: f64,
    /// Zero outside `[center − delta, center + delta]`. Values lie in
    /// `[−1, 1]`; negative values lower the observed loss.
    pub bump: PiecewiseConstant,
}

impl Attack {
    pub fn new(center: f64, delta: f64, bump: PiecewiseConstant) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::InvalidArgument(format!("attack radius must be nonnegative, got {delta}")));
        }
        let support = Interval::ball(center, delta)?;
        for (cell, v) in bump.cells() {
            if v != 0.0 && support.overlap(&cell) < cell.width() * (1.0 - 1e-9) {
                return Err(Error::InvalidArgument(format!(
                    "bump is nonzero on [{}, {}) outside its ball",
                    cell.lo, cell.hi
                )));
            }
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("bump value {v} outside [-1, 1]")));
            }
        }
        Ok(Attack { center, delta, bump })
    }

    /// The zero attack.
    pub fn none(domain: Interval) -> Result<Self> {
        Ok(Attack { center: domain.midpoint(), delta: 0.0, bump: PiecewiseConstant::constant(domain, 0.0)? })
    }

    /// Width of the set where the bump is nonzero (up to cell resolution).
    pub fn support_width(&self) -> f64 {
        self.bump.cells().filter(|(_, v)| *v != 0.0).map(|(c, _)| c.width()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedRound {
    pub true_loss: PiecewiseConstant,
    pub attack: Attack,
    pub perturbed: PiecewiseConstant,
    /// Whether `l + a` left `[0, 1]` somewhere and had to be clipped.
    pub clipped: bool,
}

impl PerturbedRound {
    pub fn new(true_loss: PiecewiseConstant, attack: Attack) -> Result<Self> {
        check_loss(&true_loss)?;
        let raw = true_loss.add(&attack.bump)?;
        let clipped = raw.min_value() < 0.0 || raw.max_value() > 1.0;
        let perturbed = raw.map(|v| v.clamp(0.0, 1.0));
        Ok(PerturbedRound { true_loss, attack, perturbed, clipped })
    }
}

/// Pairs true losses with attacks.
pub fn perturb(true_losses: Vec<PiecewiseConstant>, attacks: Vec<Attack>) -> Result<Vec<PerturbedRound>> {
    if true_losses.len() != attacks.len() {
        return Err(Error::InvalidArgument("one attack per round required".into()));
    }
    true_losses.into_iter().zip(attacks).map(|(l, a)| PerturbedRound::new(l, a)).collect()
}

/// `m` rectangular bumps of the given height and radius `m^{−β_a}`, centered
/// at i.i.d. uniform points of the domain.
pub fn dispersed_attack_gen<R: Rng + ?Sized>(
    m: usize,
    beta_a: f64,
    domain: Interval,
    height: f64,
    rng: &mut R,
) -> Result<Vec<Attack>> {
    if !(beta_a > 0.0) {
        return Err(Error::InvalidArgument(format!("attack exponent must be positive, got {beta_a}")));
    }
    if !(0.0..=1.0).contains(&height) {
        return Err(Error::InvalidArgument(format!("attack height {height} outside [0, 1]")));
    }
    let delta = (m as f64).powf(-beta_a);
    (0..m)
        .map(|_| {
            let center = domain.lo + rng.random::<f64>() * domain.width();
            let ball = Interval::ball(center, delta)?;
            let bump = PiecewiseConstant::indicator(domain, ball, height, 0.0)?;
            Attack::new(center, delta, bump)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualRegret {
    /// Regret on the true losses.
    pub true_regret: f64,
    /// Regret on the perturbed losses.
    pub perturbed_regret: f64,
    pub true_opt: f64,
    pub perturbed_opt: f64,
    /// `Σ a_i(x̃*)` at the perturbed optimum.
    pub attack_at_perturbed_opt: f64,
    /// `|Σ l_i(x̃*) − Σ l_i(x*)|`.
    pub optimum_gap: f64,
}

impl DualRegret {
    /// Right-hand side of `R ≤ R̃ + Σ a_i(x̃*) + |Σ l_i(x̃*) − Σ l_i(x*)|`.
    pub fn decomposition_bound(&self) -> f64 {
        self.perturbed_regret + self.attack_at_perturbed_opt + self.optimum_gap
    }
}

/// Regret of `plays` against the best fixed parameter on the true and on the
/// perturbed sequence, both computed exactly.
pub fn dual_regret(plays: &[f64], rounds: &[PerturbedRound]) -> Result<DualRegret> {
    if plays.len() != rounds.len() || plays.is_empty() {
        return Err(Error::InvalidArgument("plays and rounds must be nonempty and equal length".into()));
    }
    let true_sum = PiecewiseConstant::sum(rounds.iter().map(|r| &r.true_loss))?;
    let pert_sum = PiecewiseConstant::sum(rounds.iter().map(|r| &r.perturbed))?;
    let t_best = true_sum.argmin();
    let p_best = pert_sum.argmin();
    let incurred_true: f64 = plays.iter().zip(rounds).map(|(&x, r)| r.true_loss.eval(x)).sum();
    let incurred_pert: f64 = plays.iter().zip(rounds).map(|(&x, r)| r.perturbed.eval(x)).sum();
    let x_tilde = p_best.representative;
    Ok(DualRegret {
        true_regret: incurred_true - t_best.value,
        perturbed_regret: incurred_pert - p_best.value,
        true_opt: t_best.representative,
        perturbed_opt: x_tilde,
        attack_at_perturbed_opt: rounds.iter().map(|r| r.attack.bump.eval(x_tilde)).sum(),
        optimum_gap: (true_sum.eval(x_tilde) - t_best.value).abs(),
    })
}

/// Threshold loss: for `b = 0`, zero left of `x` and one from `x` on; for
/// `b = 1` the reverse.
pub fn threshold_loss(domain: Interval, x: f64, b: u8) -> Result<PiecewiseConstant> {
    let (left, right) = if b == 0 { (0.0, 1.0) } else { (1.0, 0.0) };
    if x <= domain.lo {
        return PiecewiseConstant::constant(domain, right);
    }
    if x >= domain.hi {
        return PiecewiseConstant::constant(domain, left);
    }
    PiecewiseConstant::new(domain, vec![domain.lo, x, domain.hi], vec![left, right])
}

/// Below this fraction of `D*` the optimum interval is no longer bisected;
/// further rounds cut at its edge instead.
pub const HALVING_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct HalvingSequence {
    pub losses: Vec<PiecewiseConstant>,
    /// Interval on which every halving round has zero loss.
    pub interval: Interval,
    pub halving_rounds: usize,
}

/// Number of halving rounds for horizon `m`: `(3/D*)·m^{1−β}`, raised if
/// needed so the optimum interval ends no wider than `m^{−β}`.
pub fn halving_round_count(m: usize, beta: f64, d_star: f64) -> usize {
    let mf = m as f64;
    let by_rate = (3.0 / d_star * mf.powf(1.0 - beta)).ceil();
    let by_width = (d_star * mf.powf(beta) / 3.0).log2().ceil().max(0.0);
    (by_rate.max(by_width) as usize).min(m)
}

/// Threshold losses whose zero side keeps shrinking around a random point
/// of `[a + 2D*/3, a + D*]`, padded with filler pairs cutting the middle
/// third `[a + D*/3, a + 2D*/3]` so that each pair sums to one everywhere.
pub fn halving_losses<R: Rng + ?Sized>(
    m: usize,
    beta: f64,
    d_star: f64,
    a: f64,
    domain: Interval,
    rng: &mut R,
) -> Result<HalvingSequence> {
    if !(beta > 0.0 && d_star > 0.0) {
        return Err(Error::InvalidArgument("beta and D* must be positive".into()));
    }
    if !((m as f64) > (3.0 / d_star).powf(1.0 / beta)) {
        return Err(Error::InvalidArgument(format!(
            "horizon {m} too short for the halving construction with beta = {beta}, D* = {d_star}"
        )));
    }
    if a < domain.lo || a + d_star > domain.hi {
        return Err(Error::InvalidArgument("[a, a + D*] must lie inside the domain".into()));
    }
    let n_h = halving_round_count(m, beta, d_star);
    halving_core(m, n_h, d_star, a, domain, rng)
}

fn halving_core<R: Rng + ?Sized>(
    m: usize,
    n_h: usize,
    d_star: f64,
    a: f64,
    domain: Interval,
    rng: &mut R,
) -> Result<HalvingSequence> {
    let third = d_star / 3.0;
    let mut losses = Vec::with_capacity(m);
    let n_fill = m - n_h;
    for _ in 0..n_fill / 2 {
        let x = a + third + rng.random::<f64>() * third;
        let first: u8 = rng.random_range(0..2);
        losses.push(threshold_loss(domain, x, first)?);
        losses.push(threshold_loss(domain, x, 1 - first)?);
    }
    if n_fill % 2 == 1 {
        // zero on the right, where the halving interval lives
        let x = a + third + rng.random::<f64>() * third;
        losses.push(threshold_loss(domain, x, 1)?);
    }
    let mut interval = Interval::new(a + 2.0 * third, a + d_star)?;
    for _ in 0..n_h {
        let (loss, next) = halve(domain, interval, d_star, rng)?;
        losses.push(loss);
        interval = next;
    }
    Ok(HalvingSequence { losses, interval, halving_rounds: n_h })
}

/// One halving step: a threshold at the midpoint of `interval` (or at an
/// edge once the interval is below the precision floor) with a random side.
/// Returns the loss and the part of `interval` on its zero side.
fn halve<R: Rng + ?Sized>(
    domain: Interval,
    interval: Interval,
    d_star: f64,
    rng: &mut R,
) -> Result<(PiecewiseConstant, Interval)> {
    let b: u8 = rng.random_range(0..2);
    if interval.width() > HALVING_FLOOR * d_star {
        let x = interval.midpoint();
        let next = if b == 0 { Interval::new(interval.lo, x)? } else { Interval::new(x, interval.hi)? };
        return Ok((threshold_loss(domain, x, b)?, next));
    }
    // b = 0 cuts just right of the interval, b = 1 at its left edge
    let x = if b == 0 { interval.hi } else { interval.lo };
    Ok((threshold_loss(domain, x, b)?, interval))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustLbSequence {
    pub rounds: Vec<PerturbedRound>,
    /// Interval on which the attacks zero the perturbed loss.
    pub attacked_interval: Interval,
    pub halving_rounds: usize,
    pub attack_rounds: usize,
}

impl RobustLbSequence {
    pub fn true_losses(&self) -> Vec<PiecewiseConstant> {
        self.rounds.iter().map(|r| r.true_loss.clone()).collect()
    }

    pub fn perturbed_losses(&self) -> Vec<PiecewiseConstant> {
        self.rounds.iter().map(|r| r.perturbed.clone()).collect()
    }
}

/// Halving on `[0, 1]` until the optimum interval `I` is at most `m^{−β}`
/// wide, then `m^{1−β_a}` further halving rounds inside `I` whose attacks
/// cancel the true loss on `I`. When `β ≤ β_a` the whole horizon is plain
/// halving with zero attacks.
pub fn robust_lb_sequence<R: Rng + ?Sized>(m: usize, beta: f64, beta_a: f64, rng: &mut R) -> Result<RobustLbSequence> {
    if !(beta > 0.0 && beta_a > 0.0) {
        return Err(Error::InvalidArgument("exponents must be positive".into()));
    }
    let domain = Interval::new(0.0, 1.0)?;
    let d_star = 1.0;
    let mf = m as f64;
    let n_h = halving_round_count(m, beta, d_star);
    let n_attack = if beta > beta_a { (mf.powf(1.0 - beta_a).ceil() as usize).min(m - n_h) } else { 0 };
    if !(mf > 3f64.powf(1.0 / beta)) {
        return Err(Error::InvalidArgument(format!("horizon {m} too short for beta = {beta}")));
    }
    let base = halving_core(m - n_attack, n_h, d_star, 0.0, domain, rng)?;
    let attacked = base.interval;
    let mut true_losses = base.losses;
    let mut attacks: Vec<Attack> = (0..true_losses.len()).map(|_| Attack::none(domain)).collect::<Result<_>>()?;
    let delta = mf.powf(-beta);
    let mut inner = attacked;
    for _ in 0..n_attack {
        let (loss, next) = halve(domain, inner, d_star, rng)?;
        inner = next;
        let bump = loss.zip_with(&PiecewiseConstant::indicator(domain, attacked, 1.0, 0.0)?, |l, on| -l * on)?;
        attacks.push(Attack::new(attacked.midpoint(), delta.max(attacked.width() / 2.0), bump)?);
        true_losses.push(loss);
    }
    Ok(RobustLbSequence {
        rounds: perturb(true_losses, attacks)?,
        attacked_interval: attacked,
        halving_rounds: n_h,
        attack_rounds: n_attack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn threshold_example() {
        let f = threshold_loss(unit(), 0.5, 0).unwrap();
        assert_eq!(f.eval(0.25), 0.0);
        assert_eq!(f.eval(0.75), 1.0);
        let g = threshold_loss(unit(), 0.5, 1).unwrap();
        assert_eq!(g.eval(0.25), 1.0);
        assert_eq!(g.eval(0.75), 0.0);
    }

    #[test]
    fn attack_radius_and_zero_height() {
        let mut rng = stream(3, &[]);
        let atk = dispersed_attack_gen(100, 1.0, unit(), 0.5, &mut rng).unwrap();
        assert!(atk.iter().all(|a| (a.delta - 0.01).abs() < 1e-15));
        assert!(atk.iter().all(|a| a.support_width() <= 0.02 + 1e-12));
        let zero = dispersed_attack_gen(10, 1.0, unit(), 0.0, &mut rng).unwrap();
        let l = threshold_loss(unit(), 0.3, 0).unwrap();
        for a in zero {
            let r = PerturbedRound::new(l.clone(), a).unwrap();
            assert_eq!(r.perturbed, l);
        }
    }

    #[test]
    fn halving_interval_shrinks() {
        let mut rng = stream(4, &[]);
        let d = Interval::new(0.0, 10.0).unwrap();
        let seq = halving_losses(256, 0.5, 10.0, 0.0, d, &mut rng).unwrap();
        assert_eq!(seq.losses.len(), 256);
        let want = 10.0 / 3.0 * 0.5f64.powi(seq.halving_rounds as i32);
        assert!((seq.interval.width() - want).abs() < 1e-12);
        let total = PiecewiseConstant::sum(seq.losses.iter()).unwrap();
        let best = total.argmin();
        assert!((total.eval(seq.interval.midpoint()) - best.value).abs() < 1e-9);
        assert!(halving_losses(2, 0.5, 1.0, 0.0, unit(), &mut rng).is_err());
    }

    #[test]
    fn zero_attacks_give_equal_regrets() {
        let mut rng = stream(5, &[]);
        let seq = halving_losses(64, 0.5, 1.0, 0.0, unit(), &mut rng).unwrap();
        let rounds: Vec<_> = seq
            .losses
            .into_iter()
            .map(|l| PerturbedRound::new(l, Attack::none(unit()).unwrap()).unwrap())
            .collect();
        let plays: Vec<f64> = (0..rounds.len()).map(|i| (i as f64 * 0.37).fract()).collect();
        let d = dual_regret(&plays, &rounds).unwrap();
        assert_eq!(d.true_regret, d.perturbed_regret);
    }

    #[test]
    fn lb_attacks_live_inside_interval() {
        let mut rng = stream(6, &[]);
        let seq = robust_lb_sequence(1024, 1.0, 0.5, &mut rng).unwrap();
        assert_eq!(seq.rounds.len(), 1024);
        assert_eq!(seq.attack_rounds, 32);
        assert!(seq.attacked_interval.width() <= 1.0 / 1024.0);
        for r in &seq.rounds {
            for (c, v) in r.attack.bump.cells() {
                if v != 0.0 {
                    assert!(seq.attacked_interval.overlap(&c) >= c.width() * (1.0 - 1e-9));
                }
            }
        }
    }
}
