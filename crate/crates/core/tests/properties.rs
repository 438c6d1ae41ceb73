//! Randomized invariants of the core algebra and learners.

use dispersed_meta::forecaster::{task_optimum, ForecasterState};
use dispersed_meta::meta_init::{ftrl_objective, ftrl_update, BallHistory, CellPartition};
use dispersed_meta::meta_step::{StepSizeState, StepVariant};
use dispersed_meta::metrics::{dispersion_count, neg_log_overlap, task_similarity};
use dispersed_meta::piecewise::exp_neg_masses;
use dispersed_meta::quad::simpson_with_splits;
use dispersed_meta::robust::{dispersed_attack_gen, perturb};
use dispersed_meta::rng::stream;
use dispersed_meta::tasks::{greedy_knapsack, knapsack_critical_rhos, knapsack_loss, Item, KnapsackInstance};
use dispersed_meta::{Density, Interval, PiecewiseConstant};
use proptest::prelude::*;

fn unit() -> Interval {
    Interval::new(0.0, 1.0).unwrap()
}

fn build(mut cuts: Vec<f64>, vals: &[f64]) -> PiecewiseConstant {
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|b, a| *b - *a < 1e-6);
    let n = cuts.len() + 1;
    PiecewiseConstant::from_cuts(unit(), &cuts, vals[..n].to_vec()).unwrap()
}

/// Random step function on [0, 1] with values in `[lo, hi)`.
fn pc_in(lo: f64, hi: f64) -> impl Strategy<Value = PiecewiseConstant> {
    (prop::collection::vec(0.001f64..0.999, 0..8), prop::collection::vec(lo..hi, 9))
        .prop_map(|(cuts, vals)| build(cuts, &vals))
}

fn pc() -> impl Strategy<Value = PiecewiseConstant> {
    pc_in(0.0, 1.0)
}

fn ball() -> impl Strategy<Value = Interval> {
    (0.0f64..1.0, 0.01f64..0.2).prop_map(|(c, r)| unit().intersect(&Interval::ball(c, r).unwrap()).unwrap())
}

/// Every breakpoint of the inputs plus cell midpoints of their union.
fn probe_points(fs: &[&PiecewiseConstant]) -> Vec<f64> {
    let mut bps: Vec<f64> = fs.iter().flat_map(|f| f.breakpoints().iter().copied()).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let mids: Vec<f64> = bps.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    bps.into_iter().chain(mids).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn add_is_commutative_and_associative(f in pc(), g in pc(), h in pc()) {
        let fg = f.add(&g).unwrap();
        let gf = g.add(&f).unwrap();
        let left = fg.add(&h).unwrap();
        let right = f.add(&g.add(&h).unwrap()).unwrap();
        for x in probe_points(&[&f, &g, &h]) {
            prop_assert!((fg.eval(x) - gf.eval(x)).abs() <= 1e-12);
            prop_assert!((left.eval(x) - right.eval(x)).abs() <= 1e-12);
            prop_assert!((left.eval(x) - (f.eval(x) + g.eval(x) + h.eval(x))).abs() <= 1e-12);
        }
    }

    #[test]
    fn normalize_is_idempotent_and_pointwise(f in pc(), xs in prop::collection::vec(0.0f64..=1.0, 1000)) {
        let n = f.normalize();
        prop_assert_eq!(&n.normalize(), &n);
        for x in xs {
            prop_assert_eq!(n.eval(x), f.eval(x));
        }
    }

    #[test]
    fn exp_neg_masses_match_quadrature(f in pc(), base in pc_in(0.05, 3.0), lambda in 0.0f64..20.0) {
        let base = Density::new(base).unwrap();
        let exact: f64 = exp_neg_masses(&f, lambda, &base).unwrap().iter().map(|(_, m)| m).sum();
        let mut splits: Vec<f64> =
            f.breakpoints().iter().chain(base.pc().breakpoints()).copied().filter(|&x| x > 0.0 && x < 1.0).collect();
        splits.sort_by(f64::total_cmp);
        splits.dedup();
        let quad = simpson_with_splits(|x| base.pc().eval(x) * (-lambda * f.eval(x)).exp(), 0.0, 1.0, &splits, 1e-11)
            .unwrap();
        prop_assert!((exact - quad).abs() <= 1e-9 * quad.abs(), "exact {} vs quadrature {}", exact, quad);
    }

    #[test]
    fn overlap_is_scale_invariant(d in pc_in(0.05, 3.0), b in ball(), c in 1e-3f64..1e3) {
        let d = Density::new(d).unwrap();
        let a = neg_log_overlap(&d, &b);
        let s = neg_log_overlap(&d.scaled(c).unwrap(), &b);
        prop_assert!((a - s).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn forecaster_final_distribution_is_order_invariant(
        losses in prop::collection::vec(pc(), 2..7).prop_shuffle(),
        lambda in 0.1f64..5.0,
    ) {
        let mut reversed = losses.clone();
        reversed.reverse();
        let run = |seq: &[PiecewiseConstant]| {
            seq.iter().fold(ForecasterState::uniform(unit(), lambda).unwrap(), |s, l| s.update(l).unwrap())
        };
        let a = run(&losses).current_density().unwrap();
        let b = run(&reversed).current_density().unwrap();
        let refs: Vec<&PiecewiseConstant> = losses.iter().collect();
        for x in probe_points(&refs) {
            prop_assert!((a.pc().eval(x) - b.pc().eval(x)).abs() <= 1e-12 * a.pc().eval(x).max(1.0));
        }
        let (rho, best) = task_optimum(&losses).unwrap();
        let (rho_r, best_r) = task_optimum(&reversed).unwrap();
        prop_assert!((best - best_r).abs() <= 1e-12);
        let total = PiecewiseConstant::sum(losses.iter()).unwrap();
        prop_assert!((total.eval(rho_r) - total.eval(rho)).abs() <= 1e-12);
    }

    #[test]
    fn two_updates_equal_one_summed_update(f in pc_in(0.0, 0.5), g in pc_in(0.0, 0.5), lambda in 0.1f64..5.0) {
        let s = ForecasterState::uniform(unit(), lambda).unwrap();
        let two = s.update(&f).unwrap().update(&g).unwrap().current_density().unwrap();
        let one = s.update(&f.add(&g).unwrap()).unwrap().current_density().unwrap();
        for x in probe_points(&[&f, &g]) {
            prop_assert!((two.pc().eval(x) - one.pc().eval(x)).abs() <= 1e-12 * one.pc().eval(x).max(1.0));
        }
    }

    #[test]
    fn constant_loss_leaves_distribution_unchanged(f in pc(), c in 0.0f64..=1.0, lambda in 0.1f64..5.0) {
        let s = ForecasterState::uniform(unit(), lambda).unwrap().update(&f).unwrap();
        let shifted = s.update(&PiecewiseConstant::constant(unit(), c).unwrap()).unwrap();
        let (a, b) = (s.current_density().unwrap(), shifted.current_density().unwrap());
        for x in probe_points(&[&f]) {
            prop_assert!((a.pc().eval(x) - b.pc().eval(x)).abs() <= 1e-12 * a.pc().eval(x).max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ftrl_respects_floor_and_decreases_objective(
        balls in prop::collection::vec(ball(), 1..7),
        gamma in 0.005f64..0.5,
        eta in 0.005f64..1.0,
    ) {
        let mut partition = CellPartition::new(unit()).unwrap();
        let mut history = BallHistory::new();
        let mut prev = ftrl_update(&history, &partition, gamma, eta).unwrap();
        for b in balls {
            partition = partition.refine(&b).unwrap();
            history.push(b);
            let cur = ftrl_update(&history, &partition, gamma, eta).unwrap();
            let vhat = partition.uniform_probs();
            for (p, v) in cur.probs.iter().zip(&vhat) {
                prop_assert!(p - gamma * v >= -1e-9);
            }
            let prev_density = prev.to_density().unwrap();
            let prev_on_new: Vec<f64> = partition.cells().iter().map(|c| prev_density.mass_in(c)).collect();
            let at = |w: &[f64]| ftrl_objective(&history, &partition, gamma, eta, w).unwrap();
            let here = at(&cur.probs);
            prop_assert!(here <= at(&vhat) + 1e-9);
            prop_assert!(here <= at(&prev_on_new) + 1e-9);
            // gradient of −log⟨1_B, w⟩ is 1/mass(B), bounded through the floor
            for s in &history.balls {
                let mass = cur.mass_in(s).unwrap();
                prop_assert!(1.0 / mass <= 1.0 / (gamma * s.width()) + 1e-6);
            }
            prev = cur;
        }
    }

    #[test]
    fn coarse_solution_aggregates_from_fine(
        balls in prop::collection::vec(ball(), 1..5),
        fresh in ball(),
        gamma in 0.005f64..0.5,
    ) {
        let mut coarse = CellPartition::new(unit()).unwrap();
        let mut history = BallHistory::new();
        for b in balls {
            coarse = coarse.refine(&b).unwrap();
            history.push(b);
        }
        let fine = coarse.refine(&fresh).unwrap();
        let on_coarse = ftrl_update(&history, &coarse, gamma, 0.05).unwrap();
        let on_fine = ftrl_update(&history, &fine, gamma, 0.05).unwrap();
        let agg = fine.aggregate_to(&on_fine.probs, &coarse).unwrap();
        for (a, b) in agg.iter().zip(&on_coarse.probs) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn similarity_is_below_uniform_and_satisfies_kkt(balls in prop::collection::vec(ball(), 1..7)) {
        let ts = task_similarity(&balls, unit()).unwrap();
        let uniform = Density::uniform(unit()).unwrap();
        let worst = balls.iter().map(|b| neg_log_overlap(&uniform, b)).fold(0.0, f64::max);
        prop_assert!(ts.v2 <= worst + 1e-9);
        let masses: Vec<f64> = balls.iter().map(|b| ts.density.mass_in(b)).collect();
        let t = balls.len() as f64;
        for (k, cell) in ts.partition.cells().iter().enumerate() {
            let grad: f64 = balls
                .iter()
                .zip(&masses)
                .filter(|(b, _)| b.overlap(cell) > 0.5 * cell.width())
                .map(|(_, m)| -1.0 / (t * m))
                .sum();
            if ts.probs[k] > 1e-3 {
                prop_assert!((grad + 1.0).abs() <= 1e-6, "cell {} gradient {}", k, grad);
            } else {
                prop_assert!(grad >= -1.0 - 1e-6);
            }
        }
    }

    #[test]
    fn step_size_stays_in_its_interval(
        overlaps in prop::collection::vec(1e-8f64..=1.0, 1..30),
        epsilon in 0.01f64..1.0,
        d in 0.1f64..5.0,
        gamma in 0.001f64..=1.0,
        m in 1usize..5000,
        ewoo in any::<bool>(),
    ) {
        let variant = if ewoo { StepVariant::Ewoo } else { StepVariant::Ftl };
        let mut s = StepSizeState::new(variant, epsilon, d, gamma).unwrap();
        let sm = (m as f64).sqrt();
        let (lo, hi) = (epsilon / sm, s.upper() / sm);
        let within = |l: f64| l >= lo * (1.0 - 1e-12) && l <= hi * (1.0 + 1e-12);
        prop_assert!(within(s.lambda(m).unwrap()));
        for o in overlaps {
            s.observe(o);
            let l = s.lambda(m).unwrap();
            prop_assert!(within(l), "lambda {} outside [{}, {}]", l, lo, hi);
        }
    }

    #[test]
    fn dispersion_count_is_bounded_by_total(fs in prop::collection::vec(pc(), 0..10), eps in 1e-4f64..0.5) {
        let r = dispersion_count(&fs, eps).unwrap();
        prop_assert!(r.max_window_count <= r.total_discontinuities);
        prop_assert!(r.max_window_count <= fs.len());
    }

    #[test]
    fn knapsack_breakpoints_come_from_critical_set(
        items in prop::collection::vec((0.5f64..5.0, 0.1f64..5.0), 1..9),
        cap in 0.0f64..15.0,
    ) {
        let inst = KnapsackInstance::new(cap, items.iter().map(|&(weight, value)| Item { weight, value }).collect())
            .unwrap();
        let domain = Interval::new(0.0, 10.0).unwrap();
        let critical = knapsack_critical_rhos(&inst, domain);
        let loss = knapsack_loss(&inst, domain).unwrap();
        for &b in &loss.breakpoints()[1..loss.num_cells()] {
            prop_assert!(critical.iter().any(|c| (c - b).abs() <= 1e-12), "breakpoint {} not critical", b);
        }
        for &v in loss.values() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let total = inst.total_value();
        for k in 0..50 {
            let rho = 0.1 + 0.197 * k as f64;
            let direct = 1.0 - greedy_knapsack(&inst, rho).1 / total;
            prop_assert!((loss.eval(rho) - direct).abs() <= 1e-12);
        }
    }

    #[test]
    fn attacks_are_narrow_and_perturbed_losses_stay_in_range(
        seed in any::<u64>(),
        m in 2usize..40,
        beta_a in 0.2f64..1.5,
        height in 0.0f64..=1.0,
        base in prop::collection::vec(pc(), 40),
    ) {
        let attacks = dispersed_attack_gen(m, beta_a, unit(), height, &mut stream(seed, &[])).unwrap();
        let delta = (m as f64).powf(-beta_a);
        for a in &attacks {
            prop_assert!(a.support_width() <= 2.0 * delta + 1e-12);
        }
        let rounds = perturb(base[..m].to_vec(), attacks).unwrap();
        for r in &rounds {
            for x in probe_points(&[&r.true_loss, &r.attack.bump]) {
                let p = r.perturbed.eval(x);
                prop_assert!((0.0..=1.0).contains(&p));
                if r.attack.bump.eval(x) == 0.0 {
                    prop_assert_eq!(p, r.true_loss.eval(x));
                }
            }
        }
    }
}
