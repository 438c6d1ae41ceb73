//! Generators and learners checked against direct re-evaluation.

use dispersed_meta::forecaster::{optimum_ball, run_task, task_optimum, theory_lambda};
use dispersed_meta::meta_init::MetaInitializer;
use dispersed_meta::meta_step::{meta_run, LambdaMode, MetaConfig};
use dispersed_meta::metrics::{dispersion_count, mean, neg_log_overlap};
use dispersed_meta::robust::{
    dispersed_attack_gen, dual_regret, halving_losses, perturb, robust_lb_sequence, threshold_loss,
};
use dispersed_meta::rng::{stream, Rng};
use dispersed_meta::tasks::mwis::{erdos_renyi, uniform_weights};
use dispersed_meta::tasks::{
    gaussian_mixture_gen, greedy_knapsack, hamming_loss, knapsack_gen, knapsack_loss, lloyd_seed_centers,
    lloyd_seed_loss, lloyd_seed_loss_at, mwis_greedy, mwis_loss, ClusterDataset,
};
use dispersed_meta::{Density, Interval, PiecewiseConstant};
use rand::Rng as _;

fn unit() -> Interval {
    Interval::new(0.0, 1.0).unwrap()
}

fn ten() -> Interval {
    Interval::new(0.0, 10.0).unwrap()
}

fn near_breakpoint(f: &PiecewiseConstant, x: f64) -> bool {
    f.breakpoints().iter().any(|b| (b - x).abs() <= 1e-9)
}

/// Checks `pc` against `direct` on a 10^4-point grid, skipping points
/// within 1e-9 of a breakpoint.
fn dense_grid_agrees(pc: &PiecewiseConstant, direct: impl Fn(f64) -> f64) {
    let d = pc.domain();
    for i in 0..10_000 {
        let x = d.lo + d.width() * (i as f64 + 0.5) / 10_000.0;
        if near_breakpoint(pc, x) {
            continue;
        }
        let (a, b) = (pc.eval(x), direct(x));
        assert!((a - b).abs() <= 1e-12, "at {x}: pc {a} vs direct {b}");
    }
}

#[test]
fn knapsack_loss_matches_greedy() {
    let mut rng = stream(11, &[]);
    for shift in [0.0, 1.0, 2.0] {
        let inst = knapsack_gen(shift, &mut rng).unwrap();
        let loss = knapsack_loss(&inst, ten()).unwrap();
        let total = inst.total_value();
        let direct = |rho: f64| 1.0 - greedy_knapsack(&inst, rho).1 / total;
        for _ in 0..100 {
            let rho = rng.random::<f64>() * 10.0;
            assert!((loss.eval(rho) - direct(rho)).abs() <= 1e-12);
        }
        dense_grid_agrees(&loss, direct);
    }
}

#[test]
fn knapsack_generator_statistics() {
    let mut rng = stream(12, &[]);
    let n = 10_000;
    let mut heavy = Vec::new();
    let mut light = [Vec::new(), Vec::new()];
    for i in 0..n {
        let shift = if i % 2 == 0 { 0.0 } else { 2.0 };
        let inst = knapsack_gen(shift, &mut rng).unwrap();
        assert_eq!(inst.items.len(), 50);
        assert_eq!(inst.cap, 100.0);
        heavy.extend(inst.items[..10].iter().map(|it| it.weight));
        light[i % 2].extend(inst.items[10..].iter().map(|it| it.weight));
    }
    assert!((mean(&heavy) - 27.0).abs() < 0.05);
    assert!((mean(&light[0]) - 19.0).abs() < 0.05);
    assert!((mean(&light[1]) - 21.0).abs() < 0.05);
}

fn class_stats(data: &ClusterDataset, label: usize) -> ([f64; 2], [f64; 2]) {
    let pts: Vec<[f64; 2]> = data.points.iter().zip(&data.truth).filter(|(_, &t)| t == label).map(|(p, _)| *p).collect();
    let n = pts.len() as f64;
    let m = [pts.iter().map(|p| p[0]).sum::<f64>() / n, pts.iter().map(|p| p[1]).sum::<f64>() / n];
    let var = |j: usize| pts.iter().map(|p| (p[j] - m[j]).powi(2)).sum::<f64>() / (n - 1.0);
    (m, [var(0), var(1)])
}

#[test]
fn gaussian_mixture_statistics() {
    let mut rng = stream(13, &[]);
    for sigma in [0.5, 1.0, 4.0] {
        let d = 2.5;
        let mut cov = [0.0; 2];
        let mut sep = 0.0;
        let mut origin = [0.0; 2];
        for _ in 0..100 {
            let data = gaussian_mixture_gen(d, sigma, &mut rng).unwrap();
            assert_eq!(data.len(), 200);
            assert_eq!(data.k, 2);
            let (m0, v0) = class_stats(&data, 0);
            let (m1, v1) = class_stats(&data, 1);
            cov[0] += (v0[0] + v1[0]) / 200.0;
            cov[1] += (v0[1] + v1[1]) / 200.0;
            sep += (m1[0] - m0[0]) / 100.0;
            origin[0] += m0[0] / 100.0;
            origin[1] += m0[1] / 100.0;
        }
        assert!((cov[0] / sigma - 1.0).abs() < 0.15, "x variance {} for sigma {sigma}", cov[0]);
        assert!((cov[1] / (2.0 * sigma) - 1.0).abs() < 0.15, "y variance {} for sigma {sigma}", cov[1]);
        assert!((sep - d * sigma).abs() < 3.0 * (2.0 * sigma / 10_000.0f64).sqrt() + 1e-9);
        // class 0 is centered at the origin; the average is over 10^4 points
        assert!(origin[0].abs() < 3.0 * (sigma / 10_000.0f64).sqrt(), "x mean {}", origin[0]);
        assert!(origin[1].abs() < 3.0 * (2.0 * sigma / 10_000.0f64).sqrt(), "y mean {}", origin[1]);
    }
}

#[test]
fn lloyd_loss_matches_resimulation() {
    let mut rng = stream(14, &[]);
    let points: Vec<[f64; 2]> = (0..30).map(|_| [rng.random::<f64>() * 4.0, rng.random::<f64>() * 4.0]).collect();
    let truth: Vec<usize> = points.iter().map(|p| usize::from(p[0] > 2.0)).collect();
    let data = ClusterDataset::new(points, truth, 2).unwrap();
    let u = [rng.random::<f64>(), rng.random::<f64>()];
    let loss = lloyd_seed_loss(&data, ten(), &u).unwrap();
    for _ in 0..200 {
        let alpha = rng.random::<f64>() * 10.0;
        if near_breakpoint(&loss, alpha) {
            continue;
        }
        assert_eq!(loss.eval(alpha), lloyd_seed_loss_at(&data, alpha, &u).unwrap());
    }
    // same inputs, same centers and loss
    assert_eq!(lloyd_seed_centers(&data, 3.3, &u).unwrap(), lloyd_seed_centers(&data, 3.3, &u).unwrap());
    assert_eq!(lloyd_seed_loss(&data, ten(), &u).unwrap(), loss);
}

#[test]
fn lloyd_loss_dense_grid_on_generated_data() {
    let mut rng = stream(15, &[]);
    let data = gaussian_mixture_gen(2.2, 1.0, &mut rng).unwrap();
    let u = [rng.random::<f64>(), rng.random::<f64>()];
    let loss = lloyd_seed_loss(&data, ten(), &u).unwrap();
    assert!(loss.values().iter().all(|v| (0.0..=1.0).contains(v)));
    dense_grid_agrees(&loss, |a| lloyd_seed_loss_at(&data, a, &u).unwrap());
}

#[test]
fn hamming_by_enumeration() {
    // the two labelings of (0,1,1,1) against (0,0,1,1) mismatch 1 and 3 points
    assert_eq!(hamming_loss(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap(), 0.25);
    assert_eq!(hamming_loss(&[1, 1, 0, 0], &[0, 0, 1, 1], 2).unwrap(), 0.0);
    assert!(hamming_loss(&[0], &[0], 9).is_err());
}

#[test]
fn mwis_loss_matches_greedy() {
    for seed in 0..5 {
        let mut rng = stream(16, &[seed]);
        let w = uniform_weights(8, &mut rng);
        let g = erdos_renyi(8, 0.3, w, &mut rng).unwrap();
        let loss = mwis_loss(&g, ten()).unwrap();
        let total = g.total_weight();
        let direct = |rho: f64| 1.0 - mwis_greedy(&g, rho).1 / total;
        for _ in 0..100 {
            let rho = rng.random::<f64>() * 10.0;
            if near_breakpoint(&loss, rho) {
                continue;
            }
            assert!((loss.eval(rho) - direct(rho)).abs() <= 1e-12);
        }
        dense_grid_agrees(&loss, direct);
    }
}

/// Independent threshold losses: one uniform discontinuity per round.
fn threshold_task(m: usize, rng: &mut Rng) -> Vec<PiecewiseConstant> {
    (0..m).map(|_| threshold_loss(unit(), rng.random::<f64>(), rng.random_range(0..2)).unwrap()).collect()
}

#[test]
fn forecaster_regret_within_bound() {
    let m = 200;
    let beta = 0.5;
    let losses = threshold_task(m, &mut stream(17, &[]));
    let (opt, _) = task_optimum(&losses).unwrap();
    let ball = optimum_ball(opt, m, beta, unit()).unwrap();
    let init = Density::uniform(unit()).unwrap();
    let lambda = theory_lambda(&init, &ball, m);
    let regrets: Vec<f64> =
        (0..200).map(|r| run_task(&losses, &init, lambda, &mut stream(17, &[1, r])).unwrap().regret).collect();
    // functions jumping inside the ball can separate it from the optimum
    let jumps = dispersion_count(&losses, 2.0 * (m as f64).powf(-beta)).unwrap().max_window_count as f64;
    let bound = m as f64 * lambda + neg_log_overlap(&init, &ball) / lambda + jumps;
    assert!(mean(&regrets) <= bound, "mean regret {} above {bound}", mean(&regrets));
}

fn shared_optimum_tasks(n: usize, m: usize, rng: &mut Rng) -> Vec<Vec<PiecewiseConstant>> {
    (0..n)
        .map(|_| {
            let c = 0.42 + 0.01 * rng.random::<f64>();
            (0..m)
                .map(|_| {
                    let hole = Interval::ball(c, 0.02 + 0.01 * rng.random::<f64>()).unwrap();
                    PiecewiseConstant::indicator(unit(), hole, 0.0, 0.5 + 0.5 * rng.random::<f64>()).unwrap()
                })
                .collect()
        })
        .collect()
}

#[test]
fn meta_overlap_matches_deployed_initializer() {
    let tasks = shared_optimum_tasks(8, 20, &mut stream(18, &[]));
    let cfg = MetaConfig::new(20, 0.5);
    let res = meta_run(&tasks, &cfg, &mut stream(18, &[1])).unwrap();
    let mut init = MetaInitializer::new(unit(), cfg.gamma, cfg.eta).unwrap();
    for out in &res.tasks {
        let w = init.density().unwrap();
        let z = w.mass_in(&out.ball) / w.mass();
        assert!((z - (-out.neg_log_overlap).exp()).abs() <= 1e-9);
        init.observe(out.ball).unwrap();
    }
    for l in res.lambdas() {
        let sm = (cfg.m as f64).sqrt();
        assert!(l >= res.epsilon / sm - 1e-15);
    }
}

#[test]
fn theory_fixed_mode_only_changes_lambda() {
    let tasks = shared_optimum_tasks(6, 20, &mut stream(19, &[]));
    let meta = MetaConfig::new(20, 0.5);
    let fixed = MetaConfig { lambda_mode: LambdaMode::TheoryFixed, ..meta.clone() };
    let a = meta_run(&tasks, &meta, &mut stream(19, &[1])).unwrap();
    let b = meta_run(&tasks, &fixed, &mut stream(19, &[1])).unwrap();
    assert_eq!(a.final_initializer.probs, b.final_initializer.probs);
    for (x, y) in a.tasks.iter().zip(&b.tasks) {
        assert_eq!(x.ball, y.ball);
        assert_eq!(x.opt_rho, y.opt_rho);
        assert_eq!(x.neg_log_overlap, y.neg_log_overlap);
    }
    assert_ne!(a.lambdas(), b.lambdas());
}

#[test]
fn single_task_meta_run_is_the_baseline() {
    let tasks = shared_optimum_tasks(1, 30, &mut stream(20, &[]));
    let cfg = MetaConfig { lambda_mode: LambdaMode::TheoryFixed, ..MetaConfig::new(30, 0.5) };
    let res = meta_run(&tasks, &cfg, &mut stream(20, &[1])).unwrap();
    let init = Density::uniform(unit()).unwrap();
    let (opt, _) = task_optimum(&tasks[0]).unwrap();
    let ball = optimum_ball(opt, 30, 0.5, unit()).unwrap();
    let lambda = theory_lambda(&init, &ball, 30);
    let trace = run_task(&tasks[0], &init, lambda, &mut stream(20, &[1])).unwrap();
    assert_eq!(res.tasks[0].lambda, lambda);
    assert_eq!(res.tasks[0].regret, trace.regret);
    assert_eq!(res.task_averaged_regret, trace.regret);
}

#[test]
fn shared_optimum_lowers_overlap_cost() {
    let (mut early, mut late) = (Vec::new(), Vec::new());
    for seed in 0..20 {
        let tasks = shared_optimum_tasks(20, 20, &mut stream(21, &[seed]));
        let cfg = MetaConfig { eta: 0.5, ..MetaConfig::new(20, 0.5) };
        let res = meta_run(&tasks, &cfg, &mut stream(21, &[seed, 1])).unwrap();
        let nlo: Vec<f64> = res.tasks.iter().map(|t| t.neg_log_overlap).collect();
        early.push(mean(&nlo[..5]));
        late.push(mean(&nlo[15..]));
    }
    assert!(mean(&late) < mean(&early), "late {} vs early {}", mean(&late), mean(&early));
}

#[test]
fn halving_dispersion_grows_like_sqrt_m() {
    for m in [256usize, 1024, 4096] {
        let seq = halving_losses(m, 0.5, 1.0, 0.0, unit(), &mut stream(22, &[m as u64])).unwrap();
        assert!(seq.losses.iter().all(|l| l.num_cells() <= 2 && l.values().iter().all(|&v| v == 0.0 || v == 1.0)));
        let r = dispersion_count(&seq.losses, (m as f64).powf(-0.5)).unwrap();
        let root = (m as f64).sqrt();
        assert!((r.max_window_count as f64) <= 4.0 * root * (m as f64).ln(), "m = {m}: {}", r.max_window_count);
        assert!(r.max_window_count as f64 >= root);
    }
}

#[test]
fn halving_interval_contains_a_minimizer() {
    for seed in 0..10 {
        for m in [64usize, 500, 2000] {
            let seq = halving_losses(m, 0.5, 1.0, 0.0, unit(), &mut stream(23, &[seed, m as u64])).unwrap();
            let total = PiecewiseConstant::sum(seq.losses.iter()).unwrap();
            let best = total.argmin().value;
            assert!((total.eval(seq.interval.midpoint()) - best).abs() <= 1e-9);
            let k = seq.halving_rounds as i32;
            if seq.interval.width() > 1e-10 {
                assert!((seq.interval.width() - 2f64.powi(-k) / 3.0).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn equal_exponents_reduce_to_halving() {
    let m = 400;
    let lb = robust_lb_sequence(m, 0.5, 0.5, &mut stream(24, &[])).unwrap();
    let plain = halving_losses(m, 0.5, 1.0, 0.0, unit(), &mut stream(24, &[])).unwrap();
    assert_eq!(lb.attack_rounds, 0);
    assert_eq!(lb.true_losses(), plain.losses);
    assert_eq!(lb.perturbed_losses(), plain.losses);
}

#[test]
fn lower_bound_attacks_sit_in_a_narrow_interval() {
    for m in [100usize, 1000, 4000] {
        let lb = robust_lb_sequence(m, 0.75, 0.25, &mut stream(25, &[m as u64])).unwrap();
        let iv = lb.attacked_interval;
        assert!(iv.width() <= (m as f64).powf(-0.75));
        assert!(lb.attack_rounds > 0);
        for r in &lb.rounds {
            for (cell, v) in r.attack.bump.cells() {
                if v != 0.0 {
                    assert!(cell.lo >= iv.lo - 1e-15 && cell.hi <= iv.hi + 1e-15);
                }
            }
        }
    }
}

#[test]
fn attack_centers_are_dispersed() {
    let beta_a = 0.5;
    for m in [100usize, 1000, 10_000] {
        let attacks = dispersed_attack_gen(m, beta_a, unit(), 0.5, &mut stream(26, &[m as u64])).unwrap();
        assert!(attacks.iter().all(|a| a.delta == (m as f64).powf(-beta_a)));
        let mut c: Vec<f64> = attacks.iter().map(|a| a.center).collect();
        c.sort_by(f64::total_cmp);
        let w = (m as f64).powf(-beta_a);
        let mut best = 0;
        let mut left = 0;
        for right in 0..c.len() {
            while c[right] - c[left] > w {
                left += 1;
            }
            best = best.max(right - left + 1);
        }
        let mf = m as f64;
        assert!((best as f64) <= 3.0 * mf.powf(1.0 - beta_a) * mf.ln(), "m = {m}: {best}");
    }
}

#[test]
fn decomposition_holds_on_every_trace() {
    for seed in 0..20 {
        let m = 300;
        let mut rng = stream(27, &[seed]);
        let true_losses = threshold_task(m, &mut rng);
        let attacks = dispersed_attack_gen(m, 0.5, unit(), 0.7, &mut rng).unwrap();
        let rounds = perturb(true_losses, attacks).unwrap();
        let seen: Vec<PiecewiseConstant> = rounds.iter().map(|r| r.perturbed.clone()).collect();
        let init = Density::uniform(unit()).unwrap();
        let trace = run_task(&seen, &init, 0.05, &mut rng).unwrap();
        let dr = dual_regret(&trace.plays, &rounds).unwrap();
        assert!(dr.true_regret <= dr.decomposition_bound() + 1e-9);
        assert!(dr.perturbed_regret >= -1e-9);

        let at_opt = vec![dr.perturbed_opt; m];
        assert!(dual_regret(&at_opt, &rounds).unwrap().perturbed_regret.abs() <= 1e-9);
    }
    let lb = robust_lb_sequence(1024, 0.75, 0.25, &mut stream(27, &[99])).unwrap();
    let init = Density::uniform(unit()).unwrap();
    let trace = run_task(&lb.perturbed_losses(), &init, 0.05, &mut stream(27, &[100])).unwrap();
    let dr = dual_regret(&trace.plays, &lb.rounds).unwrap();
    assert!(dr.true_regret <= dr.decomposition_bound() + 1e-9);
}
