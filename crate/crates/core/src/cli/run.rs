//! Evaluation protocol and the results CSV.
//!
//! For each snapshot of the meta-learned initializer (after `t` training
//! tasks) and each test task and replica, both variants run the forecaster
//! over all rounds of the test task with the same random stream. The
//! `single_task` variant starts from the uniform density; `meta_initialized`
//! starts from the snapshot. The k-shot accuracy is the total utility of the
//! parameter drawn after `k` rounds, divided by the utility of the best
//! fixed parameter of the task.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::dataset::{Split, TaskRecord};
use super::CliError;
use crate::forecaster::{optimum_ball, task_optimum, theory_lambda, ForecasterState};
use crate::meta_init::MetaInitializer;
use crate::meta_step::{meta_run, LambdaMode, MetaConfig, StepSizeState};
use crate::metrics::{neg_log_overlap, task_similarity};
use crate::rng::stream;
use crate::{Density, Interval, PiecewiseConstant};

pub const RESULTS_FILE: &str = "results.csv";

pub const COLUMNS: &[&str] = &[
    "experiment_id",
    "config_hash",
    "kind",
    "variant",
    "train_tasks",
    "task_id",
    "replica",
    "shots",
    "accuracy",
    "regret",
    "v2",
    "v",
    "neg_log_overlap",
    "lambda",
    "wallclock_ms",
];

const TAG_TRAIN: u64 = 2;
const TAG_EVAL: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variant {
    SingleTask,
    MetaInitialized,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::SingleTask => "single_task",
            Variant::MetaInitialized => "meta_initialized",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "single_task" => Some(Variant::SingleTask),
            "meta_initialized" => Some(Variant::MetaInitialized),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment_id: String,
    pub config_hash: String,
    pub kind: String,
    pub variant: Variant,
    pub train_tasks: usize,
    pub task_id: usize,
    pub replica: usize,
    pub shots: usize,
    pub accuracy: f64,
    pub regret: f64,
    pub v2: f64,
    pub v: f64,
    pub neg_log_overlap: f64,
    pub lambda: f64,
    pub wallclock_ms: f64,
}

/// `%.9g`-style formatting: nine significant digits, trailing zeros
/// dropped, exponent form outside `[1e-4, 1e9)`.
pub fn fmt_g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.8e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x))
    } else {
        let m = trim_zeros(mant);
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Initializer and step-size state after `t` training tasks.
struct Snapshot {
    t: usize,
    init: Density,
    step: Option<StepSizeState>,
    v2: f64,
}

struct TestTask<'a> {
    record: &'a TaskRecord,
    ball: Interval,
    utility: PiecewiseConstant,
    best_utility: f64,
}

/// Meta-trains on the training tasks and returns the snapshots to evaluate.
fn snapshots(cfg: &ExperimentConfig, train: &[&TaskRecord]) -> Result<Vec<Snapshot>, CliError> {
    let data_err = |e: crate::Error| CliError::Data(format!("meta-training failed: {e}"));
    let t_total = train.len();
    let mcfg = MetaConfig {
        m: cfg.m_rounds,
        beta: cfg.beta,
        gamma: cfg.gamma,
        eta: cfg.eta,
        epsilon: cfg.epsilon,
        d: cfg.d_param,
        variant: cfg.step_variant,
        lambda_mode: cfg.lambda_mode,
    };
    let (balls, overlaps) = if t_total > 0 {
        let losses: Vec<Vec<PiecewiseConstant>> = train.iter().map(|r| r.losses.clone()).collect();
        let res = meta_run(&losses, &mcfg, &mut stream(cfg.seed, &[TAG_TRAIN])).map_err(data_err)?;
        log::info!("meta-training task-averaged regret {:.4}", res.task_averaged_regret);
        (
            res.tasks.iter().map(|o| o.ball).collect::<Vec<_>>(),
            res.tasks.iter().map(|o| (-o.neg_log_overlap).exp()).collect::<Vec<_>>(),
        )
    } else {
        (Vec::new(), Vec::new())
    };
    let mut init = MetaInitializer::new(cfg.domain, cfg.gamma, cfg.eta).map_err(data_err)?;
    let mut step = match cfg.lambda_mode {
        LambdaMode::Meta => Some(
            StepSizeState::new(
                cfg.step_variant,
                mcfg.resolved_epsilon(t_total),
                mcfg.resolved_d(t_total),
                cfg.gamma,
            )
            .map_err(data_err)?,
        ),
        LambdaMode::TheoryFixed => None,
    };
    let wanted = |t: usize| if cfg.curve { t >= 1 || t_total == 0 } else { t == t_total };
    let mut out = Vec::new();
    for t in 0..=t_total {
        if t > 0 {
            init.observe(balls[t - 1]).map_err(data_err)?;
            if let Some(s) = step.as_mut() {
                s.observe(overlaps[t - 1]);
            }
        }
        if wanted(t) {
            let v2 = if t == 0 { f64::NAN } else { task_similarity(&balls[..t], cfg.domain).map_err(data_err)?.v2 };
            out.push(Snapshot { t, init: init.density().map_err(data_err)?, step: step.clone(), v2 });
        }
    }
    Ok(out)
}

fn prepare_test<'a>(cfg: &ExperimentConfig, record: &'a TaskRecord) -> Result<TestTask<'a>, CliError> {
    let data_err = |e: crate::Error| CliError::Data(format!("task {}: {e}", record.task_id));
    let (rho, _) = task_optimum(&record.losses).map_err(data_err)?;
    let ball = optimum_ball(rho, cfg.m_rounds, cfg.beta, cfg.domain).map_err(data_err)?;
    let utility = record.utility_pc().map_err(data_err)?;
    let best_utility = utility.max_value();
    Ok(TestTask { record, ball, utility, best_utility })
}

/// One forecaster pass: regret over all rounds and the plays needed for the
/// shot counts (index `k` is the play after `k` updates).
fn play(task: &TestTask, init: &Density, lambda: f64, extra: bool, seed: u64, replica: usize) -> crate::Result<(f64, Vec<f64>)> {
    let mut rng = stream(seed, &[TAG_EVAL, task.record.task_id as u64, replica as u64]);
    let mut state = ForecasterState::new(init.domain(), init.clone(), lambda)?;
    let mut plays = Vec::with_capacity(task.record.m + 1);
    let mut incurred = 0.0;
    for loss in &task.record.losses {
        let rho = state.sample(&mut rng)?;
        incurred += loss.eval(rho);
        plays.push(rho);
        state = state.update(loss)?;
    }
    let regret = incurred - state.cumulative_loss().argmin().value;
    if extra {
        plays.push(state.sample(&mut rng)?);
    }
    Ok((regret, plays))
}

/// Runs the evaluation protocol on a loaded dataset.
pub fn evaluate(cfg: &ExperimentConfig, tasks: &[TaskRecord], jobs: usize) -> Result<Vec<ResultRow>, CliError> {
    let train: Vec<&TaskRecord> = tasks.iter().filter(|t| t.meta.split == Split::Train).collect();
    let test: Vec<TestTask> = tasks
        .iter()
        .filter(|t| t.meta.split == Split::Test)
        .map(|r| prepare_test(cfg, r))
        .collect::<Result<_, _>>()?;
    let snaps = snapshots(cfg, &train)?;
    let uniform = Density::uniform(cfg.domain).map_err(|e| CliError::Data(e.to_string()))?;
    let hash = cfg.hash();
    let extra = cfg.shots.contains(&cfg.m_rounds);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Data(format!("cannot start worker pool: {e}")))?;

    let units: Vec<(usize, usize, usize)> = (0..snaps.len())
        .flat_map(|s| (0..test.len()).flat_map(move |k| (0..cfg.replicas).map(move |r| (s, k, r))))
        .collect();
    let chunks: Vec<Vec<ResultRow>> = pool.install(|| {
        units
            .par_iter()
            .map(|&(s, k, r)| {
                let snap = &snaps[s];
                let task = &test[k];
                let mut rows = Vec::with_capacity(2 * cfg.shots.len());
                for variant in [Variant::SingleTask, Variant::MetaInitialized] {
                    let started = Instant::now();
                    let init = match variant {
                        Variant::SingleTask => &uniform,
                        Variant::MetaInitialized => &snap.init,
                    };
                    let lambda = match (variant, &snap.step) {
                        (Variant::MetaInitialized, Some(step)) => step.lambda(cfg.m_rounds)?,
                        _ => theory_lambda(init, &task.ball, cfg.m_rounds),
                    };
                    let (regret, plays) = play(task, init, lambda, extra, cfg.seed, r)?;
                    let ms = if cfg.record_timing { started.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
                    let (v2, v) = match variant {
                        Variant::SingleTask => (f64::NAN, f64::NAN),
                        Variant::MetaInitialized => (snap.v2, snap.v2.sqrt()),
                    };
                    for &shots in &cfg.shots {
                        let accuracy = if task.best_utility > 0.0 {
                            task.utility.eval(plays[shots]) / task.best_utility
                        } else {
                            1.0
                        };
                        rows.push(ResultRow {
                            experiment_id: cfg.experiment_id.clone(),
                            config_hash: hash.clone(),
                            kind: cfg.kind.to_string(),
                            variant,
                            train_tasks: snap.t,
                            task_id: task.record.task_id,
                            replica: r,
                            shots,
                            accuracy,
                            regret,
                            v2,
                            v,
                            neg_log_overlap: neg_log_overlap(init, &task.ball),
                            lambda,
                            wallclock_ms: ms,
                        });
                    }
                }
                Ok(rows)
            })
            .collect::<crate::Result<Vec<_>>>()
    })
    .map_err(|e| CliError::Data(format!("evaluation failed: {e}")))?;
    let mut rows: Vec<ResultRow> = chunks.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        (a.train_tasks, a.variant, a.task_id, a.replica, a.shots).cmp(&(b.train_tasks, b.variant, b.task_id, b.replica, b.shots))
    });
    Ok(rows)
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| CliError::Data(format!("cannot write {}: {e}", path.display()));
    w.write_record(COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.experiment_id.clone(),
            r.config_hash.clone(),
            r.kind.clone(),
            r.variant.as_str().to_string(),
            r.train_tasks.to_string(),
            r.task_id.to_string(),
            r.replica.to_string(),
            r.shots.to_string(),
            fmt_g9(r.accuracy),
            fmt_g9(r.regret),
            fmt_g9(r.v2),
            fmt_g9(r.v),
            fmt_g9(r.neg_log_overlap),
            fmt_g9(r.lambda),
            fmt_g9(r.wallclock_ms),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a results CSV, checking the header and every field.
pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>, CliError> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let header = rd.headers().map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?.clone();
    if header.iter().collect::<Vec<_>>() != COLUMNS {
        return Err(CliError::Data(format!("{}: header does not match the results schema", path.display())));
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::Data(format!("{}: line {line}: {e}", path.display())))?;
        let bad = |col: &str| CliError::Data(format!("{}: line {line}: invalid {col}", path.display()));
        let int = |k: usize| rec[k].parse::<usize>().map_err(|_| bad(COLUMNS[k]));
        let real = |k: usize| rec[k].parse::<f64>().map_err(|_| bad(COLUMNS[k]));
        rows.push(ResultRow {
            experiment_id: rec[0].to_string(),
            config_hash: rec[1].to_string(),
            kind: rec[2].to_string(),
            variant: Variant::parse(&rec[3]).ok_or_else(|| bad("variant"))?,
            train_tasks: int(4)?,
            task_id: int(5)?,
            replica: int(6)?,
            shots: int(7)?,
            accuracy: real(8)?,
            regret: real(9)?,
            v2: real(10)?,
            v: real(11)?,
            neg_log_overlap: real(12)?,
            lambda: real(13)?,
            wallclock_ms: real(14)?,
        });
    }
    Ok(rows)
}
