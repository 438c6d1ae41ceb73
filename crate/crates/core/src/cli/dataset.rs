//! Task generation and the JSONL task files.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Kind, LossScale};
use super::{CliError, CODE_VERSION};
use crate::rng::stream;
use crate::robust::{dispersed_attack_gen, halving_losses, perturb, Attack};
use crate::tasks::clustering::{gaussian_mixture_gen, lloyd_seed_loss};
use crate::tasks::knapsack::{knapsack_gen, knapsack_value_pc, KnapsackInstance};
use crate::tasks::mwis::{erdos_renyi, mwis_loss, perturb_weights, uniform_weights, WeightedGraph};
use crate::{Interval, PiecewiseConstant, Result};

const TAG_GEN: u64 = 1;

/// Standard deviation of the per-instance MWIS weight noise.
pub const MWIS_WEIGHT_SD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMeta {
    pub split: Split,
    /// Task-level parameter: separation `d`, weight shift `w_t`, or 0.
    pub task_param: f64,
    /// Utility of instance `i` at `ρ` is `offset[i] − scale[i] · loss_i(ρ)`.
    pub utility_offset: Vec<f64>,
    pub utility_scale: Vec<f64>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub instances: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: usize,
    pub kind: String,
    pub m: usize,
    pub losses: Vec<PiecewiseConstant>,
    pub meta: TaskMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attacks: Option<Vec<Attack>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_losses: Option<Vec<PiecewiseConstant>>,
}

impl TaskRecord {
    /// Total utility over the task's instances as a function of the parameter.
    pub fn utility_pc(&self) -> Result<PiecewiseConstant> {
        let parts: Vec<PiecewiseConstant> = self
            .losses
            .iter()
            .zip(self.meta.utility_offset.iter().zip(&self.meta.utility_scale))
            .map(|(l, (&o, &s))| l.map(|v| o - s * v))
            .collect();
        PiecewiseConstant::sum(parts.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub code_version: String,
    pub kind: String,
    pub t_train: usize,
    pub t_test: usize,
    pub m_rounds: usize,
    pub test_task_relation: String,
    pub files: Vec<String>,
}

pub const MANIFEST: &str = "manifest.json";

pub fn task_file_name(task_id: usize) -> String {
    format!("task_{task_id:04}.jsonl")
}

/// Losses and utility maps for value-type instances under the configured
/// scaling.
fn scaled_value_loss(value: &PiecewiseConstant, total: f64, scale: LossScale) -> Result<(PiecewiseConstant, f64, f64)> {
    match scale {
        LossScale::Total => {
            let t = if total > 0.0 { total } else { 1.0 };
            Ok((value.map(|v| (1.0 - v / t).clamp(0.0, 1.0)), t, t))
        }
        LossScale::Range => {
            let (lo, hi) = (value.min_value(), value.max_value());
            if hi - lo <= 0.0 {
                return Ok((PiecewiseConstant::constant(value.domain(), 0.0)?, hi, 0.0));
            }
            Ok((value.map(|v| ((hi - v) / (hi - lo)).clamp(0.0, 1.0)), hi, hi - lo))
        }
    }
}

fn mwis_value_pc(g: &WeightedGraph, domain: Interval) -> Result<PiecewiseConstant> {
    let total = g.total_weight();
    let loss = mwis_loss(g, domain)?;
    Ok(loss.map(|l| total * (1.0 - l)))
}

/// Generates task `task_id` deterministically from the configuration.
pub fn generate_task(cfg: &ExperimentConfig, task_id: usize) -> Result<TaskRecord> {
    let mut rng = stream(cfg.seed, &[TAG_GEN, task_id as u64]);
    let split = if task_id < cfg.t_train { Split::Train } else { Split::Test };
    let m = cfg.m_rounds;
    let domain = cfg.domain;
    let mut losses = Vec::with_capacity(m);
    let mut offset = Vec::with_capacity(m);
    let mut scale = Vec::with_capacity(m);
    let mut attacks = None;
    let mut true_losses = None;
    let (task_param, instances) = match cfg.kind {
        Kind::Knapsack => {
            let shift = rng.random::<f64>() * 2.0;
            let mut insts: Vec<KnapsackInstance> = Vec::with_capacity(m);
            for _ in 0..m {
                let inst = knapsack_gen(shift, &mut rng)?;
                let value = knapsack_value_pc(&inst, domain)?;
                let (l, o, s) = scaled_value_loss(&value, inst.total_value(), cfg.loss_scale)?;
                losses.push(l);
                offset.push(o);
                scale.push(s);
                insts.push(inst);
            }
            (shift, serde_json::to_value(insts).expect("serializable"))
        }
        Kind::GaussianCluster => {
            let d = 2.0 + rng.random::<f64>();
            let mut uniforms = Vec::with_capacity(m);
            for _ in 0..m {
                let data = gaussian_mixture_gen(d, cfg.sigma, &mut rng)?;
                let loss = loop {
                    let u: Vec<f64> = (0..data.k).map(|_| rng.random::<f64>()).collect();
                    match lloyd_seed_loss(&data, domain, &u) {
                        Ok(l) => {
                            uniforms.push(u);
                            break l;
                        }
                        Err(e) => log::debug!("resampling seeding uniforms: {e}"),
                    }
                };
                losses.push(loss);
                offset.push(1.0);
                scale.push(1.0);
            }
            (d, serde_json::json!({ "sigma": cfg.sigma, "uniforms": uniforms }))
        }
        Kind::Mwis => {
            let base = uniform_weights(cfg.mwis_n, &mut rng);
            let mut graphs = Vec::with_capacity(m);
            for _ in 0..m {
                let w = perturb_weights(&base, MWIS_WEIGHT_SD, &mut rng);
                let g = erdos_renyi(cfg.mwis_n, cfg.mwis_p, w, &mut rng)?;
                let value = mwis_value_pc(&g, domain)?;
                let (l, o, s) = scaled_value_loss(&value, g.total_weight(), cfg.loss_scale)?;
                losses.push(l);
                offset.push(o);
                scale.push(s);
                graphs.push(g);
            }
            (0.0, serde_json::to_value(graphs).expect("serializable"))
        }
        Kind::Halving | Kind::Robust => {
            let seq = halving_losses(m, cfg.beta, domain.width(), domain.lo, domain, &mut rng)?;
            if cfg.kind == Kind::Robust {
                let atk = dispersed_attack_gen(m, cfg.beta_a, domain, cfg.attack_height, &mut rng)?;
                let rounds = perturb(seq.losses, atk.clone())?;
                true_losses = Some(rounds.iter().map(|r| r.true_loss.clone()).collect());
                losses.extend(rounds.into_iter().map(|r| r.perturbed));
                attacks = Some(atk);
            } else {
                losses.extend(seq.losses);
            }
            offset.resize(m, 1.0);
            scale.resize(m, 1.0);
            (0.0, serde_json::Value::Null)
        }
    };
    Ok(TaskRecord {
        task_id,
        kind: cfg.kind.to_string(),
        m,
        losses,
        meta: TaskMeta { split, task_param, utility_offset: offset, utility_scale: scale, instances },
        attacks,
        true_losses,
    })
}

/// Writes one JSONL file per task plus the manifest.
pub fn write_dataset(cfg: &ExperimentConfig, dir: &Path) -> std::result::Result<Manifest, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    let n = cfg.t_train + cfg.t_test;
    let tasks: Vec<TaskRecord> = (0..n)
        .into_par_iter()
        .map(|id| generate_task(cfg, id))
        .collect::<Result<_>>()
        .map_err(|e| CliError::Data(format!("task generation failed: {e}")))?;
    let mut files = Vec::with_capacity(n);
    for t in &tasks {
        let name = task_file_name(t.task_id);
        let mut line = serde_json::to_string(t).expect("serializable");
        line.push('\n');
        write_file(&dir.join(&name), line.as_bytes())?;
        files.push(name);
    }
    let manifest = Manifest {
        config_hash: cfg.hash(),
        code_version: CODE_VERSION.to_string(),
        kind: cfg.kind.to_string(),
        t_train: cfg.t_train,
        t_test: cfg.t_test,
        m_rounds: cfg.m_rounds,
        test_task_relation: "test-task parameters are drawn from the same range as training tasks".into(),
        files,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("serializable");
    text.push('\n');
    write_file(&dir.join(MANIFEST), text.as_bytes())?;
    Ok(manifest)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> std::result::Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

/// Reads and checks a dataset directory against the configuration.
pub fn read_dataset(cfg: &ExperimentConfig, dir: &Path) -> std::result::Result<Vec<TaskRecord>, CliError> {
    let mpath = dir.join(MANIFEST);
    let text = fs::read_to_string(&mpath)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", mpath.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("malformed manifest {}: {e}", mpath.display())))?;
    let want = cfg.hash();
    if manifest.config_hash != want {
        return Err(CliError::Data(format!(
            "dataset in {} was generated from a different configuration (hash {} != {})",
            dir.display(),
            manifest.config_hash,
            want
        )));
    }
    let mut tasks = Vec::with_capacity(manifest.files.len());
    for name in &manifest.files {
        let path: PathBuf = dir.join(name);
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        let rec: TaskRecord = serde_json::from_str(text.trim_end())
            .map_err(|e| CliError::Data(format!("malformed task file {}: {e}", path.display())))?;
        if rec.losses.len() != rec.m || rec.m != cfg.m_rounds {
            return Err(CliError::Data(format!("{}: expected {} losses", path.display(), cfg.m_rounds)));
        }
        tasks.push(rec);
    }
    if tasks.len() != cfg.t_train + cfg.t_test {
        return Err(CliError::Data(format!(
            "expected {} task files, found {}",
            cfg.t_train + cfg.t_test,
            tasks.len()
        )));
    }
    Ok(tasks)
}
