//! Experiment harness: dataset generation, evaluation runs and reports.

pub mod config;
pub mod dataset;
pub mod report;
pub mod run;

use std::path::Path;

pub use config::{ConfigError, ExperimentConfig, Kind, LossScale};

/// Version string folded into every configuration hash.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("data error: {0}")]
    Data(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 3 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io(_) => 3,
        }
    }
}

/// Loads a configuration and applies a seed override.
pub fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::from_path(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Generates the dataset for `cfg` into `data`.
pub fn cmd_gen(cfg: &ExperimentConfig, data: &Path) -> Result<dataset::Manifest, CliError> {
    log::info!("generating {} tasks of kind {} into {}", cfg.t_train + cfg.t_test, cfg.kind, data.display());
    dataset::write_dataset(cfg, data)
}

/// Evaluates both variants on the dataset in `data` and writes
/// `<out>/results.csv`. Returns the number of rows written.
pub fn cmd_run(cfg: &ExperimentConfig, data: &Path, out: &Path, jobs: usize) -> Result<usize, CliError> {
    let tasks = dataset::read_dataset(cfg, data)?;
    let rows = run::evaluate(cfg, &tasks, jobs)?;
    std::fs::create_dir_all(out)?;
    let path = out.join(run::RESULTS_FILE);
    run::write_csv(&path, &rows)?;
    log::info!("wrote {} rows to {}", rows.len(), path.display());
    Ok(rows.len())
}

/// Summarizes `<out>/results.csv` into `report.txt` and `regret_curve.svg`.
pub fn cmd_report(out: &Path, cfg: Option<&ExperimentConfig>) -> Result<String, CliError> {
    let rows = run::read_csv(&out.join(run::RESULTS_FILE))?;
    let table = report::render(&rows, cfg.map(|c| c.hash()).as_deref())?;
    std::fs::write(out.join(report::REPORT_FILE), &table)?;
    std::fs::write(out.join(report::SVG_FILE), report::regret_svg(&rows))?;
    Ok(table)
}
