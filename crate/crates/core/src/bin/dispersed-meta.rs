use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dispersed_meta::cli::{cmd_gen, cmd_report, cmd_run, load_config, CliError};

#[derive(Parser)]
#[command(name = "dispersed-meta", version, about = "Meta-learned initialization for exponential forecasters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory.
    #[arg(long, default_value = "data")]
    data: PathBuf,
    /// Output directory for results and reports.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for evaluation.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the task files.
    Gen(Common),
    /// Evaluate single-task and meta-initialized forecasters.
    Run(Common),
    /// Summarize a results CSV.
    Report(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DISPERSED_META_LOG", "info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn require(config: Option<PathBuf>) -> Result<PathBuf, CliError> {
    config.ok_or_else(|| {
        CliError::Config(dispersed_meta::cli::ConfigError {
            line: None,
            key: None,
            message: "--config is required".into(),
        })
    })
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Gen(c) => {
            let cfg = load_config(&require(c.config)?, c.seed)?;
            let m = cmd_gen(&cfg, &c.data)?;
            println!("wrote {} task files to {} (config {})", m.files.len(), c.data.display(), m.config_hash);
        }
        Command::Run(c) => {
            let cfg = load_config(&require(c.config)?, c.seed)?;
            let n = cmd_run(&cfg, &c.data, &c.out, c.jobs)?;
            println!("wrote {n} rows to {}", c.out.join("results.csv").display());
        }
        Command::Report(c) => {
            let cfg = c.config.map(|p| load_config(&p, c.seed)).transpose()?;
            print!("{}", cmd_report(&c.out, cfg.as_ref())?);
        }
    }
    Ok(())
}
