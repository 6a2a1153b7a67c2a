// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;
mod experiments;
mod output;

use clap::Parser;
use config::ExperimentConfig;
use error::{CliError, Result};
use std::path::PathBuf;
use std::process::ExitCode;

pub const THREADS_ENV: &str = "LEVYHEAT_THREADS";

/// Monte Carlo experiments for the heat equation driven by Lévy space-time noise.
#[derive(Parser, Debug)]
#[command(name = "levyheat", version)]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment: simulate, tail, dimension, chains, verify, classify, bounded-domain-compare.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; LEVYHEAT_THREADS is read when absent.
    #[arg(long)]
    threads: Option<usize>,
}

fn thread_budget(cli: Option<usize>, config: Option<usize>) -> Result<Option<usize>> {
    if cli.is_some() {
        return Ok(cli);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(config),
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let source = match (&cli.config, &cli.preset) {
        (Some(path), _) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?,
        (None, Some(name)) => config::preset(name)?.to_string(),
        (None, None) => return Err(CliError::Config("one of --config or --preset is required".into())),
    };
    let mut config = ExperimentConfig::parse(&source)?;
    if let Some(seed) = cli.seed {
        config.sampling.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.dir = Some(out.display().to_string());
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<()> {
    let config = load(cli)?;
    if cli.threads == Some(0) {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    if let Some(n) = thread_budget(cli.threads, config.sampling.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let dir = PathBuf::from(config.output.dir.clone().unwrap_or_else(|| "levyheat-out".into()));
    // The stored config must not pin the output location or the thread budget.
    let mut stored = config.clone();
    stored.output.dir = None;
    stored.sampling.threads = None;
    let outcome = experiments::run(&config)?;
    let artifacts = output::finalize(&stored, outcome.artifacts);
    output::write_all(&dir, &artifacts)?;
    eprintln!("wrote {} files to {}", artifacts.len(), dir.display());
    match outcome.failure {
        Some(msg) => Err(CliError::VerifyFailed(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    // Clap's own usage errors would exit with 2, which is reserved for unsupported regimes.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("levyheat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
