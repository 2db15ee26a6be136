use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ldpsgd_cli::output::write_atomic;
use ldpsgd_cli::{analyze, critical_table, simulate, RunConfig};

#[derive(Parser)]
#[command(name = "ldpsgd", version, about = "Locally private streaming SGD with online inference")]
struct Cli {
    /// Overrides the manifest seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for replications and critical values.
    #[arg(long, global = true, env = "LDPSGD_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo coverage study.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One private pass over a CSV file.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulates random-scaling critical values.
    Critvals {
        /// Comma-separated quantile levels.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 1_000)]
        grid: usize,
        /// Output and cache file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_config(path: &Path, seed: Option<u64>) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = load_config(&config, cli.seed)?;
            let text = simulate(&cfg)?;
            emit(out.as_deref().or(cfg.output.as_deref()), &text)
        }
        Command::Analyze { config, data, out } => {
            let cfg = load_config(&config, cli.seed)?;
            let report = analyze(&cfg, &data)?;
            emit(out.as_deref().or(cfg.output.as_deref()), &report.to_jsonl()?)
        }
        Command::Critvals {
            levels,
            paths,
            grid,
            out,
        } => {
            let seed = cli.seed.unwrap_or(0);
            let (table, hit) = critical_table(&levels, paths, grid, seed, out.as_deref())?;
            match out {
                Some(path) if hit => eprintln!("reused {}", path.display()),
                Some(path) => eprintln!("wrote {}", path.display()),
                None => print!("{}", table.to_text()),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
