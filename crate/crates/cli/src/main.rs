use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use rhoseries_cli::cache::BenchmarkCache;
use rhoseries_cli::config::{load_config, parse_config, ExperimentConfig};
use rhoseries_cli::table::{emit, run_table, worst_errors, RunOptions, TableArtifact};

#[derive(Parser)]
#[command(
    name = "price",
    about = "European call prices under stochastic volatility via correlation power series",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonOpts {
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output file (defaults next to the config / table name).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Benchmark cache directory.
    #[arg(long, default_value = "bench_cache")]
    cache_dir: PathBuf,
    /// Recompute benchmarks even when cached.
    #[arg(long)]
    oracle_refresh: bool,
    /// Record wall-clock seconds per row (breaks byte-for-byte rerun
    /// stability of the output file).
    #[arg(long)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment grid described by a config file.
    Run {
        /// Flat key-value experiment configuration.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run one of the shipped reference-table configs (1-4).
    Bench {
        #[arg(long)]
        table: u8,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn apply_overrides(cfg: &mut ExperimentConfig, common: &CommonOpts) {
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
}

fn run_configs(
    configs: Vec<ExperimentConfig>,
    common: &CommonOpts,
    default_out: PathBuf,
) -> Result<()> {
    let opts = RunOptions {
        workers: common.workers,
        cache: BenchmarkCache::new(common.cache_dir.clone(), common.oracle_refresh)?,
        timings: common.timings,
    };
    let format = configs[0].format;
    let mut merged = TableArtifact::default();
    for cfg in &configs {
        let artifact = run_table(cfg, &opts)?;
        merged.rows.extend(artifact.rows);
        merged.warnings.extend(artifact.warnings);
    }
    let out = common.out.clone().unwrap_or(default_out);
    emit(&merged, format, &out)?;

    let failed = merged.rows.iter().filter(|r| r.failed.is_some()).count();
    println!(
        "{} rows ({} failed) -> {}",
        merged.rows.len(),
        failed,
        out.display()
    );
    for (method, worst) in worst_errors(&merged) {
        println!("  worst {method}: {worst:.6}%");
    }
    for w in &merged.warnings {
        eprintln!("warning: {w}");
    }
    for row in merged.rows.iter().filter(|r| r.failed.is_some()) {
        eprintln!(
            "failed cell rho={} T={} K={} {}: {}",
            row.rho,
            row.maturity,
            row.strike,
            row.method,
            row.failed.as_deref().unwrap_or("")
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, common } => {
            let mut cfg = load_config(&config)?;
            apply_overrides(&mut cfg, &common);
            let stem = config
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "table".to_string());
            let out = PathBuf::from(format!("{stem}.{}", cfg.format.extension()));
            run_configs(vec![cfg], &common, out)
        }
        Command::Bench { table, common } => {
            let texts = rhoseries_cli::builtin::for_table(table)
                .ok_or_else(|| anyhow::anyhow!("no shipped config for table {table} (use 1-4)"))?;
            let mut configs = Vec::new();
            for text in texts {
                let mut cfg = parse_config(text)
                    .with_context(|| format!("shipped config for table {table}"))?;
                apply_overrides(&mut cfg, &common);
                configs.push(cfg);
            }
            if configs.is_empty() {
                bail!("table {table} resolved to no configs");
            }
            let ext = configs[0].format.extension();
            run_configs(configs, &common, PathBuf::from(format!("table{table}.{ext}")))
        }
    }
}
