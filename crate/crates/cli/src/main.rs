//! `uavnet run --config <path>`: runs a sweep and writes its CSV outputs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uavnet::harness::{run, ExperimentConfig, Method};

#[derive(Parser)]
#[command(name = "uavnet", version, about = "Power and beam control experiments for multi-cell UAV networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every (method, L, seed) cell of a config file.
    Run {
        /// JSON experiment config; omitted keys take their defaults.
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated methods, overriding `methods`.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Added to every seed in the config.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
    },
}

fn execute(cli: Cli) -> uavnet::Result<()> {
    let Command::Run {
        config,
        out,
        methods,
        seed_offset,
    } = cli.command;
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    if let Some(names) = methods {
        cfg.methods = names
            .iter()
            .map(|n| n.trim().parse::<Method>())
            .collect::<uavnet::Result<_>>()?;
    }
    for s in &mut cfg.seeds {
        *s = s.wrapping_add(seed_offset);
    }
    let table = run(&cfg)?;
    println!("method,L,seeds,mean_sum_rate");
    for &m in &cfg.methods {
        for &l in &cfg.cells_sweep {
            if let Some(mean) = table.mean_sum_rate(m, l) {
                println!("{m},{l},{},{mean:.4}", table.rows_for(m, l).count());
            }
        }
    }
    for s in &table.skipped {
        eprintln!("skipped {} L={} seed={}: {}", s.method, s.cells, s.seed, s.reason);
    }
    println!("outputs written to {}", cfg.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
