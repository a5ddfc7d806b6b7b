//! Runs one JSON experiment config and writes its reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mssa::experiment::{load_config, run_to_dir, DataSource};

#[derive(Parser, Debug)]
#[command(name = "mssa-run", version, about = "Run an mSSA experiment config")]
struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Token marking a missing CSV cell; overrides the config.
    #[arg(long)]
    missing_token: Option<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(args: Args) -> mssa::Result<()> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    if let (Some(token), Some(DataSource::Csv { missing_token, .. })) = (args.missing_token, cfg.data.as_mut()) {
        *missing_token = token;
    }
    let out = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("mssa-out"));
    cfg.output_dir = Some(out.clone());
    let report = run_to_dir(&cfg, &out)?;
    println!("{} rows written to {}", report.rows.len(), out.display());
    if let Some(id) = report.selected {
        println!("selected grid point {id}");
    }
    if let Some(v) = &report.verdict {
        println!("suitability: {} ({})", v.suitability, v.rationale);
    }
    for w in &report.warnings {
        println!("note: {w}");
    }
    Ok(())
}
