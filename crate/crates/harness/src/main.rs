use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsmooth_harness::commands::worker_count;
use dsmooth_harness::{cmd_generate, cmd_rate, cmd_run, cmd_sweep, Config, HarnessError};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "dsmooth",
    version,
    about = "Projection-free minimax experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set solver.mode=LMO-PO`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default `out`, or `output.dir` from the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sweep worker count (default `MMX_WORKERS`, else all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic dictionary-learning matrices.
    Generate,
    /// Run one solver configuration.
    Run,
    /// Fit the empirical decay exponent of a metric.
    Rate,
    /// Run every cell of the `sweep.*` grid.
    Sweep,
    /// List the configuration keys.
    Keys,
}

fn load(common: &Common) -> Result<(Config, PathBuf), HarnessError> {
    let mut cfg = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    for pair in &common.set {
        cfg.set_pair(pair)?;
    }
    if let Some(seed) = common.seed {
        cfg.set("seed", json!(seed))?;
    }
    let out = match &common.out {
        Some(dir) => dir.clone(),
        None => cfg
            .path("output.dir")?
            .unwrap_or_else(|| PathBuf::from("out")),
    };
    Ok((cfg, out))
}

fn dispatch(cli: &Cli) -> Result<(), HarnessError> {
    if let Command::Keys = cli.command {
        for (key, doc) in dsmooth_harness::config::KNOWN_KEYS {
            println!("{key:<24} {doc}");
        }
        println!(
            "{:<24} list of values to sweep over for <key>",
            "sweep.<key>"
        );
        return Ok(());
    }
    let (cfg, out) = load(&cli.common)?;
    match cli.command {
        Command::Generate => {
            cmd_generate(&cfg, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Run => {
            let o = cmd_run(&cfg, &out)?;
            println!(
                "{} iterations, stationarity {:.4e} -> {:.4e}, wrote {}",
                o.summary["iterations"],
                o.summary["initial_stationarity"]
                    .as_f64()
                    .unwrap_or(f64::NAN),
                o.summary["final_stationarity"].as_f64().unwrap_or(f64::NAN),
                out.display()
            );
        }
        Command::Rate => {
            let r = cmd_rate(&cfg, &out)?;
            let expected = r.expected.map_or("-".into(), |e| format!("{e:.4}"));
            let band = r
                .band
                .map_or("-".into(), |(lo, hi)| format!("[{lo}, {hi}]"));
            println!(
                "{}: slope {:.4} (stderr {:.2e}, {} points), expected {expected}, band {band}: {}",
                r.metric,
                r.slope,
                r.stderr,
                r.points,
                if r.pass { "PASS" } else { "FAIL" }
            );
            if !r.pass {
                return Err(HarnessError::Failed(format!(
                    "slope {:.4} outside {band}",
                    r.slope
                )));
            }
        }
        Command::Sweep => {
            let cells = cmd_sweep(&cfg, &out, worker_count(cli.common.workers))?;
            let failed: Vec<_> = cells.iter().filter(|c| !c.ok).collect();
            for c in &failed {
                eprintln!("cell {}: {}", c.cell, c.error.as_deref().unwrap_or(""));
            }
            println!(
                "{} cells, {} failed, index at {}",
                cells.len(),
                failed.len(),
                out.join("index.json").display()
            );
            if !failed.is_empty() {
                return Err(HarnessError::Failed(format!(
                    "{} sweep cells failed",
                    failed.len()
                )));
            }
        }
        Command::Keys => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
