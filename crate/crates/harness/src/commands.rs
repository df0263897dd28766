//! The `run`, `rate`, `sweep` and `generate` subcommands.

use std::path::{Path, PathBuf};

use dsmooth::metrics::{estimate_rate, estimate_rate_trailing_decade, RateEstimate};
use dsmooth::problems::{dl_generate, matrix_io};
use dsmooth::solvers::run;
use dsmooth::{Trace, TraceRow};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::build::{build_plan, dl_sizes, schedule_json, DL_FILES};
use crate::config::{Config, Result};
use crate::error::HarnessError;
use crate::output::{ensure_dir, read_trace_column, write_json, write_trace};

fn stationarity(r: &TraceRow) -> f64 {
    r.gap_x + r.gap_y
}

/// Outcome of one solver run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trace: Trace,
    pub summary: Value,
}

fn execute(cfg: &Config, out: &Path, checkpoints: Vec<u64>) -> Result<RunOutcome> {
    let mut plan = build_plan(cfg)?;
    plan.opts.checkpoints = checkpoints;
    let trace = run(
        plan.problem.as_ref(),
        &plan.solver,
        plan.x0,
        plan.y0,
        &plan.opts,
    )?;
    ensure_dir(out)?;
    write_trace(out, &trace, cfg.bool_or("trace.timing", false)?)?;
    let first = trace
        .rows
        .first()
        .expect("a run always records its initial row");
    let last = trace
        .rows
        .last()
        .expect("a run always records its final row");
    let summary = json!({
        "problem": trace.meta.problem,
        "seed": cfg.seed()?,
        "iterations": trace.meta.iterations,
        "solver_seconds": trace.meta.solver_seconds,
        "schedule": schedule_json(&plan.solver),
        "sigma": trace.meta.sigma,
        "smoothness": trace.meta.smoothness,
        "initial": first,
        "final": last,
        "initial_stationarity": stationarity(first),
        "final_stationarity": stationarity(last),
        "min_dual_ascent": trace.min_dual_ascent,
        "config": cfg.to_json(),
    });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(RunOutcome { trace, summary })
}

/// Runs one configuration, writing `trace.csv` and `summary.json` to `out`.
pub fn cmd_run(cfg: &Config, out: &Path) -> Result<RunOutcome> {
    execute(cfg, out, Vec::new())
}

/// Slope fit of one trace metric against a tolerance band.
#[derive(Clone, Debug, Serialize)]
pub struct RateReport {
    pub metric: String,
    pub window: String,
    pub grid: Vec<u64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub points: usize,
    pub expected: Option<f64>,
    pub band: Option<(f64, f64)>,
    pub pass: bool,
}

/// Log-spaced grid from `from` to `to` with `per_decade` points per decade.
pub fn log_grid(from: u64, to: u64, per_decade: u32) -> Vec<u64> {
    let (lo, hi) = ((from.max(1) as f64).log10(), (to.max(1) as f64).log10());
    let steps = ((hi - lo) * per_decade as f64).round() as i64;
    let mut grid: Vec<u64> = (0..=steps.max(0))
        .map(|k| 10f64.powf(lo + k as f64 / per_decade as f64).round() as u64)
        .collect();
    grid.dedup();
    grid
}

fn rate_grid(cfg: &Config) -> Result<Option<Vec<u64>>> {
    if let Some(list) = cfg.f64_list("rate.grid")? {
        let mut grid: Vec<u64> = list
            .iter()
            .map(|v| {
                if *v >= 1.0 && v.fract() == 0.0 {
                    Ok(*v as u64)
                } else {
                    Err(HarnessError::Config(format!(
                        "rate.grid entry {v} is not a positive integer"
                    )))
                }
            })
            .collect::<Result<_>>()?;
        grid.sort_unstable();
        grid.dedup();
        return Ok(Some(grid));
    }
    let Some(to) = cfg.u64("rate.to")? else {
        return Ok(None);
    };
    let from = cfg.u64("rate.from")?.unwrap_or(100);
    if from == 0 || from > to {
        return Err(HarnessError::Config(format!(
            "rate grid {from}..{to} is empty"
        )));
    }
    let per_decade = cfg.u64("rate.per_decade")?.unwrap_or(10).max(1) as u32;
    Ok(Some(log_grid(from, to, per_decade)))
}

fn row_metric(r: &TraceRow, metric: &str) -> Result<Option<f64>> {
    Ok(match metric {
        "gap_x" => Some(r.gap_x),
        "gap_y" => Some(r.gap_y),
        "stationarity" => Some(stationarity(r)),
        "avg_gap_x" => r.avg_gap_x,
        "avg_gap_y" => r.avg_gap_y,
        "duality_gap" => r.duality_gap,
        "primal_gap" => r.primal_gap,
        "discrepancy" => r.discrepancy,
        "objective" => Some(r.objective),
        other => {
            return Err(HarnessError::Config(format!(
                "unknown rate.metric {other:?}"
            )))
        }
    })
}

pub fn fit(
    points: &[(u64, f64)],
    trailing: bool,
) -> std::result::Result<RateEstimate, dsmooth::Error> {
    let (ts, gs): (Vec<f64>, Vec<f64>) = points.iter().map(|(t, g)| (*t as f64, *g)).unzip();
    if trailing {
        estimate_rate_trailing_decade(&ts, &gs)
    } else {
        estimate_rate(&ts, &gs)
    }
}

/// Fits the decay exponent of `rate.metric` on a grid read from one
/// anytime run (or from `rate.input`), and checks it against `rate.band`.
pub fn cmd_rate(cfg: &Config, out: &Path) -> Result<RateReport> {
    let metric = cfg
        .str("rate.metric")?
        .unwrap_or_else(|| "avg_gap_y".into());
    let window = cfg
        .str("rate.window")?
        .unwrap_or_else(|| "trailing-decade".into());
    let trailing = match window.as_str() {
        "trailing-decade" => true,
        "all" => false,
        other => {
            return Err(HarnessError::Config(format!(
                "unknown rate.window {other:?}"
            )))
        }
    };
    let band = match cfg.f64_list("rate.band")? {
        None => None,
        Some(b) if b.len() == 2 && b[0] <= b[1] => Some((b[0], b[1])),
        Some(_) => {
            return Err(HarnessError::Config(
                "rate.band must be [lo, hi] with lo <= hi".into(),
            ))
        }
    };
    let grid = rate_grid(cfg)?;
    let points: Vec<(u64, f64)> = if let Some(input) = cfg.path("rate.input")? {
        let all = read_trace_column(&input, &metric)?;
        match &grid {
            Some(g) => all
                .into_iter()
                .filter(|(t, _)| g.binary_search(t).is_ok())
                .collect(),
            None => all.into_iter().filter(|(t, _)| *t > 0).collect(),
        }
    } else {
        let grid = grid.ok_or_else(|| {
            HarnessError::Config("rate needs rate.grid or rate.to (or rate.input)".into())
        })?;
        let max_t = *grid.last().expect("grid is nonempty");
        let mut cfg = cfg.clone();
        cfg.remove("budget.seconds");
        cfg.set("budget.iterations", json!(max_t))?;
        if !cfg.has("metrics.cadence") {
            cfg.set("metrics.cadence", json!(max_t.max(1)))?;
        }
        let outcome = execute(&cfg, out, grid.clone())?;
        let mut pts = Vec::with_capacity(grid.len());
        for r in outcome
            .trace
            .rows
            .iter()
            .filter(|r| grid.binary_search(&r.iter).is_ok())
        {
            let v = row_metric(r, &metric)?.ok_or_else(|| {
                HarnessError::Config(format!(
                    "metric {metric} is not available for {}",
                    outcome.trace.meta.problem
                ))
            })?;
            pts.push((r.iter, v));
        }
        pts
    };
    let est = fit(&points, trailing)?;
    let pass = band.is_none_or(|(lo, hi)| est.slope >= lo && est.slope <= hi);
    let report = RateReport {
        metric,
        window,
        grid: points.iter().map(|p| p.0).collect(),
        values: points.iter().map(|p| p.1).collect(),
        slope: est.slope,
        intercept: est.intercept,
        stderr: est.stderr,
        points: est.points,
        expected: cfg.f64("rate.expected")?,
        band,
        pass,
    };
    ensure_dir(out)?;
    write_json(&out.join("rate.json"), &serde_json::to_value(&report)?)?;
    Ok(report)
}

/// One cell of a sweep as recorded in `index.json`.
#[derive(Clone, Debug, Serialize)]
pub struct SweepCell {
    pub cell: usize,
    pub dir: PathBuf,
    pub params: Value,
    pub ok: bool,
    pub exit_code: i32,
    pub error: Option<String>,
    pub result: Value,
}

/// Worker count: explicit flag, else `MMX_WORKERS`, else available cores.
pub fn worker_count(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var("MMX_WORKERS").ok()?.trim().parse().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn cartesian(axes: &[(String, Vec<Value>)]) -> Vec<Vec<(String, Value)>> {
    let mut cells: Vec<Vec<(String, Value)>> = vec![Vec::new()];
    for (key, values) in axes {
        cells = cells
            .into_iter()
            .flat_map(|cell| {
                values.iter().map(move |v| {
                    let mut c = cell.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    cells
}

fn run_cell(cfg: &Config, command: &str, dir: &Path) -> Result<Value> {
    match command {
        "run" => {
            let o = cmd_run(cfg, dir)?;
            Ok(json!({
                "iterations": o.summary["iterations"],
                "final_stationarity": o.summary["final_stationarity"],
            }))
        }
        "rate" => {
            let r = cmd_rate(cfg, dir)?;
            let v = json!({ "slope": r.slope, "pass": r.pass });
            if r.pass {
                Ok(v)
            } else {
                Err(HarnessError::Failed(format!(
                    "slope {:.4} outside band {:?}",
                    r.slope, r.band
                )))
            }
        }
        other => Err(HarnessError::Config(format!(
            "sweep.command must be run or rate, got {other:?}"
        ))),
    }
}

/// Runs the cartesian product of the `sweep.*` axes on a bounded pool, one
/// subdirectory per cell, and writes `index.json`.
pub fn cmd_sweep(cfg: &Config, out: &Path, workers: usize) -> Result<Vec<SweepCell>> {
    let axes = cfg.sweep_axes()?;
    if axes.is_empty() {
        return Err(HarnessError::Config(
            "sweep needs at least one sweep.<key> = [...] axis".into(),
        ));
    }
    let command = cfg.str("sweep.command")?.unwrap_or_else(|| "run".into());
    let mut base = cfg.clone();
    let sweep_keys: Vec<String> = cfg
        .entries()
        .keys()
        .filter(|k| k.starts_with("sweep."))
        .cloned()
        .collect();
    for k in &sweep_keys {
        base.remove(k);
    }
    let cells = cartesian(&axes);
    ensure_dir(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Io(format!("cannot start worker pool: {e}")))?;
    let results: Vec<SweepCell> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, params)| {
                let dir = out.join(format!("cell-{i:03}"));
                let outcome = (|| {
                    let mut c = base.clone();
                    for (k, v) in params {
                        c.set(k, v.clone())?;
                    }
                    run_cell(&c, &command, &dir)
                })();
                let params = Value::Object(params.iter().cloned().collect());
                match outcome {
                    Ok(result) => SweepCell {
                        cell: i,
                        dir,
                        params,
                        ok: true,
                        exit_code: 0,
                        error: None,
                        result,
                    },
                    Err(e) => SweepCell {
                        cell: i,
                        dir,
                        params,
                        ok: false,
                        exit_code: e.exit_code(),
                        error: Some(e.to_string()),
                        result: Value::Null,
                    },
                }
            })
            .collect()
    });
    write_json(
        &out.join("index.json"),
        &json!({ "command": command, "workers": workers, "cells": results }),
    )?;
    Ok(results)
}

/// Writes the five dictionary-learning matrices as MMX1 files plus
/// `manifest.json`.
pub fn cmd_generate(cfg: &Config, out: &Path) -> Result<Value> {
    let sizes = dl_sizes(cfg)?;
    let seed = cfg.seed()?;
    let data = dl_generate(sizes, seed)?;
    ensure_dir(out)?;
    let mats = [&data.a, &data.a_new, &data.c_tilde, &data.d0, &data.c0];
    let mut files = serde_json::Map::new();
    for (name, m) in DL_FILES.iter().zip(mats) {
        matrix_io::write_matrix_bin(out.join(name), m)
            .map_err(|e| HarnessError::Io(e.to_string()))?;
        files.insert(name.to_string(), json!([m.nrows(), m.ncols()]));
    }
    let manifest = json!({ "seed": seed, "sizes": sizes, "format": "MMX1", "files": files });
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
