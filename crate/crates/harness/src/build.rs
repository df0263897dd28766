//! Turns a [`Config`] into a concrete problem, solver configuration and run
//! options.

use std::path::Path;

use dsmooth::problems::{
    dictionary, dl_generate, matrix_io, random_payoff, random_quadratic_saddle, rc_synthetic,
    read_libsvm, robust, DictionaryLearning, DlData, DlSizes, MatrixGame, PayoffEntries,
    RobustClassification,
};
use dsmooth::solvers::{horizon_config, preset, HorizonVariant, RegimePreset};
use dsmooth::{
    Budget, Mode, PayoffProblem, Point, Regime, RunOptions, SmoothingState, SolverConfig,
    StepSchedule,
};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::config::{Config, Result};
use crate::error::HarnessError;

/// Matrix file names written by `generate` and read back via `problem.data_dir`.
pub const DL_FILES: [&str; 5] = ["a.mmx", "a_new.mmx", "c_tilde.mmx", "d0.mmx", "c0.mmx"];

/// Default scale `s` of an explicit projected-primal schedule.
pub const DEFAULT_PO_SCALE: f64 = 0.2;

fn cfg_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

pub fn dl_sizes(cfg: &Config) -> Result<DlSizes> {
    let mut sizes = match cfg.str("problem.sizes")?.as_deref() {
        None | Some("desk") => DlSizes::DESK,
        Some("full") => DlSizes::FULL,
        Some(other) => {
            return Err(cfg_err(format!(
                "problem.sizes must be desk or full, got {other:?}"
            )))
        }
    };
    for (key, slot) in [
        ("problem.m", &mut sizes.m),
        ("problem.n", &mut sizes.n),
        ("problem.p", &mut sizes.p),
        ("problem.l", &mut sizes.l),
        ("problem.q", &mut sizes.q),
        ("problem.n_new", &mut sizes.n_new),
    ] {
        if let Some(v) = cfg.u64(key)? {
            *slot = v as usize;
        }
    }
    Ok(sizes)
}

pub fn read_dl_dir(dir: &Path) -> Result<DlData> {
    let read = |name: &str| -> Result<DMatrix<f64>> { Ok(matrix_io::read_matrix(dir.join(name))?) };
    Ok(DlData {
        a: read(DL_FILES[0])?,
        a_new: read(DL_FILES[1])?,
        c_tilde: read(DL_FILES[2])?,
        d0: read(DL_FILES[3])?,
        c0: read(DL_FILES[4])?,
    })
}

fn payoff_from_json(v: &Value) -> Result<DMatrix<f64>> {
    let bad = || cfg_err("problem.payoff must be a nonempty list of equal-length numeric rows");
    let rows = v.as_array().filter(|r| !r.is_empty()).ok_or_else(bad)?;
    let parsed: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            r.as_array()
                .ok_or_else(bad)?
                .iter()
                .map(|x| x.as_f64().ok_or_else(bad))
                .collect()
        })
        .collect::<Result<_>>()?;
    let cols = parsed[0].len();
    if cols == 0 || parsed.iter().any(|r| r.len() != cols) {
        return Err(bad());
    }
    Ok(DMatrix::from_fn(parsed.len(), cols, |i, j| parsed[i][j]))
}

pub fn build_problem(cfg: &Config) -> Result<Box<dyn PayoffProblem>> {
    let seed = cfg.seed()?;
    let family = cfg
        .str("problem.family")?
        .ok_or_else(|| cfg_err("problem.family is required"))?;
    Ok(match family.as_str() {
        "matrix-game" => {
            let a = if let Some(v) = cfg.get("problem.payoff") {
                payoff_from_json(v)?
            } else if let Some(path) = cfg.path("problem.matrix")? {
                matrix_io::read_matrix(path)?
            } else {
                let entries = match cfg.str("problem.distribution")?.as_deref() {
                    None | Some("gaussian") => PayoffEntries::Gaussian,
                    Some("uniform") => PayoffEntries::Uniform,
                    Some(other) => {
                        return Err(cfg_err(format!("unknown payoff distribution {other:?}")))
                    }
                };
                random_payoff(
                    cfg.usize_or("problem.rows", 10)?,
                    cfg.usize_or("problem.cols", 10)?,
                    entries,
                    seed,
                )?
            };
            Box::new(MatrixGame::new(a)?)
        }
        "quadratic-saddle" => Box::new(random_quadratic_saddle(
            cfg.usize_or("problem.dim", 5)?,
            cfg.f64_or("problem.mu_x", 0.0)?,
            cfg.f64_or("problem.mu_y", 1.0)?,
            cfg.f64_or("problem.coupling_noise", 0.3)?,
            cfg.f64_or("problem.radius", 2.0)?,
            seed,
        )?),
        "dictionary-learning" => {
            let data = match cfg.path("problem.data_dir")? {
                Some(dir) => read_dl_dir(&dir)?,
                None => dl_generate(dl_sizes(cfg)?, seed)?,
            };
            Box::new(DictionaryLearning::from_data(
                &data,
                cfg.f64_or("problem.delta", dictionary::DEFAULT_DELTA)?,
                cfg.f64_or("problem.r", dictionary::DEFAULT_RADIUS)?,
                cfg.f64_or("problem.B", dictionary::DEFAULT_DUAL_BOUND)?,
            )?)
        }
        "robust-classification" => {
            let samples = match cfg.path("problem.data")? {
                Some(path) => read_libsvm(path)?,
                None => rc_synthetic(
                    cfg.usize_or("problem.n", 50)?,
                    cfg.usize_or("problem.d", 20)?,
                    cfg.usize_or("problem.k", 3)?,
                    cfg.f64_or("problem.separation", 1.0)?,
                    seed,
                )?,
            };
            Box::new(RobustClassification::new(
                samples,
                cfg.f64_or("problem.r", robust::DEFAULT_RADIUS)?,
                cfg.f64_or("problem.lambda", robust::DEFAULT_PENALTY)?,
            )?)
        }
        other => return Err(cfg_err(format!("unknown problem.family {other:?}"))),
    })
}

fn parse_with<T: std::str::FromStr<Err = dsmooth::Error>>(
    cfg: &Config,
    key: &str,
) -> Result<Option<T>> {
    cfg.str(key)?
        .map(|s| s.parse::<T>().map_err(HarnessError::from))
        .transpose()
}

/// Resolves the solver schedules. Exactly one of `solver.regime`,
/// explicit `solver.a`, or `solver.variant` must be given.
pub fn build_solver(cfg: &Config, problem: &dyn PayoffProblem, y0: Point) -> Result<SolverConfig> {
    let mode: Option<Mode> = parse_with(cfg, "solver.mode")?;
    let regime: Option<Regime> = parse_with(cfg, "solver.regime")?;
    let variant: Option<HorizonVariant> = parse_with(cfg, "solver.variant")?;
    let explicit = cfg.has("solver.a");
    let chosen = [regime.is_some(), explicit, variant.is_some()]
        .iter()
        .filter(|b| **b)
        .count();
    if chosen != 1 {
        return Err(cfg_err(
            "give exactly one of solver.regime, an explicit solver.a, or solver.variant",
        ));
    }
    if let Some(variant) = variant {
        let horizon = cfg
            .u64("solver.horizon")?
            .ok_or_else(|| cfg_err("solver.variant requires solver.horizon"))?;
        let config = horizon_config(variant, horizon, problem, y0)?;
        if mode.is_some_and(|m| m != config.mode) {
            return Err(cfg_err(format!(
                "solver.variant runs the {} loop",
                config.mode
            )));
        }
        return Ok(config);
    }
    let mode = mode.ok_or_else(|| cfg_err("solver.mode is required"))?;
    if let Some(regime) = regime {
        for key in ["solver.b", "solver.scale"] {
            if cfg.has(key) {
                return Err(cfg_err(format!(
                    "{key} conflicts with the preset solver.regime"
                )));
            }
        }
        let mut p: RegimePreset = preset(regime, mode)?;
        if let Some(c) = cfg.f64("solver.C")? {
            p = p.with_smoothing_scale(c);
        }
        if let Some(a_coef) = cfg.f64("solver.A")? {
            p = p.with_step_coef(a_coef);
        }
        return Ok(p.resolve(problem, y0)?);
    }
    let a = cfg.f64("solver.a")?.expect("checked above");
    let b = cfg.f64_or("solver.b", 0.0)?;
    let c = cfg.f64_or("solver.C", if cfg.has("solver.b") { 1.0 } else { 0.0 })?;
    let s = problem.smoothness();
    let smoothing = SmoothingState::new(y0, c, b, s.mu)?;
    let step = if mode.primal_projects() {
        StepSchedule::po_lmo(
            cfg.f64_or("solver.scale", DEFAULT_PO_SCALE)?,
            cfg.f64_or("solver.A", 1.0)?,
            a,
            b,
            c,
            &s,
        )?
    } else {
        StepSchedule::power(a)
    };
    Ok(SolverConfig::new(mode, smoothing, step)?)
}

pub fn build_budget(cfg: &Config) -> Result<Budget> {
    match (cfg.u64("budget.iterations")?, cfg.f64("budget.seconds")?) {
        (Some(t), None) => Ok(Budget::Iterations(t)),
        (None, Some(s)) if s > 0.0 && s.is_finite() => Ok(Budget::Seconds(s)),
        (None, Some(s)) => Err(cfg_err(format!("budget.seconds must be positive, got {s}"))),
        _ => Err(cfg_err(
            "give exactly one of budget.iterations and budget.seconds",
        )),
    }
}

pub fn build_options(cfg: &Config) -> Result<RunOptions> {
    let mut opts = RunOptions::iterations(0);
    opts.budget = build_budget(cfg)?;
    opts.cadence = cfg.u64("metrics.cadence")?.unwrap_or(opts.cadence);
    if opts.cadence == 0 {
        return Err(cfg_err("metrics.cadence must be at least 1"));
    }
    opts.log_rows_per_decade = cfg.u64("metrics.log_rows")?.map(|v| v as u32);
    opts.sigma = cfg.f64("metrics.sigma")?;
    opts.inner_iters = cfg.usize_or("metrics.inner_iters", opts.inner_iters)?;
    opts.track_averages = cfg.bool_or("metrics.averages", opts.track_averages)?;
    opts.tolerance = cfg.f64("metrics.tolerance")?;
    opts.check_dual_ascent = cfg.bool_or("metrics.dual_ascent", false)?;
    Ok(opts)
}

/// Everything needed to start one solver run.
pub struct Plan {
    pub problem: Box<dyn PayoffProblem>,
    pub solver: SolverConfig,
    pub x0: Point,
    pub y0: Point,
    pub opts: RunOptions,
}

pub fn build_plan(cfg: &Config) -> Result<Plan> {
    let problem = build_problem(cfg)?;
    let (x0, y0) = problem.initial_point();
    let solver = build_solver(cfg, problem.as_ref(), y0.clone())?;
    let opts = build_options(cfg)?;
    Ok(Plan {
        problem,
        solver,
        x0,
        y0,
        opts,
    })
}

/// Resolved schedule constants for summaries.
pub fn schedule_json(solver: &SolverConfig) -> Value {
    let s = &solver.smoothing;
    json!({
        "mode": solver.mode.as_str(),
        "step": solver.step,
        "tau_0": solver.step.tau_at(0),
        "smoothing": { "C": s.c, "b": s.b, "offset": s.offset, "mu": s.mu },
    })
}
