//! Single-loop minimax solvers: LMO-LMO, LMO-PO and PO-LMO.
//!
//! Each iteration reads the gradients at `(x_t, y_t)` once, moves the primal
//! variable with either a conditional-gradient step or a projected-gradient
//! step, and moves the dual variable on the smoothed payoff `L_{beta_t}`
//! with either an adaptive conditional-gradient step or a projected-gradient
//! step of length `1 / (Lyy + beta_t)`. All schedules depend on `t` only, so
//! a run can be stopped at any iteration.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;
use crate::point::{CompensatedScalar, CompensatedSum, Point};
use crate::problem::PayoffProblem;
use crate::smoothing::{regularize_grad, regularize_value, SmoothingState, StepSchedule};

/// `||u - y||^2` below this is treated as a zero dual direction.
pub const DEGENERATE_DIRECTION_SQ: f64 = 1e-24;
/// Slack allowed on `grad^T (u - y) >= 0` before an LMO is declared broken.
const LMO_NUMERATOR_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "LMO-LMO")]
    LmoLmo,
    #[serde(rename = "LMO-PO")]
    LmoPo,
    #[serde(rename = "PO-LMO")]
    PoLmo,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::LmoLmo, Mode::LmoPo, Mode::PoLmo];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::LmoLmo => "LMO-LMO",
            Mode::LmoPo => "LMO-PO",
            Mode::PoLmo => "PO-LMO",
        }
    }

    /// Whether the primal variable moves by projection.
    pub fn primal_projects(&self) -> bool {
        matches!(self, Mode::PoLmo)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('_', "-").as_str() {
            "LMO-LMO" => Ok(Mode::LmoLmo),
            "LMO-PO" => Ok(Mode::LmoPo),
            "PO-LMO" => Ok(Mode::PoLmo),
            _ => Err(Error::Config(format!(
                "unknown mode {s:?}; expected LMO-LMO, LMO-PO or PO-LMO"
            ))),
        }
    }
}

/// Problem class: (non)convexity in x, (strong) concavity in y, and whether
/// Y is a strongly convex set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "NC-C")]
    NcC,
    #[serde(rename = "NC-SC")]
    NcSc,
    #[serde(rename = "NC-C+SCY")]
    NcCScy,
    #[serde(rename = "NC-SC+SCY")]
    NcScScy,
    #[serde(rename = "C-C")]
    CC,
    #[serde(rename = "C-SC")]
    CSc,
    #[serde(rename = "C-C+SCY")]
    CCScy,
    #[serde(rename = "C-SC+SCY")]
    CScScy,
}

impl Regime {
    pub const ALL: [Regime; 8] = [
        Regime::NcC,
        Regime::NcSc,
        Regime::NcCScy,
        Regime::NcScScy,
        Regime::CC,
        Regime::CSc,
        Regime::CCScy,
        Regime::CScScy,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::NcC => "NC-C",
            Regime::NcSc => "NC-SC",
            Regime::NcCScy => "NC-C+SCY",
            Regime::NcScScy => "NC-SC+SCY",
            Regime::CC => "C-C",
            Regime::CSc => "C-SC",
            Regime::CCScy => "C-C+SCY",
            Regime::CScScy => "C-SC+SCY",
        }
    }

    pub fn strongly_concave(&self) -> bool {
        matches!(
            self,
            Regime::NcSc | Regime::NcScScy | Regime::CSc | Regime::CScScy
        )
    }

    pub fn strongly_convex_y(&self) -> bool {
        matches!(
            self,
            Regime::NcCScy | Regime::NcScScy | Regime::CCScy | Regime::CScScy
        )
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_uppercase().replace(['_', ' '], "");
        Regime::ALL
            .into_iter()
            .find(|r| r.as_str().replace(' ', "") == norm)
            .ok_or_else(|| Error::Config(format!("unknown regime {s:?}")))
    }
}

/// Exponents of the anytime schedules for every supported (regime, mode).
/// `b = None` means `beta_t = 0`. PO-LMO rows carry the step scale.
const PRESET_TABLE: &[(Mode, Regime, f64, Option<f64>, Option<f64>)] = &[
    (Mode::LmoLmo, Regime::NcC, 5.0 / 6.0, Some(1.0 / 6.0), None),
    (Mode::LmoLmo, Regime::NcSc, 3.0 / 4.0, None, None),
    (
        Mode::LmoLmo,
        Regime::NcCScy,
        4.0 / 5.0,
        Some(1.0 / 5.0),
        None,
    ),
    (Mode::LmoLmo, Regime::NcScScy, 2.0 / 3.0, None, None),
    (Mode::LmoLmo, Regime::CC, 1.0, Some(1.0 / 5.0), None),
    (Mode::LmoLmo, Regime::CSc, 1.0, None, None),
    (Mode::LmoLmo, Regime::CCScy, 1.0, Some(1.0 / 4.0), None),
    (Mode::LmoLmo, Regime::CScScy, 1.0, None, None),
    (Mode::LmoPo, Regime::NcC, 3.0 / 4.0, Some(1.0 / 4.0), None),
    (Mode::LmoPo, Regime::NcSc, 1.0 / 2.0, None, None),
    (Mode::LmoPo, Regime::CC, 1.0, Some(1.0 / 3.0), None),
    (Mode::LmoPo, Regime::CSc, 1.0, None, None),
    (
        Mode::PoLmo,
        Regime::NcC,
        2.0 / 3.0,
        Some(1.0 / 6.0),
        Some(0.2),
    ),
    (Mode::PoLmo, Regime::NcSc, 1.0 / 2.0, None, Some(0.2)),
    (
        Mode::PoLmo,
        Regime::NcCScy,
        3.0 / 5.0,
        Some(1.0 / 5.0),
        Some(0.75),
    ),
    (Mode::PoLmo, Regime::NcScScy, 1.0 / 3.0, None, Some(0.75)),
    (
        Mode::PoLmo,
        Regime::CC,
        2.0 / 3.0,
        Some(1.0 / 3.0),
        Some(0.2),
    ),
    (Mode::PoLmo, Regime::CSc, 1.0 / 2.0, None, Some(0.2)),
    (Mode::PoLmo, Regime::CScScy, 1.0 / 3.0, None, Some(0.75)),
];

/// Default smoothing scale `C` for regimes that smooth.
pub const DEFAULT_SMOOTHING_SCALE: f64 = 1.0;
/// Default coefficient `A` of the projected-primal step.
pub const DEFAULT_STEP_COEF: f64 = 1.0;

/// Resolved schedule constants for one (regime, mode) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimePreset {
    pub regime: Regime,
    pub mode: Mode,
    /// Step exponent `a`.
    pub a: f64,
    /// Smoothing exponent `b` (0 when `beta_t = 0`).
    pub b: f64,
    /// Smoothing scale `C` (0 when `beta_t = 0`).
    pub c: f64,
    /// Coefficient `A` of the projected-primal step.
    pub a_coef: f64,
    /// Scale `s` of the projected-primal step (PO-LMO only).
    pub scale: Option<f64>,
}

pub fn preset(regime: Regime, mode: Mode) -> Result<RegimePreset> {
    let row = PRESET_TABLE
        .iter()
        .find(|(m, r, ..)| *m == mode && *r == regime)
        .ok_or_else(|| Error::UnsupportedRegime {
            regime: regime.to_string(),
            mode: mode.to_string(),
            valid: valid_regimes(mode).join(", "),
        })?;
    let (_, _, a, b, scale) = *row;
    Ok(RegimePreset {
        regime,
        mode,
        a,
        b: b.unwrap_or(0.0),
        c: if b.is_some() {
            DEFAULT_SMOOTHING_SCALE
        } else {
            0.0
        },
        a_coef: DEFAULT_STEP_COEF,
        scale,
    })
}

pub fn valid_regimes(mode: Mode) -> Vec<&'static str> {
    PRESET_TABLE
        .iter()
        .filter(|(m, ..)| *m == mode)
        .map(|(_, r, ..)| r.as_str())
        .collect()
}

impl RegimePreset {
    /// Overrides the smoothing scale; ignored for `beta_t = 0` regimes.
    pub fn with_smoothing_scale(mut self, c: f64) -> Self {
        if self.c > 0.0 {
            self.c = c;
        }
        self
    }

    pub fn with_step_coef(mut self, a_coef: f64) -> Self {
        self.a_coef = a_coef;
        self
    }

    /// Builds the concrete schedules for `problem` with reference point `y0`.
    pub fn resolve(&self, problem: &dyn PayoffProblem, y0: Point) -> Result<SolverConfig> {
        let s = problem.smoothness();
        if self.regime.strongly_concave() && !(s.mu > 0.0) {
            return Err(Error::Config(format!(
                "regime {} sets beta_t = 0 but problem {} has mu = 0",
                self.regime,
                problem.name()
            )));
        }
        let smoothing = SmoothingState::new(y0, self.c, self.b, s.mu)?;
        let step = match self.scale {
            Some(scale) => StepSchedule::po_lmo(scale, self.a_coef, self.a, self.b, self.c, &s)?,
            None => StepSchedule::power(self.a),
        };
        SolverConfig::new(self.mode, smoothing, step)
    }
}

/// Horizon-tuned constant-parameter variants of the LMO-LMO and LMO-PO loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HorizonVariant {
    /// LMO-LMO loop with `tau = K^(-5/6)`, `beta = 1e-2 K^(-1/6)`.
    #[serde(rename = "R-PDCG")]
    RPdcg,
    /// LMO-PO loop with `tau = K^(-3/4)`, `beta = 1e-2 K^(-1/4)`.
    #[serde(rename = "CG-RPGA")]
    CgRpga,
}

impl FromStr for HorizonVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "R-PDCG" | "RPDCG" => Ok(HorizonVariant::RPdcg),
            "CG-RPGA" | "CGRPGA" => Ok(HorizonVariant::CgRpga),
            _ => Err(Error::Config(format!("unknown horizon variant {s:?}"))),
        }
    }
}

pub fn horizon_config(
    variant: HorizonVariant,
    horizon: u64,
    problem: &dyn PayoffProblem,
    y0: Point,
) -> Result<SolverConfig> {
    if horizon == 0 {
        return Err(Error::Config("horizon K must be positive".into()));
    }
    let k = horizon as f64;
    let (mode, tau, beta) = match variant {
        HorizonVariant::RPdcg => (Mode::LmoLmo, k.powf(-5.0 / 6.0), 1e-2 * k.powf(-1.0 / 6.0)),
        HorizonVariant::CgRpga => (Mode::LmoPo, k.powf(-0.75), 1e-2 * k.powf(-0.25)),
    };
    let smoothing = SmoothingState::new(y0, beta, 0.0, problem.smoothness().mu)?;
    SolverConfig::new(mode, smoothing, StepSchedule::Constant { value: tau })
}

/// Everything a step function needs besides the problem and the state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub mode: Mode,
    pub smoothing: SmoothingState,
    pub step: StepSchedule,
}

impl SolverConfig {
    pub fn new(mode: Mode, smoothing: SmoothingState, step: StepSchedule) -> Result<Self> {
        step.validate()?;
        smoothing.require_curvature()?;
        if !mode.primal_projects() && step.tau_at(0) > 1.0 {
            return Err(Error::Config(format!(
                "conditional-gradient step tau_0 = {} exceeds 1",
                step.tau_at(0)
            )));
        }
        Ok(SolverConfig {
            mode,
            smoothing,
            step,
        })
    }

    /// `sigma = tau_0`, the default parameter of the projected-gradient gap.
    pub fn default_sigma(&self) -> f64 {
        self.step.tau_at(0)
    }
}

/// Solver iterate plus running sums for the ergodic averages over
/// `t = 0..=T`.
#[derive(Clone, Debug)]
pub struct IterateState {
    pub x: Point,
    pub y: Point,
    pub t: u64,
    x_sum: CompensatedSum,
    y_sum: CompensatedSum,
    /// Parameters of the step that produced this iterate.
    pub last_tau: Option<f64>,
    pub last_beta: Option<f64>,
    pub last_gamma: Option<f64>,
}

impl IterateState {
    pub fn new(problem: &dyn PayoffProblem, x: Point, y: Point) -> Result<Self> {
        x.check_shape(problem.x_set().shape())?;
        y.check_shape(problem.y_set().shape())?;
        if !problem.x_set().contains(&x) || !problem.y_set().contains(&y) {
            return Err(Error::arg("initial point is not feasible"));
        }
        let mut x_sum = CompensatedSum::new(x.shape().clone());
        let mut y_sum = CompensatedSum::new(y.shape().clone());
        x_sum.add(&x);
        y_sum.add(&y);
        Ok(IterateState {
            x,
            y,
            t: 0,
            x_sum,
            y_sum,
            last_tau: None,
            last_beta: None,
            last_gamma: None,
        })
    }

    pub fn x_avg(&self) -> Point {
        self.x_sum.mean().expect("sum holds x_0")
    }

    pub fn y_avg(&self) -> Point {
        self.y_sum.mean().expect("sum holds y_0")
    }

    fn advance(&self, x: Point, y: Point, tau: f64, beta: f64, gamma: f64) -> IterateState {
        let mut x_sum = self.x_sum.clone();
        let mut y_sum = self.y_sum.clone();
        x_sum.add(&x);
        y_sum.add(&y);
        IterateState {
            x,
            y,
            t: self.t + 1,
            x_sum,
            y_sum,
            last_tau: Some(tau),
            last_beta: Some(beta),
            last_gamma: Some(gamma),
        }
    }
}

/// Result of one adaptive dual conditional-gradient step.
#[derive(Clone, Debug)]
pub struct DualStep {
    pub y_next: Point,
    pub u: Point,
    pub gamma: f64,
}

/// Adaptive dual step on `L_{beta_t}(x, .)`: `u = LMO_Y(-g)`,
/// `gamma = min{g^T (u - y) / ((Lyy + beta_t) ||u - y||^2), 1}`.
pub fn dual_adaptive_step(
    problem: &dyn PayoffProblem,
    smoothing: &SmoothingState,
    x: &Point,
    y: &Point,
    t: u64,
) -> Result<DualStep> {
    let beta = smoothing.beta_at(t);
    let g = regularize_grad(&problem.grad_y(x, y)?, beta, y, &smoothing.y0);
    dual_lmo_update(problem, beta, y, &g)
}

fn dual_lmo_update(
    problem: &dyn PayoffProblem,
    beta: f64,
    y: &Point,
    g: &Point,
) -> Result<DualStep> {
    let u = problem.y_set().lmo(&g.scale(-1.0))?;
    let dir = u.sub(y);
    let dist_sq = dir.norm_sq();
    let numer = g.dot(&dir);
    if numer < -LMO_NUMERATOR_SLACK * (1.0 + g.norm() * dist_sq.sqrt()) {
        return Err(Error::numerical(format!(
            "dual LMO returned a non-ascent vertex (g^T(u - y) = {numer:.3e})"
        )));
    }
    let numer = numer.max(0.0);
    let curvature = problem.smoothness().lyy + beta;
    let gamma = if dist_sq < DEGENERATE_DIRECTION_SQ || numer == 0.0 {
        0.0
    } else if curvature <= 0.0 {
        1.0
    } else {
        (numer / (curvature * dist_sq)).clamp(0.0, 1.0)
    };
    let y_next = if gamma == 0.0 {
        y.clone()
    } else {
        y.axpy(gamma, &dir)
    };
    Ok(DualStep { y_next, u, gamma })
}

fn dual_po_update(
    problem: &dyn PayoffProblem,
    beta: f64,
    y: &Point,
    g: &Point,
) -> Result<(Point, f64)> {
    let curvature = problem.smoothness().lyy + beta;
    if !(curvature > 0.0) {
        return Err(Error::Config(
            "dual projection step needs Lyy + beta_t > 0; use C > 0 or a problem with Lyy > 0"
                .into(),
        ));
    }
    let gamma = 1.0 / curvature;
    Ok((problem.y_set().project(&y.axpy(gamma, g))?, gamma))
}

/// Quantities computed at `(x_t, y_t)` during a step, reusable for metrics.
#[derive(Clone, Debug)]
pub struct StepWork {
    pub grad_x: Point,
    pub grad_y: Point,
    /// Primal LMO output `v_t` for conditional-gradient primal modes.
    pub primal_vertex: Option<Point>,
}

/// One iteration of the configured algorithm.
pub fn step(
    problem: &dyn PayoffProblem,
    config: &SolverConfig,
    state: &IterateState,
) -> Result<(IterateState, StepWork)> {
    let t = state.t;
    let (x, y) = (&state.x, &state.y);
    let (gx, gy) = problem.grads(x, y)?;
    if !gx.is_finite() || !gy.is_finite() {
        return Err(Error::NonFinite("gradient".into()).at_iter(t));
    }
    let tau = config.step.tau_at(t);
    let beta = config.smoothing.beta_at(t);

    let (x_next, vertex) = match config.mode {
        Mode::LmoLmo | Mode::LmoPo => {
            let v = problem.x_set().lmo(&gx)?;
            (x.towards(&v, tau), Some(v))
        }
        Mode::PoLmo => (problem.x_set().project(&x.axpy(-tau, &gx))?, None),
    };

    // the dual block reads (x_t, y_t), as written in the algorithms
    let g_reg = regularize_grad(&gy, beta, y, &config.smoothing.y0);
    let (y_next, gamma) = match config.mode {
        Mode::LmoLmo | Mode::PoLmo => {
            let d = dual_lmo_update(problem, beta, y, &g_reg)?;
            (d.y_next, d.gamma)
        }
        Mode::LmoPo => dual_po_update(problem, beta, y, &g_reg)?,
    };

    let next = state.advance(x_next, y_next, tau, beta, gamma);
    Ok((
        next,
        StepWork {
            grad_x: gx,
            grad_y: gy,
            primal_vertex: vertex,
        },
    ))
}

fn step_checked(
    problem: &dyn PayoffProblem,
    smoothing: &SmoothingState,
    schedule: &StepSchedule,
    state: &IterateState,
    mode: Mode,
) -> Result<IterateState> {
    let config = SolverConfig {
        mode,
        smoothing: smoothing.clone(),
        step: schedule.clone(),
    };
    step(problem, &config, state).map(|(s, _)| s)
}

/// LMO primal step and adaptive LMO dual step.
pub fn step_lmo_lmo(
    problem: &dyn PayoffProblem,
    smoothing: &SmoothingState,
    schedule: &StepSchedule,
    state: &IterateState,
) -> Result<IterateState> {
    step_checked(problem, smoothing, schedule, state, Mode::LmoLmo)
}

/// LMO primal step and projected dual step with `gamma_t = 1/(Lyy + beta_t)`.
pub fn step_lmo_po(
    problem: &dyn PayoffProblem,
    smoothing: &SmoothingState,
    schedule: &StepSchedule,
    state: &IterateState,
) -> Result<IterateState> {
    step_checked(problem, smoothing, schedule, state, Mode::LmoPo)
}

/// Projected primal step and adaptive LMO dual step.
pub fn step_po_lmo(
    problem: &dyn PayoffProblem,
    smoothing: &SmoothingState,
    schedule: &StepSchedule,
    state: &IterateState,
) -> Result<IterateState> {
    step_checked(problem, smoothing, schedule, state, Mode::PoLmo)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Budget {
    Iterations(u64),
    /// Solver time only; metric evaluation is excluded.
    Seconds(f64),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunOptions {
    pub budget: Budget,
    /// Record a row every `cadence` iterations (plus t = 0 and the final one).
    pub cadence: u64,
    /// Extra rows at log-spaced iterations, this many per decade.
    pub log_rows_per_decade: Option<u32>,
    /// Parameter of the projected-gradient gap; defaults to `tau_0`.
    pub sigma: Option<f64>,
    /// Inner iterations of the certified dual-gap fallback.
    pub inner_iters: usize,
    /// Evaluate gaps at every iterate to maintain running averages.
    pub track_averages: bool,
    /// Measure `L_beta(x_t, y_{t+1}) - L_beta(x_t, y_t)` at every step.
    pub check_dual_ascent: bool,
    /// Stop at the first recorded row with `gap_x + gap_y <= tolerance`.
    pub tolerance: Option<f64>,
    /// Extra iterations that always get a row.
    pub checkpoints: Vec<u64>,
}

impl RunOptions {
    pub fn iterations(t: u64) -> Self {
        RunOptions {
            budget: Budget::Iterations(t),
            cadence: 10,
            log_rows_per_decade: None,
            sigma: None,
            inner_iters: 100,
            track_averages: true,
            check_dual_ascent: false,
            tolerance: None,
            checkpoints: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: u64,
    pub wall_ms: f64,
    pub tau: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub objective: f64,
    /// Frank-Wolfe gap for LMO-primal modes, projected-gradient gap for PO-LMO.
    pub gap_x: f64,
    /// Exact dual gap, or the certified lower estimate when no exact oracle.
    pub gap_y: f64,
    /// Certificate radius when `gap_y` is an estimate.
    pub gap_y_cert: Option<f64>,
    pub avg_gap_x: Option<f64>,
    pub avg_gap_y: Option<f64>,
    /// Duality gap at the ergodic averages (convex-concave with oracles).
    pub duality_gap: Option<f64>,
    /// `f(x_t) - min f` when the optimal value is known.
    pub primal_gap: Option<f64>,
    /// Smoothed discrepancy `H_t` when a smoothed best response exists.
    pub discrepancy: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceMeta {
    pub problem: String,
    pub config: SolverConfig,
    pub sigma: f64,
    pub smoothness: crate::problem::Smoothness,
    pub iterations: u64,
    pub solver_seconds: f64,
}

/// Ergodic quantities at the end of a run.
#[derive(Clone, Debug)]
pub struct ErgodicSummary {
    pub t: u64,
    pub x_avg: Point,
    pub y_avg: Point,
    /// Mean Frank-Wolfe gap over t = 0..=T.
    pub mean_gap_lmo_x: Option<f64>,
    pub mean_gap_y: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
    pub final_state: IterateState,
    pub ergodic: ErgodicSummary,
    /// Smallest observed `L_beta(x_t, y_{t+1}) - L_beta(x_t, y_t)`.
    pub min_dual_ascent: Option<f64>,
}

struct Accumulators {
    gap_x: CompensatedScalar,
    gap_lmo: CompensatedScalar,
    gap_y: CompensatedScalar,
}

struct LogGrid {
    per_decade: u32,
    k: u32,
}

impl LogGrid {
    fn target(&self) -> u64 {
        10f64.powf(self.k as f64 / self.per_decade as f64).round() as u64
    }

    fn hits(&mut self, t: u64) -> bool {
        while self.target() < t {
            self.k += 1;
        }
        self.target() == t
    }
}

/// Runs the configured solver from `(x0, y0)` under a budget, recording
/// metric rows. Iteration budgets are fully deterministic; wall-clock
/// budgets produce a prefix of the same sequence.
pub fn run(
    problem: &dyn PayoffProblem,
    config: &SolverConfig,
    x0: Point,
    y0: Point,
    opts: &RunOptions,
) -> Result<Trace> {
    match opts.budget {
        Budget::Iterations(_) => {}
        Budget::Seconds(s) if s > 0.0 && s.is_finite() => {}
        Budget::Seconds(s) => return Err(Error::arg(format!("time budget {s} must be positive"))),
    }
    if opts.cadence == 0 {
        return Err(Error::arg("metric cadence must be at least 1"));
    }
    if opts.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("checkpoints must be strictly increasing"));
    }
    let sigma = opts.sigma.unwrap_or_else(|| config.default_sigma());
    if !(sigma > 0.0) {
        return Err(Error::arg("gap parameter sigma must be positive"));
    }

    let mut state = IterateState::new(problem, x0, y0)?;
    let mut acc = Accumulators {
        gap_x: CompensatedScalar::default(),
        gap_lmo: CompensatedScalar::default(),
        gap_y: CompensatedScalar::default(),
    };
    let mut rows = Vec::new();
    let mut log_grid = opts.log_rows_per_decade.map(|n| LogGrid {
        per_decade: n.max(1),
        k: 0,
    });
    let mut solver_time = 0.0f64;
    let mut min_ascent: Option<f64> = None;
    let mut converged = false;
    loop {
        let t = state.t;
        let done = converged
            || match opts.budget {
                Budget::Iterations(n) => t >= n,
                Budget::Seconds(s) => solver_time >= s,
            };
        let wants_row = done
            || t % opts.cadence == 0
            || log_grid.as_mut().is_some_and(|g| g.hits(t))
            || opts.checkpoints.binary_search(&t).is_ok();

        // the step at t evaluates the gradients at (x_t, y_t); metrics reuse them
        let (next, work) = if done {
            let (gx, gy) = problem
                .grads(&state.x, &state.y)
                .map_err(|e| e.at_iter(t))?;
            let work = StepWork {
                grad_x: gx,
                grad_y: gy,
                primal_vertex: None,
            };
            (None, work)
        } else {
            let started = Instant::now();
            let (next, work) = step(problem, config, &state).map_err(|e| e.at_iter(t))?;
            solver_time += started.elapsed().as_secs_f64();
            (Some(next), work)
        };

        if opts.track_averages || wants_row {
            let point = PointMetrics::evaluate(problem, config, &state, &work, sigma, opts)
                .map_err(|e| e.at_iter(t))?;
            if opts.track_averages {
                acc.gap_x.add(point.gap_x);
                acc.gap_lmo.add(point.gap_lmo);
                acc.gap_y.add(point.gap_y);
            }
            if wants_row {
                if let Some(tol) = opts.tolerance {
                    converged = point.gap_x + point.gap_y <= tol;
                }
                rows.push(
                    make_row(problem, config, &state, &point, &acc, opts, solver_time)
                        .map_err(|e| e.at_iter(t))?,
                );
            }
        }

        let Some(next) = next else { break };
        if opts.check_dual_ascent {
            let beta = config.smoothing.beta_at(t);
            let y0 = &config.smoothing.y0;
            let before = regularize_value(problem.value(&state.x, &state.y)?, beta, &state.y, y0);
            let after = regularize_value(problem.value(&state.x, &next.y)?, beta, &next.y, y0);
            let d = after - before;
            min_ascent = Some(min_ascent.map_or(d, |m: f64| m.min(d)));
        }
        state = next;
    }

    let ergodic = ErgodicSummary {
        t: state.t,
        x_avg: state.x_avg(),
        y_avg: state.y_avg(),
        mean_gap_lmo_x: acc.gap_lmo.mean().filter(|_| opts.track_averages),
        mean_gap_y: acc.gap_y.mean().filter(|_| opts.track_averages),
    };
    Ok(Trace {
        meta: TraceMeta {
            problem: problem.name().to_string(),
            config: config.clone(),
            sigma,
            smoothness: problem.smoothness(),
            iterations: state.t,
            solver_seconds: solver_time,
        },
        rows,
        final_state: state,
        ergodic,
        min_dual_ascent: min_ascent,
    })
}

struct PointMetrics {
    objective: f64,
    gap_x: f64,
    gap_lmo: f64,
    gap_y: f64,
    gap_y_cert: Option<f64>,
}

impl PointMetrics {
    fn evaluate(
        problem: &dyn PayoffProblem,
        config: &SolverConfig,
        state: &IterateState,
        work: &StepWork,
        sigma: f64,
        opts: &RunOptions,
    ) -> Result<Self> {
        let (x, y) = (&state.x, &state.y);
        let objective = problem.value(x, y)?;
        if !objective.is_finite() {
            return Err(Error::NonFinite("objective".into()));
        }
        let gap_lmo = match &work.primal_vertex {
            Some(v) => work.grad_x.dot(&x.sub(v)),
            None => metrics::fw_gap(problem.x_set(), x, &work.grad_x)?,
        };
        let gap_x = if config.mode.primal_projects() {
            metrics::projected_gradient_gap(problem.x_set(), x, &work.grad_x, sigma)?
        } else {
            gap_lmo
        };
        let (gap_y, gap_y_cert) = match problem.best_response_y(x)? {
            Some(y_star) => ((problem.value(x, &y_star)? - objective).max(0.0), None),
            None => {
                let est = metrics::gap_dual_y_approx(problem, x, y, opts.inner_iters)?;
                (est.estimate, Some(est.certificate))
            }
        };
        Ok(PointMetrics {
            objective,
            gap_x,
            gap_lmo,
            gap_y,
            gap_y_cert,
        })
    }
}

fn make_row(
    problem: &dyn PayoffProblem,
    config: &SolverConfig,
    state: &IterateState,
    point: &PointMetrics,
    acc: &Accumulators,
    opts: &RunOptions,
    solver_time: f64,
) -> Result<TraceRow> {
    // the ergodic bound is checked at every row of a convex-concave run
    let duality_gap = if opts.track_averages && problem.is_convex_in_x() {
        let ergodic = ErgodicSummary {
            t: state.t,
            x_avg: state.x_avg(),
            y_avg: state.y_avg(),
            mean_gap_lmo_x: acc.gap_lmo.mean(),
            mean_gap_y: acc.gap_y.mean(),
        };
        match metrics::duality_gap_ergodic(problem, &ergodic) {
            Ok(gap) => Some(gap),
            Err(Error::Capability(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let primal_gap = metrics::primal_opt_gap(problem, &state.x)?;
    let discrepancy =
        metrics::discrepancy_h(problem, &config.smoothing, &state.x, &state.y, state.t).ok();
    Ok(TraceRow {
        iter: state.t,
        wall_ms: solver_time * 1e3,
        tau: state.last_tau,
        beta: state.last_beta,
        gamma: state.last_gamma,
        objective: point.objective,
        gap_x: point.gap_x,
        gap_y: point.gap_y,
        gap_y_cert: point.gap_y_cert,
        avg_gap_x: acc.gap_x.mean().filter(|_| opts.track_averages),
        avg_gap_y: acc.gap_y.mean().filter(|_| opts.track_averages),
        duality_gap,
        primal_gap,
        discrepancy,
    })
}
