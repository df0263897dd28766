//! Single-loop conditional-gradient methods for constrained minimax problems
//! `min_{x in X} max_{y in Y} L(x, y)`.
//!
//! The solvers mix linear-minimization oracles (LMO) and projection oracles
//! (PO) on the primal and dual blocks and stabilize the dual block with a
//! vanishing quadratic regularizer `(beta_t / 2) ||y - y0||^2`.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod error;
pub mod metrics;
pub mod oracles;
pub mod point;
pub mod problem;
pub mod problems;
pub mod rng;
pub mod set;
pub mod smoothing;
pub mod solvers;

pub use error::{Error, Result};
pub use point::{Point, Shape};
pub use problem::{PayoffProblem, Smoothness};
pub use set::{FeasibleSet, SetKind};
pub use smoothing::{SmoothingState, StepSchedule};
pub use solvers::{Budget, Mode, Regime, RunOptions, SolverConfig, Trace, TraceRow};
