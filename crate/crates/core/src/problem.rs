//! The payoff-problem abstraction shared by solvers, metrics and problems.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::point::Point;
use crate::set::FeasibleSet;

/// Smoothness and curvature constants supplied by a problem's constructor.
///
/// `lxx`, `lyx`, `lyy` bound the partial-gradient Lipschitz moduli in the
/// cross form `||grad_x L(x,y) - grad_x L(x',y')|| <= lxx ||x-x'|| + lyx ||y-y'||`
/// (and symmetrically for `grad_y`). `mu` is the strong-concavity modulus of
/// `L(x, .)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Smoothness {
    pub lxx: f64,
    pub lyx: f64,
    pub lyy: f64,
    pub mu: f64,
}

/// A smooth payoff `L(x, y)` to be minimized over `x` and maximized over `y`.
///
/// Implementations are immutable after construction and must be `Sync` so a
/// single instance can feed several solver workers.
pub trait PayoffProblem: Send + Sync {
    fn name(&self) -> &str;

    fn x_set(&self) -> &FeasibleSet;
    fn y_set(&self) -> &FeasibleSet;

    fn value(&self, x: &Point, y: &Point) -> Result<f64>;
    fn grad_x(&self, x: &Point, y: &Point) -> Result<Point>;
    fn grad_y(&self, x: &Point, y: &Point) -> Result<Point>;

    /// Both partial gradients; override when they share work.
    fn grads(&self, x: &Point, y: &Point) -> Result<(Point, Point)> {
        Ok((self.grad_x(x, y)?, self.grad_y(x, y)?))
    }

    fn smoothness(&self) -> Smoothness;

    fn is_convex_in_x(&self) -> bool;

    /// Initial iterate used by the experiments for this family.
    fn initial_point(&self) -> (Point, Point);

    /// Exact maximizer of `L(x, .)` over Y.
    fn best_response_y(&self, _x: &Point) -> Result<Option<Point>> {
        Ok(None)
    }

    /// Exact maximizer of `L(x, .) - (beta/2)||. - y0||^2` over Y.
    fn best_response_y_smoothed(
        &self,
        _x: &Point,
        _beta: f64,
        _y0: &Point,
    ) -> Result<Option<Point>> {
        Ok(None)
    }

    /// Exact minimizer of `L(., y)` over X (convex-concave families only).
    fn best_response_x(&self, _y: &Point) -> Result<Option<Point>> {
        Ok(None)
    }

    /// `min_X max_Y L` when known in closed form or from an exact solve.
    fn optimal_value(&self) -> Option<f64> {
        None
    }
}
