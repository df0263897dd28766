//! Dual dynamic smoothing: the regularized payoff
//! `L_beta(x, y) = L(x, y) - (beta/2) ||y - y0||^2` and the anytime
//! step-size / smoothing schedules that drive the solvers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::problem::{PayoffProblem, Smoothness};

/// Reference point and smoothing sequence `beta_t = C (t + offset)^(-b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingState {
    pub y0: Point,
    pub c: f64,
    pub b: f64,
    /// Shift in the power law; 1 for the anytime presets.
    pub offset: f64,
    pub mu: f64,
}

impl SmoothingState {
    pub fn new(y0: Point, c: f64, b: f64, mu: f64) -> Result<Self> {
        Self::with_offset(y0, c, b, 1.0, mu)
    }

    pub fn with_offset(y0: Point, c: f64, b: f64, offset: f64, mu: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::Config(format!(
                "smoothing scale C = {c} must be >= 0"
            )));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::Config(format!(
                "smoothing exponent b = {b} outside [0, 1]"
            )));
        }
        if !(offset >= 1.0) {
            return Err(Error::Config(format!(
                "smoothing offset {offset} must be >= 1"
            )));
        }
        if !(mu >= 0.0) {
            return Err(Error::Config(format!(
                "concavity modulus {mu} must be >= 0"
            )));
        }
        Ok(SmoothingState {
            y0,
            c,
            b,
            offset,
            mu,
        })
    }

    /// Fails unless `max(C, mu) > 0`, which dual LMO/PO steps require.
    pub fn require_curvature(&self) -> Result<()> {
        if self.c > 0.0 || self.mu > 0.0 {
            Ok(())
        } else {
            Err(Error::Config(
                "C = 0 needs a strongly concave payoff (mu > 0); set a positive smoothing scale"
                    .into(),
            ))
        }
    }

    pub fn beta_at(&self, t: u64) -> f64 {
        if self.c == 0.0 {
            return 0.0;
        }
        self.c * (t as f64 + self.offset).powf(-self.b)
    }
}

/// Primal step-size sequence `tau_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `scale * (t + offset)^(-a)`; the anytime presets use scale = offset = 1.
    Power { scale: f64, offset: f64, a: f64 },
    /// Projected-primal form
    /// `s * (A (t+1)^a + 5 Lxx/2 + 13 Lyx^2 (t+1)^b / (2C))^(-1)`.
    /// With `C = 0` the last term becomes `13 Lyx^2 / (2 mu)`.
    PoLmo {
        scale: f64,
        a_coef: f64,
        a: f64,
        b: f64,
        c: f64,
        lxx: f64,
        lyx: f64,
        mu: f64,
    },
    /// Horizon-dependent constant step.
    Constant { value: f64 },
}

impl StepSchedule {
    pub fn power(a: f64) -> Self {
        StepSchedule::Power {
            scale: 1.0,
            offset: 1.0,
            a,
        }
    }

    pub fn po_lmo(scale: f64, a_coef: f64, a: f64, b: f64, c: f64, s: &Smoothness) -> Result<Self> {
        if !(a_coef > 0.0) {
            return Err(Error::Config(format!(
                "step coefficient A = {a_coef} must be > 0"
            )));
        }
        if c == 0.0 && !(s.mu > 0.0) {
            return Err(Error::Config(
                "projected-primal step with C = 0 requires mu > 0".into(),
            ));
        }
        Ok(StepSchedule::PoLmo {
            scale,
            a_coef,
            a,
            b,
            c,
            lxx: s.lxx,
            lyx: s.lyx,
            mu: s.mu,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            StepSchedule::Power { scale, offset, a } => {
                *scale > 0.0 && *offset >= 1.0 && (0.0..=1.0).contains(a)
            }
            StepSchedule::PoLmo {
                scale, a_coef, a, ..
            } => *scale > 0.0 && *a_coef > 0.0 && (0.0..=1.0).contains(a),
            StepSchedule::Constant { value } => *value > 0.0 && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid step schedule {self:?}")))
        }
    }

    pub fn tau_at(&self, t: u64) -> f64 {
        let k = t as f64;
        match *self {
            StepSchedule::Power { scale, offset, a } => scale * (k + offset).powf(-a),
            StepSchedule::PoLmo {
                scale,
                a_coef,
                a,
                b,
                c,
                lxx,
                lyx,
                mu,
            } => {
                let coupling = if c > 0.0 {
                    13.0 * lyx * lyx * (k + 1.0).powf(b) / (2.0 * c)
                } else {
                    13.0 * lyx * lyx / (2.0 * mu)
                };
                scale / (a_coef * (k + 1.0).powf(a) + 2.5 * lxx + coupling)
            }
            StepSchedule::Constant { value } => value,
        }
    }
}

/// `L(x, y) - (beta_t / 2) ||y - y0||^2`.
pub fn regularized_value(
    problem: &dyn PayoffProblem,
    smoothing: &SmoothingState,
    x: &Point,
    y: &Point,
    t: u64,
) -> Result<f64> {
    let beta = smoothing.beta_at(t);
    Ok(regularize_value(
        problem.value(x, y)?,
        beta,
        y,
        &smoothing.y0,
    ))
}

/// `grad_y L(x, y) - beta_t (y - y0)`.
pub fn regularized_grad_y(
    problem: &dyn PayoffProblem,
    smoothing: &SmoothingState,
    x: &Point,
    y: &Point,
    t: u64,
) -> Result<Point> {
    let beta = smoothing.beta_at(t);
    Ok(regularize_grad(
        &problem.grad_y(x, y)?,
        beta,
        y,
        &smoothing.y0,
    ))
}

pub(crate) fn regularize_value(value: f64, beta: f64, y: &Point, y0: &Point) -> f64 {
    if beta == 0.0 {
        value
    } else {
        value - 0.5 * beta * y.sub(y0).norm_sq()
    }
}

pub(crate) fn regularize_grad(grad_y: &Point, beta: f64, y: &Point, y0: &Point) -> Point {
    if beta == 0.0 {
        grad_y.clone()
    } else {
        grad_y.axpy(-beta, &y.sub(y0))
    }
}

/// Lipschitz modulus of the gradient of the smoothed primal function,
/// `Lxx + Lyx^2 / (beta + mu)`.
pub fn smoothed_lipschitz(s: &Smoothness, beta: f64) -> Result<f64> {
    let curv = beta + s.mu;
    if !(curv > 0.0) {
        return Err(Error::Domain("beta + mu must be positive".into()));
    }
    Ok(s.lxx + s.lyx * s.lyx / curv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn y0() -> Point {
        Point::scalar(0.0)
    }

    #[test]
    fn beta_examples() {
        let zero = SmoothingState::new(y0(), 0.0, 0.5, 1.0).unwrap();
        for t in [0, 1, 100] {
            assert_eq!(zero.beta_at(t), 0.0);
        }
        let s = SmoothingState::new(y0(), 1.0, 1.0 / 6.0, 0.0).unwrap();
        assert_eq!(s.beta_at(0), 1.0);
        let s = SmoothingState::new(y0(), 0.01, 0.2, 0.0).unwrap();
        // 0.01 * 10^-0.2
        assert_abs_diff_eq!(s.beta_at(9), 0.006_309_573_444_801_933, epsilon = 1e-15);
    }

    #[test]
    fn beta_needs_curvature() {
        let s = SmoothingState::new(y0(), 0.0, 0.0, 0.0).unwrap();
        assert!(s.require_curvature().is_err());
        assert!(SmoothingState::new(y0(), -1.0, 0.0, 0.0).is_err());
        assert!(SmoothingState::new(y0(), 1.0, 1.5, 0.0).is_err());
    }

    #[test]
    fn tau_examples() {
        let p = StepSchedule::power(5.0 / 6.0);
        assert_eq!(p.tau_at(0), 1.0);
        assert_abs_diff_eq!(p.tau_at(1), 2f64.powf(-5.0 / 6.0), epsilon = 1e-15);
        assert_abs_diff_eq!(p.tau_at(1), 0.561_231_024_154_686_7, epsilon = 1e-12);

        let s = Smoothness {
            lxx: 0.0,
            lyx: 1.0,
            lyy: 0.0,
            mu: 0.0,
        };
        let po = StepSchedule::po_lmo(0.2, 1.0, 2.0 / 3.0, 1.0 / 6.0, 1.0, &s).unwrap();
        assert_abs_diff_eq!(po.tau_at(0), 1.0 / 37.5, epsilon = 1e-15);
    }

    #[test]
    fn po_lmo_without_smoothing_uses_mu() {
        let s = Smoothness {
            lxx: 2.0,
            lyx: 1.0,
            lyy: 0.0,
            mu: 0.5,
        };
        let po = StepSchedule::po_lmo(0.75, 1.0, 1.0 / 3.0, 0.0, 0.0, &s).unwrap();
        assert_abs_diff_eq!(po.tau_at(0), 0.75 / (1.0 + 5.0 + 13.0), epsilon = 1e-15);
        let s0 = Smoothness { mu: 0.0, ..s };
        assert!(StepSchedule::po_lmo(0.75, 1.0, 1.0 / 3.0, 0.0, 0.0, &s0).is_err());
    }

    #[test]
    fn schedules_nonincreasing() {
        let s = Smoothness {
            lxx: 1.0,
            lyx: 2.0,
            lyy: 0.0,
            mu: 0.0,
        };
        let scheds = [
            StepSchedule::power(0.5),
            StepSchedule::power(1.0),
            StepSchedule::po_lmo(0.2, 1.0, 2.0 / 3.0, 1.0 / 3.0, 1.0, &s).unwrap(),
            StepSchedule::Constant { value: 0.1 },
        ];
        for sch in &scheds {
            let mut prev = sch.tau_at(0);
            assert!(prev > 0.0);
            for t in 1..2000 {
                let cur = sch.tau_at(t);
                assert!(cur <= prev && cur > 0.0);
                prev = cur;
            }
        }
        let beta = SmoothingState::new(y0(), 0.3, 0.25, 0.0).unwrap();
        for t in 0..2000 {
            assert!(beta.beta_at(t + 1) <= beta.beta_at(t));
        }
    }

    #[test]
    fn smoothed_lipschitz_examples() {
        let s = Smoothness {
            lxx: 0.0,
            lyx: 1.0,
            lyy: 0.0,
            mu: 0.0,
        };
        assert_eq!(smoothed_lipschitz(&s, 1.0).unwrap(), 1.0);
        let s2 = Smoothness { lxx: 2.0, ..s };
        assert_eq!(smoothed_lipschitz(&s2, 0.5).unwrap(), 4.0);
        assert!(smoothed_lipschitz(&s, 0.0).is_err());
        let mut prev = f64::INFINITY;
        for beta in [0.1, 1.0, 10.0, 1e3, 1e6] {
            let l = smoothed_lipschitz(&s2, beta).unwrap();
            assert!(l < prev && l > 2.0);
            prev = l;
        }
        assert!(prev - 2.0 < 1e-5);
    }

    #[test]
    fn regularization_helpers() {
        let y = Point::vector(vec![1.0, -2.0]);
        let y0 = Point::vector(vec![0.0, 0.0]);
        assert_eq!(regularize_value(3.0, 0.0, &y, &y0), 3.0);
        assert_eq!(regularize_value(3.0, 5.0, &y0, &y0), 3.0);
        let unit = Point::vector(vec![1.0, 0.0]);
        assert_eq!(regularize_value(0.0, 2.0, &unit, &y0), -1.0);
        let g = regularize_grad(&Point::zeros(y.shape().clone()), 1.0, &y, &y0);
        assert_eq!(g.as_slice(), &[-1.0, 2.0]);
    }
}
