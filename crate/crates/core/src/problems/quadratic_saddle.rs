//! Quadratic saddle problems with an interior saddle point:
//! `(mu_x/2)||x - x_hat||^2 + x^T B y - (mu_y/2)||y - y_hat||^2` over two
//! origin-centered Euclidean balls.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::problem::{PayoffProblem, Smoothness};
use crate::set::FeasibleSet;

use super::{check_finite, spectral_norm};

#[derive(Clone, Debug)]
pub struct QuadraticSaddle {
    mu_x: f64,
    mu_y: f64,
    b: DMatrix<f64>,
    x_hat: DVector<f64>,
    y_hat: DVector<f64>,
    x_set: FeasibleSet,
    y_set: FeasibleSet,
    lyx: f64,
    saddle: (Point, Point),
    value: f64,
}

impl QuadraticSaddle {
    /// Builds the problem and solves the first-order system for its saddle,
    /// which must lie strictly inside both balls.
    pub fn new(
        mu_x: f64,
        mu_y: f64,
        b: DMatrix<f64>,
        x_hat: Vec<f64>,
        y_hat: Vec<f64>,
        radii: (f64, f64),
    ) -> Result<Self> {
        if !(mu_x >= 0.0) || !(mu_y >= 0.0) {
            return Err(Error::arg("curvatures mu_x, mu_y must be nonnegative"));
        }
        let (p, q) = b.shape();
        if x_hat.len() != p || y_hat.len() != q || p == 0 || q == 0 {
            return Err(Error::arg(format!(
                "coupling is {p}x{q} but centers have lengths {} and {}",
                x_hat.len(),
                y_hat.len()
            )));
        }
        check_finite("coupling matrix", &b)?;
        let x_set = FeasibleSet::l2_ball(vec![0.0; p], radii.0)?;
        let y_set = FeasibleSet::l2_ball(vec![0.0; q], radii.1)?;
        let x_hat = DVector::from_vec(x_hat);
        let y_hat = DVector::from_vec(y_hat);

        // [mu_x I  B; B^T  -mu_y I] [x; y] = [mu_x x_hat; -mu_y y_hat]
        let mut k = DMatrix::zeros(p + q, p + q);
        k.view_mut((0, 0), (p, p)).fill_diagonal(mu_x);
        k.view_mut((p, p), (q, q)).fill_diagonal(-mu_y);
        k.view_mut((0, p), (p, q)).copy_from(&b);
        k.view_mut((p, 0), (q, p)).copy_from(&b.transpose());
        let mut rhs = DVector::zeros(p + q);
        rhs.rows_mut(0, p).copy_from(&(&x_hat * mu_x));
        rhs.rows_mut(p, q).copy_from(&(&y_hat * -mu_y));
        let sol =
            k.clone().lu().solve(&rhs).ok_or_else(|| {
                Error::Domain("saddle system is singular; use mu_x, mu_y > 0".into())
            })?;
        let residual = (&k * &sol - &rhs).norm();
        if residual > 1e-8 * (1.0 + rhs.norm()) {
            return Err(Error::numerical(format!(
                "saddle solve residual {residual:.3e}"
            )));
        }
        let xs = sol.rows(0, p).into_owned();
        let ys = sol.rows(p, q).into_owned();
        if xs.norm() >= radii.0 || ys.norm() >= radii.1 {
            return Err(Error::Domain(format!(
                "saddle ({:.4}, {:.4} in norm) is not interior to radii ({}, {}); enlarge the balls",
                xs.norm(),
                ys.norm(),
                radii.0,
                radii.1
            )));
        }
        let mut prob = QuadraticSaddle {
            mu_x,
            mu_y,
            lyx: spectral_norm(&b),
            b,
            x_hat,
            y_hat,
            x_set,
            y_set,
            saddle: (
                Point::vector(xs.as_slice().to_vec()),
                Point::vector(ys.as_slice().to_vec()),
            ),
            value: 0.0,
        };
        prob.value = prob.value(&prob.saddle.0, &prob.saddle.1)?;
        Ok(prob)
    }

    pub fn saddle(&self) -> &(Point, Point) {
        &self.saddle
    }

    fn vx(&self, x: &Point) -> Result<DVector<f64>> {
        x.check_shape(self.x_set.shape())?;
        Ok(DVector::from_column_slice(x.as_slice()))
    }

    fn vy(&self, y: &Point) -> Result<DVector<f64>> {
        y.check_shape(self.y_set.shape())?;
        Ok(DVector::from_column_slice(y.as_slice()))
    }
}

fn to_point(v: DVector<f64>) -> Point {
    Point::vector(v.as_slice().to_vec())
}

impl PayoffProblem for QuadraticSaddle {
    fn name(&self) -> &str {
        "quadratic-saddle"
    }

    fn x_set(&self) -> &FeasibleSet {
        &self.x_set
    }

    fn y_set(&self) -> &FeasibleSet {
        &self.y_set
    }

    fn value(&self, x: &Point, y: &Point) -> Result<f64> {
        let (xv, yv) = (self.vx(x)?, self.vy(y)?);
        Ok(
            0.5 * self.mu_x * (&xv - &self.x_hat).norm_squared() + xv.dot(&(&self.b * &yv))
                - 0.5 * self.mu_y * (&yv - &self.y_hat).norm_squared(),
        )
    }

    fn grad_x(&self, x: &Point, y: &Point) -> Result<Point> {
        let (xv, yv) = (self.vx(x)?, self.vy(y)?);
        Ok(to_point((&xv - &self.x_hat) * self.mu_x + &self.b * yv))
    }

    fn grad_y(&self, x: &Point, y: &Point) -> Result<Point> {
        let (xv, yv) = (self.vx(x)?, self.vy(y)?);
        Ok(to_point(
            self.b.tr_mul(&xv) - (&yv - &self.y_hat) * self.mu_y,
        ))
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness {
            lxx: self.mu_x,
            lyx: self.lyx,
            lyy: self.mu_y,
            mu: self.mu_y,
        }
    }

    fn is_convex_in_x(&self) -> bool {
        true
    }

    /// Starts on the boundary of X, away from the interior saddle.
    fn initial_point(&self) -> (Point, Point) {
        let p = self.x_hat.len();
        let q = self.y_hat.len();
        let mut x = vec![0.0; p];
        x[0] = match self.x_set.kind() {
            crate::set::SetKind::L2Ball { radius, .. } => *radius,
            _ => 0.0,
        };
        (
            Point::vector(x),
            Point::zeros(crate::point::Shape::Vector(q)),
        )
    }

    fn best_response_y(&self, x: &Point) -> Result<Option<Point>> {
        let bx = self.b.tr_mul(&self.vx(x)?);
        if self.mu_y > 0.0 {
            let c = &self.y_hat + bx / self.mu_y;
            return Ok(Some(self.y_set.project(&to_point(c))?));
        }
        Ok(Some(self.y_set.lmo(&to_point(-bx))?))
    }

    fn best_response_y_smoothed(&self, x: &Point, beta: f64, y0: &Point) -> Result<Option<Point>> {
        let curv = self.mu_y + beta;
        if !(curv > 0.0) {
            return self.best_response_y(x);
        }
        let bx = self.b.tr_mul(&self.vx(x)?);
        let c = (&self.y_hat * self.mu_y + self.vy(y0)? * beta + bx) / curv;
        Ok(Some(self.y_set.project(&to_point(c))?))
    }

    fn best_response_x(&self, y: &Point) -> Result<Option<Point>> {
        let by = &self.b * self.vy(y)?;
        if self.mu_x > 0.0 {
            let c = &self.x_hat - by / self.mu_x;
            return Ok(Some(self.x_set.project(&to_point(c))?));
        }
        Ok(Some(self.x_set.lmo(&to_point(by))?))
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(self.value)
    }
}
