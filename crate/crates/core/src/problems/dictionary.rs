//! Online dictionary learning with a fidelity constraint on old data,
//! written as a Lagrangian saddle problem:
//!
//! `L((D', C'), y) = (1/2n') ||A' - D'C'||_F^2 + y ((1/2n) ||A - D'C~||_F^2 - delta)`
//!
//! over `D'` with unit-ball columns, `C'` in a nuclear-norm ball of radius
//! `r`, and `y in [0, B]`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::point::Point;
use crate::problem::{PayoffProblem, Smoothness};
use crate::set::FeasibleSet;

use super::datagen::DlData;
use super::{check_finite, spectral_norm};

pub const DEFAULT_DELTA: f64 = 1e-4;
pub const DEFAULT_RADIUS: f64 = 5.0;
pub const DEFAULT_DUAL_BOUND: f64 = 1.0;

#[derive(Clone, Debug)]
pub struct DictionaryLearning {
    a: DMatrix<f64>,
    a_new: DMatrix<f64>,
    c_tilde: DMatrix<f64>,
    d0: DMatrix<f64>,
    delta: f64,
    x_set: FeasibleSet,
    y_set: FeasibleSet,
    smoothness: Smoothness,
}

/// `(Lxx, Lyx, Lyy)` for the dictionary-learning payoff.
pub fn lipschitz_dl(
    a: &DMatrix<f64>,
    a_new: &DMatrix<f64>,
    c_tilde: &DMatrix<f64>,
    r: f64,
    q: usize,
    b: f64,
    n: usize,
    n_new: usize,
) -> (f64, f64, f64) {
    let (n, n_new, q) = (n as f64, n_new as f64, q as f64);
    let c2 = spectral_norm(c_tilde);
    let a_new_f = a_new.norm();
    let s = a_new_f + 2.0 * r * q.sqrt();
    let first =
        (2.0 * s * s / (n_new * n_new) + 3.0 * (r * r / n_new + b * c2 * c2 / n).powi(2)).sqrt();
    let second = (2.0 * q * q + 3.0 * s * s).sqrt() / n_new;
    let lxx = first.max(second);
    let lyx = 3f64.sqrt() * (a.norm() + q.sqrt() * c2) * c2 / n;
    (lxx, lyx, 0.0)
}

impl DictionaryLearning {
    pub fn new(
        a: DMatrix<f64>,
        a_new: DMatrix<f64>,
        c_tilde: DMatrix<f64>,
        d0: DMatrix<f64>,
        delta: f64,
        r: f64,
        b: f64,
    ) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::arg(format!(
                "tolerance delta must be positive, got {delta}"
            )));
        }
        if !(r > 0.0) || !(b > 0.0) {
            return Err(Error::arg("radius r and dual bound B must be positive"));
        }
        let (m, n) = a.shape();
        let (q, n_c) = c_tilde.shape();
        let (m_new, n_new) = a_new.shape();
        if n_c != n || m_new != m || d0.shape() != (m, q) || m * n * q * n_new == 0 {
            return Err(Error::arg(format!(
                "inconsistent shapes: A {m}x{n}, A' {m_new}x{n_new}, C~ {q}x{n_c}, D0 {}x{}",
                d0.nrows(),
                d0.ncols()
            )));
        }
        for (name, mat) in [("A", &a), ("A'", &a_new), ("C~", &c_tilde), ("D0", &d0)] {
            check_finite(name, mat)?;
        }
        if c_tilde.iter().all(|v| *v == 0.0) {
            return Err(Error::Domain(
                "padded coefficients C~ are zero; the constraint does not depend on D'".into(),
            ));
        }
        let x_set = FeasibleSet::product(vec![
            FeasibleSet::column_balls(m, q, 1.0)?,
            FeasibleSet::nuclear_ball(q, n_new, r)?,
        ])?;
        let y_set = FeasibleSet::interval(0.0, b)?;
        let (lxx, lyx, lyy) = lipschitz_dl(&a, &a_new, &c_tilde, r, q, b, n, n_new);
        let prob = DictionaryLearning {
            a,
            a_new,
            c_tilde,
            d0,
            delta,
            x_set,
            y_set,
            smoothness: Smoothness {
                lxx,
                lyx,
                lyy,
                mu: 0.0,
            },
        };
        let (x0, _) = prob.initial_point();
        if !prob.x_set.contains(&x0) {
            return Err(Error::arg(
                "initial dictionary has a column outside the unit ball",
            ));
        }
        Ok(prob)
    }

    pub fn from_data(data: &DlData, delta: f64, r: f64, b: f64) -> Result<Self> {
        Self::new(
            data.a.clone(),
            data.a_new.clone(),
            data.c_tilde.clone(),
            data.d0.clone(),
            delta,
            r,
            b,
        )
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Splits `x` into `(D', C')`.
    pub fn unpack(&self, x: &Point) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        x.check_shape(self.x_set.shape())?;
        let blocks = x.split_blocks();
        Ok((blocks[0].to_dmatrix(), blocks[1].to_dmatrix()))
    }

    pub fn pack(d: &DMatrix<f64>, c: &DMatrix<f64>) -> Point {
        Point::blocks(vec![Point::from_dmatrix(d), Point::from_dmatrix(c)])
    }

    fn scalar_y(&self, y: &Point) -> Result<f64> {
        y.check_shape(self.y_set.shape())?;
        Ok(y.as_slice()[0])
    }

    fn bound(&self) -> f64 {
        self.y_set.diameter()
    }

    /// Residuals `A' - D'C'` and `A - D'C~`.
    fn residuals(&self, d: &DMatrix<f64>, c: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        (&self.a_new - d * c, &self.a - d * &self.c_tilde)
    }

    /// `(1/2n) ||A - D'C~||_F^2 - delta`, the partial derivative in y.
    fn constraint(&self, r_old: &DMatrix<f64>) -> f64 {
        r_old.norm_squared() / (2.0 * self.a.ncols() as f64) - self.delta
    }
}

impl PayoffProblem for DictionaryLearning {
    fn name(&self) -> &str {
        "dictionary-learning"
    }

    fn x_set(&self) -> &FeasibleSet {
        &self.x_set
    }

    fn y_set(&self) -> &FeasibleSet {
        &self.y_set
    }

    fn value(&self, x: &Point, y: &Point) -> Result<f64> {
        let (d, c) = self.unpack(x)?;
        let y = self.scalar_y(y)?;
        let (r_new, r_old) = self.residuals(&d, &c);
        let n_new = self.a_new.ncols() as f64;
        Ok(r_new.norm_squared() / (2.0 * n_new) + y * self.constraint(&r_old))
    }

    fn grad_x(&self, x: &Point, y: &Point) -> Result<Point> {
        Ok(self.grads(x, y)?.0)
    }

    fn grad_y(&self, x: &Point, y: &Point) -> Result<Point> {
        let (d, _) = self.unpack(x)?;
        self.scalar_y(y)?;
        let r_old = &self.a - &d * &self.c_tilde;
        Ok(Point::scalar(self.constraint(&r_old)))
    }

    fn grads(&self, x: &Point, y: &Point) -> Result<(Point, Point)> {
        let (d, c) = self.unpack(x)?;
        let y = self.scalar_y(y)?;
        let (r_new, r_old) = self.residuals(&d, &c);
        let n_new = self.a_new.ncols() as f64;
        let n = self.a.ncols() as f64;
        let g_d = -(&r_new * c.transpose()) / n_new - (&r_old * self.c_tilde.transpose()) * (y / n);
        let g_c = -(d.tr_mul(&r_new)) / n_new;
        Ok((
            Self::pack(&g_d, &g_c),
            Point::scalar(self.constraint(&r_old)),
        ))
    }

    fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    fn is_convex_in_x(&self) -> bool {
        false
    }

    /// `(D0', C0' = 0)` and `y0 = 0`.
    fn initial_point(&self) -> (Point, Point) {
        let c0 = DMatrix::zeros(self.c_tilde.nrows(), self.a_new.ncols());
        (Self::pack(&self.d0, &c0), Point::scalar(0.0))
    }

    fn best_response_y(&self, x: &Point) -> Result<Option<Point>> {
        let (d, _) = self.unpack(x)?;
        let g = self.constraint(&(&self.a - &d * &self.c_tilde));
        Ok(Some(Point::scalar(if g > 0.0 {
            self.bound()
        } else {
            0.0
        })))
    }

    fn best_response_y_smoothed(&self, x: &Point, beta: f64, y0: &Point) -> Result<Option<Point>> {
        if !(beta > 0.0) {
            return self.best_response_y(x);
        }
        let (d, _) = self.unpack(x)?;
        let g = self.constraint(&(&self.a - &d * &self.c_tilde));
        let y0 = self.scalar_y(y0)?;
        Ok(Some(Point::scalar(
            (y0 + g / beta).clamp(0.0, self.bound()),
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::datagen::{dl_generate, DlSizes};

    fn desk() -> DictionaryLearning {
        let data = dl_generate(DlSizes::DESK, 5).unwrap();
        DictionaryLearning::from_data(&data, DEFAULT_DELTA, DEFAULT_RADIUS, DEFAULT_DUAL_BOUND)
            .unwrap()
    }

    #[test]
    fn zero_dual_gives_reconstruction_term() {
        let p = desk();
        let (x, y) = p.initial_point();
        let (d, c) = p.unpack(&x).unwrap();
        let want = (&p.a_new - &d * &c).norm_squared() / (2.0 * p.a_new.ncols() as f64);
        assert_eq!(p.value(&x, &y).unwrap(), want);
        assert_eq!(p.smoothness().lyy, 0.0);
    }

    #[test]
    fn exact_fit_makes_zero_the_best_response() {
        let data = dl_generate(DlSizes::DESK, 2).unwrap();
        let a = &data.d0 * &data.c_tilde;
        let p = DictionaryLearning::new(
            a,
            data.a_new.clone(),
            data.c_tilde.clone(),
            data.d0.clone(),
            1e-4,
            5.0,
            1.0,
        )
        .unwrap();
        let (x, _) = p.initial_point();
        let g = p.grad_y(&x, &Point::scalar(0.5)).unwrap().as_slice()[0];
        assert!((g + 1e-4).abs() < 1e-15, "g = {g}");
        let ys = p.best_response_y(&x).unwrap().unwrap();
        assert_eq!(ys.as_slice()[0], 0.0);
    }

    #[test]
    fn rejects_nonpositive_delta_and_zero_coefficients() {
        let data = dl_generate(DlSizes::DESK, 1).unwrap();
        assert!(matches!(
            DictionaryLearning::from_data(&data, 0.0, 5.0, 1.0),
            Err(Error::InvalidArgument(_))
        ));
        let mut zero = data.clone();
        zero.c_tilde.fill(0.0);
        assert!(matches!(
            DictionaryLearning::from_data(&zero, 1e-4, 5.0, 1.0),
            Err(Error::Domain(_))
        ));
    }
}
