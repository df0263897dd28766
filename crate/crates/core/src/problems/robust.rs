//! Distributionally robust multiclass logistic regression with a chi-square
//! penalty on the sample weights:
//!
//! `L(Theta, y) = (1/n) sum_i y_i log(1 + exp(Tr(Theta A_i))) - (lambda/2) ||y - 1/n||^2`
//!
//! with `Theta` (k x d) in a nuclear-norm ball and `y` in the n-simplex.
//! `A_i` is the d x k matrix whose columns are `a_i`, except column `b_i`
//! which is `-(k-1) a_i`.

use crate::error::{Error, Result};
use crate::metrics::best_response_simplex_chi2;
use crate::oracles::simplex_project;
use crate::point::{Point, Shape};
use crate::problem::{PayoffProblem, Smoothness};
use crate::set::FeasibleSet;

use super::libsvm::Samples;

pub const DEFAULT_RADIUS: f64 = 10.0;
pub const DEFAULT_PENALTY: f64 = 10.0;

#[derive(Clone, Debug)]
pub struct RobustClassification {
    samples: Samples,
    k: usize,
    lambda: f64,
    x_set: FeasibleSet,
    y_set: FeasibleSet,
    smoothness: Smoothness,
}

/// `(L_ThetaTheta, L_yTheta, L_yy, mu)` for `n` samples with squared feature
/// norms `norms_sq`.
pub fn lipschitz_rc(norms_sq: &[f64], k: usize, lambda: f64) -> (f64, f64, f64, f64) {
    let n = norms_sq.len() as f64;
    let kk = (k * (k - 1)) as f64;
    let max_sq = norms_sq.iter().copied().fold(0.0, f64::max);
    let sum_sq: f64 = norms_sq.iter().sum();
    (
        kk / 4.0 * max_sq / n,
        (kk / 2.0 * sum_sq).sqrt() / n,
        std::f64::consts::SQRT_2 * lambda,
        lambda,
    )
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl RobustClassification {
    pub fn new(samples: Samples, r: f64, lambda: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::arg("empty dataset"));
        }
        if !(lambda > 0.0) {
            return Err(Error::arg(format!(
                "penalty lambda must be positive, got {lambda}"
            )));
        }
        let k = samples.classes;
        if k < 2 {
            return Err(Error::arg("need at least two classes"));
        }
        if samples.labels.iter().any(|&b| b == 0 || b > k) {
            return Err(Error::arg(format!("labels must lie in 1..={k}")));
        }
        let d = samples.dim.max(1);
        let n = samples.len();
        let x_set = FeasibleSet::nuclear_ball(k, d, r)?;
        let y_set = FeasibleSet::simplex(n.max(2))?;
        if n < 2 {
            return Err(Error::arg("need at least two samples"));
        }
        let norms: Vec<f64> = samples.rows.iter().map(|r| r.norm_sq()).collect();
        let (lxx, lyx, lyy, mu) = lipschitz_rc(&norms, k, lambda);
        Ok(RobustClassification {
            samples,
            k,
            lambda,
            x_set,
            y_set,
            smoothness: Smoothness { lxx, lyx, lyy, mu },
        })
    }

    pub fn samples(&self) -> &Samples {
        &self.samples
    }

    fn dim(&self) -> usize {
        self.samples.dim.max(1)
    }

    /// `Tr(Theta A_i) = sum_j theta_j^T a_i - k theta_{b_i}^T a_i`.
    fn margins(&self, theta: &Point) -> Result<Vec<f64>> {
        theta.check_shape(self.x_set.shape())?;
        let d = self.dim();
        let th = theta.as_slice();
        Ok(self
            .samples
            .rows
            .iter()
            .zip(&self.samples.labels)
            .map(|(row, &b)| {
                let mut total = 0.0;
                let mut own = 0.0;
                for j in 0..self.k {
                    let s = row.dot_dense(&th[j * d..(j + 1) * d]);
                    total += s;
                    if j == b - 1 {
                        own = s;
                    }
                }
                total - self.k as f64 * own
            })
            .collect())
    }

    fn weights<'a>(&self, y: &'a Point) -> Result<&'a [f64]> {
        y.check_shape(self.y_set.shape())?;
        Ok(y.as_slice())
    }

    fn n(&self) -> f64 {
        self.samples.len() as f64
    }

    /// Per-sample losses at `theta`.
    pub fn losses(&self, theta: &Point) -> Result<Vec<f64>> {
        Ok(self.margins(theta)?.into_iter().map(softplus).collect())
    }
}

impl PayoffProblem for RobustClassification {
    fn name(&self) -> &str {
        "robust-classification"
    }

    fn x_set(&self) -> &FeasibleSet {
        &self.x_set
    }

    fn y_set(&self) -> &FeasibleSet {
        &self.y_set
    }

    fn value(&self, x: &Point, y: &Point) -> Result<f64> {
        let w = self.weights(y)?;
        let n = self.n();
        let loss: f64 = self
            .losses(x)?
            .iter()
            .zip(w)
            .map(|(l, yi)| yi * l)
            .sum::<f64>()
            / n;
        let pen: f64 = w.iter().map(|yi| (yi - 1.0 / n).powi(2)).sum();
        Ok(loss - 0.5 * self.lambda * pen)
    }

    fn grad_x(&self, x: &Point, y: &Point) -> Result<Point> {
        let w = self.weights(y)?;
        let d = self.dim();
        let n = self.n();
        let mut g = vec![0.0; self.k * d];
        for ((row, &b), (z, yi)) in self
            .samples
            .rows
            .iter()
            .zip(&self.samples.labels)
            .zip(self.margins(x)?.into_iter().zip(w))
        {
            let c = yi * sigmoid(z) / n;
            if c == 0.0 {
                continue;
            }
            for &(f, v) in row.entries() {
                for j in 0..self.k {
                    g[j * d + f] += c * v;
                }
                g[(b - 1) * d + f] -= self.k as f64 * c * v;
            }
        }
        Point::new(g, x.shape().clone())
    }

    fn grad_y(&self, x: &Point, y: &Point) -> Result<Point> {
        let w = self.weights(y)?;
        let n = self.n();
        let g = self
            .losses(x)?
            .iter()
            .zip(w)
            .map(|(l, yi)| l / n - self.lambda * (yi - 1.0 / n))
            .collect();
        Ok(Point::vector(g))
    }

    fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    fn is_convex_in_x(&self) -> bool {
        true
    }

    /// `Theta = 0`, uniform weights.
    fn initial_point(&self) -> (Point, Point) {
        let n = self.samples.len();
        (
            Point::zeros(Shape::Matrix {
                rows: self.k,
                cols: self.dim(),
            }),
            Point::vector(vec![1.0 / n as f64; n]),
        )
    }

    fn best_response_y(&self, x: &Point) -> Result<Option<Point>> {
        let y = best_response_simplex_chi2(&self.losses(x)?, self.lambda)?;
        Ok(Some(Point::vector(y)))
    }

    fn best_response_y_smoothed(&self, x: &Point, beta: f64, y0: &Point) -> Result<Option<Point>> {
        if !(beta > 0.0) {
            return self.best_response_y(x);
        }
        let n = self.n();
        let c: Vec<f64> = self
            .losses(x)?
            .iter()
            .zip(self.weights(y0)?)
            .map(|(l, y0i)| (l / n + self.lambda / n + beta * y0i) / (self.lambda + beta))
            .collect();
        Ok(Some(Point::vector(simplex_project(&c))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::libsvm::SparseRow;

    #[test]
    fn zero_predictor_has_log2_losses() {
        let rows = vec![
            SparseRow::new(vec![(0, 1.0), (1, -2.0)]).unwrap(),
            SparseRow::new(vec![(1, 0.5)]).unwrap(),
            SparseRow::new(vec![]).unwrap(),
        ];
        let s = Samples::new(rows, vec![1, 2, 3], 2).unwrap();
        let p = RobustClassification::new(s, 10.0, 10.0).unwrap();
        let (x, y) = p.initial_point();
        let v = p.value(&x, &y).unwrap();
        assert!((v - 2f64.ln() / 3.0).abs() < 1e-15);
        assert!(p
            .losses(&x)
            .unwrap()
            .iter()
            .all(|l| (l - 2f64.ln()).abs() < 1e-15));
    }

    #[test]
    fn lipschitz_single_sample_example() {
        let (ltt, _, lyy, mu) = lipschitz_rc(&[1.0], 2, 3.0);
        assert_eq!(ltt, 0.5);
        assert_eq!(lyy, std::f64::consts::SQRT_2 * 3.0);
        assert_eq!(mu, 3.0);
    }
}
