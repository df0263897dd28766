//! Bilinear matrix games `x^T A y` over two probability simplices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::oracles::simplex_project;
use crate::point::Point;
use crate::problem::{PayoffProblem, Smoothness};
use crate::set::FeasibleSet;

use super::{check_finite, spectral_norm};

#[derive(Clone, Debug)]
pub struct MatrixGame {
    a: DMatrix<f64>,
    x_set: FeasibleSet,
    y_set: FeasibleSet,
    lyx: f64,
    value: f64,
    saddle: (Point, Point),
}

impl MatrixGame {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::arg("payoff matrix is empty"));
        }
        check_finite("payoff matrix", &a)?;
        let (m, n) = a.shape();
        let x_set = FeasibleSet::simplex(m)?;
        let y_set = FeasibleSet::simplex(n)?;
        let (value, x, y) = solve_game(&a)?;
        Ok(MatrixGame {
            lyx: spectral_norm(&a),
            x_set,
            y_set,
            value,
            saddle: (Point::vector(x), Point::vector(y)),
            a,
        })
    }

    pub fn payoff(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// `min_x max_y x^T A y`.
    pub fn game_value(&self) -> f64 {
        self.value
    }

    /// Optimal mixed strategies from the LP solve.
    pub fn saddle(&self) -> &(Point, Point) {
        &self.saddle
    }

    fn ay(&self, y: &Point) -> DVector<f64> {
        &self.a * DVector::from_column_slice(y.as_slice())
    }

    fn atx(&self, x: &Point) -> DVector<f64> {
        self.a.tr_mul(&DVector::from_column_slice(x.as_slice()))
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &e) in v.iter().enumerate() {
        if e > v[best] {
            best = i;
        }
    }
    best
}

fn vertex(n: usize, i: usize) -> Point {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    Point::vector(e)
}

impl PayoffProblem for MatrixGame {
    fn name(&self) -> &str {
        "matrix-game"
    }

    fn x_set(&self) -> &FeasibleSet {
        &self.x_set
    }

    fn y_set(&self) -> &FeasibleSet {
        &self.y_set
    }

    fn value(&self, x: &Point, y: &Point) -> Result<f64> {
        x.check_shape(self.x_set.shape())?;
        y.check_shape(self.y_set.shape())?;
        Ok(x.as_slice()
            .iter()
            .zip(self.ay(y).iter())
            .map(|(a, b)| a * b)
            .sum())
    }

    fn grad_x(&self, _x: &Point, y: &Point) -> Result<Point> {
        y.check_shape(self.y_set.shape())?;
        Ok(Point::vector(self.ay(y).as_slice().to_vec()))
    }

    fn grad_y(&self, x: &Point, _y: &Point) -> Result<Point> {
        x.check_shape(self.x_set.shape())?;
        Ok(Point::vector(self.atx(x).as_slice().to_vec()))
    }

    fn smoothness(&self) -> Smoothness {
        Smoothness {
            lxx: 0.0,
            lyx: self.lyx,
            lyy: 0.0,
            mu: 0.0,
        }
    }

    fn is_convex_in_x(&self) -> bool {
        true
    }

    fn initial_point(&self) -> (Point, Point) {
        let (m, n) = self.a.shape();
        (
            Point::vector(vec![1.0 / m as f64; m]),
            Point::vector(vec![1.0 / n as f64; n]),
        )
    }

    fn best_response_y(&self, x: &Point) -> Result<Option<Point>> {
        let g = self.atx(x);
        Ok(Some(vertex(g.len(), argmax(g.as_slice()))))
    }

    fn best_response_y_smoothed(&self, x: &Point, beta: f64, y0: &Point) -> Result<Option<Point>> {
        if !(beta > 0.0) {
            return self.best_response_y(x);
        }
        let g = self.atx(x);
        let c: Vec<f64> = y0
            .as_slice()
            .iter()
            .zip(g.iter())
            .map(|(a, b)| a + b / beta)
            .collect();
        Ok(Some(Point::vector(simplex_project(&c))))
    }

    fn best_response_x(&self, y: &Point) -> Result<Option<Point>> {
        let g = self.ay(y);
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        Ok(Some(vertex(g.len(), argmax(&neg))))
    }

    fn optimal_value(&self) -> Option<f64> {
        Some(self.value)
    }
}

/// Solves the game by the primal simplex method on
/// `max 1^T w  s.t.  A'^T w <= 1, w >= 0` with `A' = A + shift > 0`.
/// Returns the value and optimal strategies of both players.
fn solve_game(a: &DMatrix<f64>) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let (m, n) = a.shape();
    let shift = 1.0 - a.min();
    // tableau rows: n constraints then the objective; columns: m + n + rhs
    let cols = m + n + 1;
    let mut tab = vec![vec![0.0; cols]; n + 1];
    for j in 0..n {
        for i in 0..m {
            tab[j][i] = a[(i, j)] + shift;
        }
        tab[j][m + j] = 1.0;
        tab[j][cols - 1] = 1.0;
    }
    for i in 0..m {
        tab[n][i] = -1.0;
    }
    let mut basis: Vec<usize> = (m..m + n).collect();
    let eps = 1e-12;
    let max_pivots = 50 * (m + n) * (m + n) + 1000;
    let mut pivots = 0;
    loop {
        // Bland's rule: lowest-index entering column with negative reduced cost
        let Some(enter) = (0..m + n).find(|&c| tab[n][c] < -eps) else {
            break;
        };
        let mut leave: Option<usize> = None;
        for r in 0..n {
            if tab[r][enter] > eps {
                let ratio = tab[r][cols - 1] / tab[r][enter];
                leave = match leave {
                    None => Some(r),
                    Some(l) => {
                        let lr = tab[l][cols - 1] / tab[l][enter];
                        if ratio < lr - eps || (ratio <= lr + eps && basis[r] < basis[l]) {
                            Some(r)
                        } else {
                            Some(l)
                        }
                    }
                };
            }
        }
        let Some(leave) = leave else {
            return Err(Error::numerical("game LP is unbounded"));
        };
        let p = tab[leave][enter];
        for v in tab[leave].iter_mut() {
            *v /= p;
        }
        let pivot_row = tab[leave].clone();
        for (r, row) in tab.iter_mut().enumerate() {
            if r != leave && row[enter] != 0.0 {
                let f = row[enter];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        basis[leave] = enter;
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::numerical("game LP did not terminate"));
        }
    }
    let opt = tab[n][cols - 1];
    if !(opt > 0.0) {
        return Err(Error::numerical("game LP returned a nonpositive optimum"));
    }
    let mut w = vec![0.0; m];
    for (r, &b) in basis.iter().enumerate() {
        if b < m {
            w[b] = tab[r][cols - 1];
        }
    }
    // duals of the n constraints are the reduced costs of their slacks
    let z: Vec<f64> = (0..n).map(|j| tab[n][m + j].max(0.0)).collect();
    let x: Vec<f64> = w.iter().map(|v| (v / opt).max(0.0)).collect();
    let zs: f64 = z.iter().sum();
    let y: Vec<f64> = z.iter().map(|v| v / zs).collect();
    Ok((1.0 / opt - shift, simplex_project(&x), simplex_project(&y)))
}
