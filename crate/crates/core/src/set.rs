//! Compact convex feasible sets with closed-form oracles.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles;
use crate::point::{Point, Shape};

/// Absolute tolerance on constraint residuals for every membership test.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SetKind {
    Interval {
        lo: f64,
        hi: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    L2Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Simplex {
        dim: usize,
    },
    NuclearBall {
        rows: usize,
        cols: usize,
        radius: f64,
    },
    /// Each column of a `rows x cols` matrix lies in a zero-centered ball.
    ColumnBallProduct {
        rows: usize,
        cols: usize,
        radius: f64,
    },
    Product(Vec<FeasibleSet>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSet {
    kind: SetKind,
    shape: Shape,
    diameter: f64,
    alpha: f64,
}

impl FeasibleSet {
    fn build(kind: SetKind) -> Result<Self> {
        let (shape, diameter, alpha) = match &kind {
            SetKind::Interval { lo, hi } => {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::arg(format!(
                        "interval [{lo}, {hi}] must have lo < hi"
                    )));
                }
                // modulus 1/(hi - lo), the value used for Y = [0, B] in the experiments
                (Shape::Vector(1), hi - lo, 1.0 / (hi - lo))
            }
            SetKind::Box { lo, hi } => {
                if lo.len() != hi.len() || lo.is_empty() {
                    return Err(Error::arg(
                        "box bounds must be nonempty and of equal length",
                    ));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err(Error::arg("box requires lo <= hi componentwise"));
                }
                let d = lo
                    .iter()
                    .zip(hi)
                    .map(|(l, h)| (h - l).powi(2))
                    .sum::<f64>()
                    .sqrt();
                (Shape::Vector(lo.len()), d, 0.0)
            }
            SetKind::L2Ball { center, radius } => {
                if !(*radius > 0.0) || center.is_empty() {
                    return Err(Error::arg(
                        "ball needs a positive radius and nonempty center",
                    ));
                }
                (Shape::Vector(center.len()), 2.0 * radius, 1.0 / radius)
            }
            SetKind::Simplex { dim } => {
                if *dim < 2 {
                    return Err(Error::arg("simplex dimension must be at least 2"));
                }
                (Shape::Vector(*dim), std::f64::consts::SQRT_2, 0.0)
            }
            SetKind::NuclearBall { rows, cols, radius } => {
                if !(*radius > 0.0) || *rows == 0 || *cols == 0 {
                    return Err(Error::arg(
                        "nuclear ball needs positive radius and dimensions",
                    ));
                }
                let shape = Shape::Matrix {
                    rows: *rows,
                    cols: *cols,
                };
                (shape, 2.0 * radius, 0.0)
            }
            SetKind::ColumnBallProduct { rows, cols, radius } => {
                if !(*radius > 0.0) || *rows == 0 || *cols == 0 {
                    return Err(Error::arg(
                        "column balls need positive radius and dimensions",
                    ));
                }
                let shape = Shape::Matrix {
                    rows: *rows,
                    cols: *cols,
                };
                let alpha = if *cols == 1 { 1.0 / radius } else { 0.0 };
                (shape, 2.0 * radius * (*cols as f64).sqrt(), alpha)
            }
            SetKind::Product(parts) => {
                if parts.is_empty() {
                    return Err(Error::arg("product of zero sets"));
                }
                let shape = Shape::Blocks(parts.iter().map(|p| p.shape.clone()).collect());
                let d = parts.iter().map(|p| p.diameter.powi(2)).sum::<f64>().sqrt();
                (shape, d, 0.0)
            }
        };
        Ok(FeasibleSet {
            kind,
            shape,
            diameter,
            alpha,
        })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::build(SetKind::Interval { lo, hi })
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        Self::build(SetKind::Box { lo, hi })
    }

    pub fn l2_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::build(SetKind::L2Ball { center, radius })
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        Self::build(SetKind::Simplex { dim })
    }

    pub fn nuclear_ball(rows: usize, cols: usize, radius: f64) -> Result<Self> {
        Self::build(SetKind::NuclearBall { rows, cols, radius })
    }

    pub fn column_balls(rows: usize, cols: usize, radius: f64) -> Result<Self> {
        Self::build(SetKind::ColumnBallProduct { rows, cols, radius })
    }

    pub fn product(parts: Vec<FeasibleSet>) -> Result<Self> {
        Self::build(SetKind::Product(parts))
    }

    /// Overrides the recorded strong-convexity modulus.
    pub fn with_strong_convexity(mut self, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) {
            return Err(Error::arg("strong convexity modulus must be nonnegative"));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    /// Euclidean (Frobenius) diameter.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Strong-convexity modulus; 0 when the set is not strongly convex.
    pub fn strong_convexity_alpha(&self) -> f64 {
        self.alpha
    }

    fn check(&self, p: &Point, what: &str) -> Result<()> {
        p.check_shape(&self.shape)?;
        if !p.is_finite() {
            return Err(Error::NonFinite(what.to_string()));
        }
        Ok(())
    }

    /// A minimizer of `d^T v` over the set. Ties resolve to the canonical
    /// (lowest-index / center) candidate.
    pub fn lmo(&self, d: &Point) -> Result<Point> {
        self.check(d, "LMO direction")?;
        let g = d.as_slice();
        let out = match &self.kind {
            SetKind::Interval { lo, hi } => oracles::box_lmo(&[*lo], &[*hi], g),
            SetKind::Box { lo, hi } => oracles::box_lmo(lo, hi, g),
            SetKind::L2Ball { center, radius } => oracles::l2ball_lmo(center, *radius, g),
            SetKind::Simplex { .. } => oracles::simplex_lmo(g)?,
            SetKind::NuclearBall { rows, cols, radius } => {
                oracles::nuclear_lmo(*rows, *cols, *radius, g)?
            }
            SetKind::ColumnBallProduct { rows, cols, radius } => {
                oracles::column_balls_lmo(*rows, *cols, *radius, g)
            }
            SetKind::Product(parts) => {
                let blocks = d
                    .split_blocks()
                    .iter()
                    .zip(parts)
                    .map(|(b, s)| s.lmo(b))
                    .collect::<Result<Vec<_>>>()?;
                return Ok(Point::blocks(blocks));
            }
        };
        Point::new(out, self.shape.clone())
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, u: &Point) -> Result<Point> {
        self.check(u, "projection input")?;
        let v = u.as_slice();
        let out = match &self.kind {
            SetKind::Interval { lo, hi } => oracles::box_project(&[*lo], &[*hi], v),
            SetKind::Box { lo, hi } => oracles::box_project(lo, hi, v),
            SetKind::L2Ball { center, radius } => oracles::l2ball_project(center, *radius, v),
            SetKind::Simplex { .. } => oracles::simplex_project(v),
            SetKind::NuclearBall { rows, cols, radius } => {
                oracles::nuclear_project(*rows, *cols, *radius, v)?
            }
            SetKind::ColumnBallProduct { rows, cols, radius } => {
                oracles::column_balls_project(*rows, *cols, *radius, v)
            }
            SetKind::Product(parts) => {
                let blocks = u
                    .split_blocks()
                    .iter()
                    .zip(parts)
                    .map(|(b, s)| s.project(b))
                    .collect::<Result<Vec<_>>>()?;
                return Ok(Point::blocks(blocks));
            }
        };
        Point::new(out, self.shape.clone())
    }

    /// Largest constraint violation of `p` (0 when feasible).
    pub fn violation(&self, p: &Point) -> Result<f64> {
        p.check_shape(&self.shape)?;
        let v = p.as_slice();
        let r = match &self.kind {
            SetKind::Interval { lo, hi } => (lo - v[0]).max(v[0] - hi).max(0.0),
            SetKind::Box { lo, hi } => v
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(x, (l, h))| (l - x).max(x - h))
                .fold(0.0, f64::max),
            SetKind::L2Ball { center, radius } => {
                (p.dist(&Point::vector(center.clone())) - radius).max(0.0)
            }
            SetKind::Simplex { .. } => {
                let neg = v.iter().map(|x| -x).fold(0.0, f64::max);
                neg.max((v.iter().sum::<f64>() - 1.0).abs())
            }
            SetKind::NuclearBall { rows, cols, radius } => {
                (oracles::nuclear_norm(*rows, *cols, v)? - radius).max(0.0)
            }
            SetKind::ColumnBallProduct { rows, cols, radius } => (0..*cols)
                .map(|j| {
                    let n = (0..*rows)
                        .map(|i| v[i * cols + j].powi(2))
                        .sum::<f64>()
                        .sqrt();
                    n - radius
                })
                .fold(0.0, f64::max),
            SetKind::Product(parts) => {
                let mut worst: f64 = 0.0;
                for (b, s) in p.split_blocks().iter().zip(parts) {
                    worst = worst.max(s.violation(b)?);
                }
                worst
            }
        };
        Ok(r)
    }

    pub fn contains(&self, p: &Point) -> bool {
        matches!(self.violation(p), Ok(r) if r <= MEMBERSHIP_TOL)
    }

    /// Draws a feasible point. Mixes interior draws with boundary points
    /// (LMO outputs at random directions) so property checks see both.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        if !matches!(self.kind, SetKind::Product(_)) && rng.random_bool(0.15) {
            let d = Point::new(
                (0..self.dim())
                    .map(|_| StandardNormal.sample(rng))
                    .collect(),
                self.shape.clone(),
            )
            .expect("shape");
            return self.lmo(&d).expect("closed-form LMO on gaussian direction");
        }
        let data: Vec<f64> = match &self.kind {
            SetKind::Interval { lo, hi } => vec![rng.random_range(*lo..=*hi)],
            SetKind::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| if l < h { rng.random_range(*l..=*h) } else { *l })
                .collect(),
            SetKind::L2Ball { center, radius } => {
                let n = center.len();
                let g = gaussian_unit(rng, n);
                let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
                center.iter().zip(&g).map(|(c, z)| c + r * z).collect()
            }
            SetKind::Simplex { dim } => {
                let e: Vec<f64> = (0..*dim).map(|_| Exp1.sample(rng)).collect();
                let s: f64 = e.iter().sum();
                e.iter().map(|v| v / s).collect()
            }
            SetKind::NuclearBall { rows, cols, radius } => {
                let g: Vec<f64> = (0..rows * cols)
                    .map(|_| StandardNormal.sample(rng))
                    .collect();
                let nn = oracles::nuclear_norm(*rows, *cols, &g).expect("svd of gaussian matrix");
                let target = radius * rng.random::<f64>();
                g.iter().map(|v| v * target / nn).collect()
            }
            SetKind::ColumnBallProduct { rows, cols, radius } => {
                let mut out = vec![0.0; rows * cols];
                for j in 0..*cols {
                    let g = gaussian_unit(rng, *rows);
                    let r = radius * rng.random::<f64>().powf(1.0 / *rows as f64);
                    for i in 0..*rows {
                        out[i * cols + j] = r * g[i];
                    }
                }
                out
            }
            SetKind::Product(parts) => {
                return Point::blocks(parts.iter().map(|s| s.sample(rng)).collect());
            }
        };
        Point::new(data, self.shape.clone()).expect("shape")
    }

    /// Every vertex of a polytope set (interval, box, simplex), for
    /// exhaustive LMO checks. `None` for non-polytopes or huge boxes.
    pub fn vertices(&self) -> Option<Vec<Point>> {
        match &self.kind {
            SetKind::Interval { lo, hi } => Some(vec![Point::scalar(*lo), Point::scalar(*hi)]),
            SetKind::Simplex { dim } => Some(
                (0..*dim)
                    .map(|i| {
                        let mut v = vec![0.0; *dim];
                        v[i] = 1.0;
                        Point::vector(v)
                    })
                    .collect(),
            ),
            SetKind::Box { lo, hi } if lo.len() <= 12 => {
                let n = lo.len();
                Some(
                    (0..1usize << n)
                        .map(|mask| {
                            Point::vector(
                                (0..n)
                                    .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                                    .collect(),
                            )
                        })
                        .collect(),
                )
            }
            _ => None,
        }
    }
}

fn gaussian_unit<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            return g.iter().map(|v| v / norm).collect();
        }
    }
}
