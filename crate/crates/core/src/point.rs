//! Flat real-valued points with a structural shape.
//!
//! Every iterate, gradient and search direction in the crate is a [`Point`]:
//! a flat coordinate buffer plus a [`Shape`] describing how the buffer is
//! laid out (vector, row-major matrix, or a tuple of blocks for product
//! spaces). Inner products and norms are always Euclidean on the flat view,
//! which for matrices is the Frobenius inner product.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Vector(usize),
    /// Row-major `rows x cols` matrix.
    Matrix {
        rows: usize,
        cols: usize,
    },
    Blocks(Vec<Shape>),
}

impl Shape {
    pub fn len(&self) -> usize {
        match self {
            Shape::Vector(n) => *n,
            Shape::Matrix { rows, cols } => rows * cols,
            Shape::Blocks(blocks) => blocks.iter().map(Shape::len).sum(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Vector(n) => write!(f, "vector[{n}]"),
            Shape::Matrix { rows, cols } => write!(f, "matrix[{rows}x{cols}]"),
            Shape::Blocks(blocks) => {
                write!(f, "(")?;
                for (i, b) in blocks.iter().enumerate() {
                    if i > 0 {
                        write!(f, " x ")?;
                    }
                    write!(f, "{b}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    data: Vec<f64>,
    shape: Shape,
}

impl Point {
    pub fn new(data: Vec<f64>, shape: Shape) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::arg(format!(
                "{} coordinates do not fit shape {shape}",
                data.len()
            )));
        }
        Ok(Point { data, shape })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        let n = data.len();
        Point {
            data,
            shape: Shape::Vector(n),
        }
    }

    pub fn scalar(v: f64) -> Self {
        Point::vector(vec![v])
    }

    pub fn zeros(shape: Shape) -> Self {
        Point {
            data: vec![0.0; shape.len()],
            shape,
        }
    }

    /// Builds a matrix point from a row-major buffer.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Point::new(data, Shape::Matrix { rows, cols })
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Point {
            data,
            shape: Shape::Matrix { rows, cols },
        }
    }

    /// Concatenates blocks into a product-space point.
    pub fn blocks(parts: Vec<Point>) -> Self {
        let shape = Shape::Blocks(parts.iter().map(|p| p.shape.clone()).collect());
        let data = parts.into_iter().flat_map(|p| p.data).collect();
        Point { data, shape }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Splits a block point into its blocks. Non-block points yield themselves.
    pub fn split_blocks(&self) -> Vec<Point> {
        match &self.shape {
            Shape::Blocks(shapes) => {
                let mut offset = 0;
                shapes
                    .iter()
                    .map(|s| {
                        let n = s.len();
                        let p = Point {
                            data: self.data[offset..offset + n].to_vec(),
                            shape: s.clone(),
                        };
                        offset += n;
                        p
                    })
                    .collect()
            }
            _ => vec![self.clone()],
        }
    }

    /// Matrix view of a matrix-shaped point (vectors become a column).
    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        match self.shape {
            Shape::Matrix { rows, cols } => DMatrix::from_row_slice(rows, cols, &self.data),
            _ => DMatrix::from_column_slice(self.data.len(), 1, &self.data),
        }
    }

    pub fn check_shape(&self, expected: &Shape) -> Result<()> {
        if &self.shape != expected {
            return Err(Error::ShapeMismatch {
                expected: expected.clone(),
                found: self.shape.clone(),
            });
        }
        Ok(())
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    fn zip_map(&self, other: &Point, f: impl Fn(f64, f64) -> f64) -> Point {
        Point {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            shape: self.shape.clone(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Point {
        Point {
            data: self.data.iter().map(|&a| f(a)).collect(),
            shape: self.shape.clone(),
        }
    }

    pub fn add(&self, other: &Point) -> Point {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Point) -> Point {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Point {
        self.map(|a| s * a)
    }

    /// `self + s * dir`
    pub fn axpy(&self, s: f64, dir: &Point) -> Point {
        self.zip_map(dir, |a, b| a + s * b)
    }

    /// Convex combination `self + w * (target - self)`.
    pub fn towards(&self, target: &Point, w: f64) -> Point {
        self.zip_map(target, |a, b| a + w * (b - a))
    }
}

/// Kahan-compensated running sum of points.
#[derive(Clone, Debug)]
pub struct CompensatedSum {
    sum: Vec<f64>,
    comp: Vec<f64>,
    shape: Shape,
    count: u64,
}

impl CompensatedSum {
    pub fn new(shape: Shape) -> Self {
        let n = shape.len();
        CompensatedSum {
            sum: vec![0.0; n],
            comp: vec![0.0; n],
            shape,
            count: 0,
        }
    }

    pub fn add(&mut self, p: &Point) {
        for ((s, c), &v) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(&p.data) {
            let y = v - *c;
            let t = *s + y;
            *c = (t - *s) - y;
            *s = t;
        }
        self.count += 1;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<Point> {
        if self.count == 0 {
            return None;
        }
        let k = self.count as f64;
        Some(Point {
            data: self.sum.iter().map(|s| s / k).collect(),
            shape: self.shape.clone(),
        })
    }
}

/// Kahan-compensated scalar accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedScalar {
    sum: f64,
    comp: f64,
    count: u64,
}

impl CompensatedScalar {
    pub fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
        self.count += 1;
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_lengths() {
        let s = Shape::Blocks(vec![Shape::Vector(3), Shape::Matrix { rows: 2, cols: 4 }]);
        assert_eq!(s.len(), 11);
        assert!(Point::new(vec![0.0; 10], s).is_err());
    }

    #[test]
    fn blocks_roundtrip() {
        let a = Point::vector(vec![1.0, 2.0]);
        let b = Point::matrix(1, 2, vec![3.0, 4.0]).unwrap();
        let p = Point::blocks(vec![a.clone(), b.clone()]);
        assert_eq!(p.split_blocks(), vec![a, b]);
    }

    #[test]
    fn dmatrix_is_row_major() {
        let p = Point::matrix(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let m = p.to_dmatrix();
        assert_eq!(m[(0, 2)], 3.0);
        assert_eq!(m[(1, 0)], 4.0);
        assert_eq!(Point::from_dmatrix(&m), p);
    }

    #[test]
    fn kahan_mean() {
        let mut s = CompensatedSum::new(Shape::Vector(1));
        for _ in 0..10 {
            s.add(&Point::scalar(0.1));
        }
        assert!((s.mean().unwrap().as_slice()[0] - 0.1).abs() < 1e-17);
    }
}
