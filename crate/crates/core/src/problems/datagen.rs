//! Synthetic data for the dictionary-learning and robust-classification
//! experiments.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded;

use super::libsvm::{Samples, SparseRow};
use super::quadratic_saddle::QuadraticSaddle;
use super::spectral_norm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DlSizes {
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub l: usize,
    pub q: usize,
    pub n_new: usize,
}

impl DlSizes {
    /// Full-size instance.
    pub const FULL: DlSizes = DlSizes {
        m: 100,
        n: 500,
        p: 50,
        l: 5,
        q: 60,
        n_new: 103,
    };

    /// A scaled-down instance that runs in seconds.
    pub const DESK: DlSizes = DlSizes {
        m: 20,
        n: 50,
        p: 10,
        l: 3,
        q: 12,
        n_new: 20,
    };
}

/// Generated dictionary-learning instance.
#[derive(Clone, Debug, PartialEq)]
pub struct DlData {
    /// Old data `A = D C` (m x n).
    pub a: DMatrix<f64>,
    /// New data `A'` (m x n').
    pub a_new: DMatrix<f64>,
    /// Old coefficients zero-padded to q rows (q x n).
    pub c_tilde: DMatrix<f64>,
    /// Initial dictionary (m x q).
    pub d0: DMatrix<f64>,
    /// Initial coefficients, all zero (q x n').
    pub c0: DMatrix<f64>,
}

fn gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn normalize_columns(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
}

pub fn dl_generate(sizes: DlSizes, seed: u64) -> Result<DlData> {
    let DlSizes {
        m,
        n,
        p,
        l,
        q,
        n_new,
    } = sizes;
    if [m, n, p, l, q, n_new].contains(&0) {
        return Err(Error::arg(
            "all dictionary-learning dimensions must be positive",
        ));
    }
    if p > q {
        return Err(Error::arg(format!(
            "true dictionary size p = {p} exceeds learned size q = {q}"
        )));
    }
    let mut rng = seeded(seed);
    let mut d = gaussian(&mut rng, m, p);
    normalize_columns(&mut d);
    let u = gaussian(&mut rng, p, l);
    let v = gaussian(&mut rng, n, l);
    let c = &u * v.transpose() / (spectral_norm(&u) * spectral_norm(&v));
    let a = &d * &c;
    let mut c_tilde = DMatrix::zeros(q, n);
    c_tilde.view_mut((0, 0), (p, n)).copy_from(&c);
    let a_new = gaussian(&mut rng, m, n_new);
    let unif = Uniform::new(0.0, 0.1).expect("valid range");
    let mut d0 = DMatrix::from_fn(m, q, |_, _| unif.sample(&mut rng));
    normalize_columns(&mut d0);
    Ok(DlData {
        a,
        a_new,
        c_tilde,
        d0,
        c0: DMatrix::zeros(q, n_new),
    })
}

/// Gaussian class clusters: class `j` has mean `separation * e_j` in the
/// first `k` coordinates. Labels are 1-based, in order of first appearance.
pub fn rc_synthetic(n: usize, d: usize, k: usize, separation: f64, seed: u64) -> Result<Samples> {
    if n == 0 || d == 0 || k < 2 {
        return Err(Error::arg("need n >= 1, d >= 1 and k >= 2"));
    }
    let mut rng = seeded(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        // cycle the first k samples through every class so all classes appear
        let class = if i < k { i } else { rng.random_range(0..k) };
        let feats: Vec<(usize, f64)> = (0..d)
            .map(|j| {
                let z: f64 = StandardNormal.sample(&mut rng);
                let shift = if j == class % d { separation } else { 0.0 };
                (j, z + shift)
            })
            .collect();
        rows.push(SparseRow::new(feats)?);
        labels.push(class + 1);
    }
    Samples::new(rows, labels, d)
}

/// Entry law of a random payoff matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffEntries {
    Gaussian,
    /// Uniform on [0, 1).
    Uniform,
}

pub fn random_payoff(
    rows: usize,
    cols: usize,
    entries: PayoffEntries,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if rows == 0 || cols == 0 {
        return Err(Error::arg("payoff dimensions must be positive"));
    }
    let mut rng = seeded(seed);
    Ok(match entries {
        PayoffEntries::Gaussian => gaussian(&mut rng, rows, cols),
        PayoffEntries::Uniform => {
            let unif = Uniform::new(0.0, 1.0).expect("valid range");
            DMatrix::from_fn(rows, cols, |_, _| unif.sample(&mut rng))
        }
    })
}

/// Random well-conditioned quadratic saddle in `dim` dimensions:
/// `B = I + noise * G / sqrt(dim)`, centers `0.3 * N(0, I)`, both balls of
/// radius `radius`. Draw order: G, x-center, y-center.
pub fn random_quadratic_saddle(
    dim: usize,
    mu_x: f64,
    mu_y: f64,
    noise: f64,
    radius: f64,
    seed: u64,
) -> Result<QuadraticSaddle> {
    if dim == 0 {
        return Err(Error::arg("dimension must be positive"));
    }
    let mut rng = seeded(seed);
    let g = gaussian(&mut rng, dim, dim);
    let b = DMatrix::identity(dim, dim) + g * (noise / (dim as f64).sqrt());
    let x_hat = gaussian(&mut rng, dim, 1).column(0) * 0.3;
    let y_hat = gaussian(&mut rng, dim, 1).column(0) * 0.3;
    QuadraticSaddle::new(
        mu_x,
        mu_y,
        b,
        x_hat.iter().copied().collect(),
        y_hat.iter().copied().collect(),
        (radius, radius),
    )
}
