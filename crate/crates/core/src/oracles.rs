//! Closed-form linear minimization and projection oracles.
//!
//! These kernels work on raw buffers; [`crate::set::FeasibleSet`] wraps
//! them with shape checks. Matrices are row-major.

use nalgebra::{DMatrix, DVector, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Matrices whose larger dimension exceeds this use power iteration for the
/// top singular triple instead of a full SVD.
pub const POWER_ITERATION_THRESHOLD: usize = 64;
const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 10_000;
/// Relative slack under which a matrix counts as inside the nuclear ball.
const NUCLEAR_BOUNDARY_SLACK: f64 = 1e-13;
const POWER_SEED: u64 = 0x0005_eed0_f5f0;

/// Index of the smallest entry; lowest index on ties.
fn argmin(d: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in d.iter().enumerate().skip(1) {
        if v < d[best] {
            best = i;
        }
    }
    best
}

/// Vertex of the unit simplex minimizing `d^T v`.
pub fn simplex_lmo(d: &[f64]) -> Result<Vec<f64>> {
    if d.is_empty() {
        return Err(Error::arg("simplex dimension must be at least 1"));
    }
    let mut v = vec![0.0; d.len()];
    v[argmin(d)] = 1.0;
    Ok(v)
}

/// Euclidean projection onto `{x >= 0, sum x = total}` by sort-and-threshold.
pub fn simplex_project_scaled(u: &[f64], total: f64) -> Vec<f64> {
    let theta = simplex_threshold(u, total);
    u.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Euclidean projection onto the unit simplex.
pub fn simplex_project(u: &[f64]) -> Vec<f64> {
    simplex_project_scaled(u, 1.0)
}

fn simplex_threshold(u: &[f64], total: f64) -> f64 {
    let mut sorted = u.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let candidate = (cumsum - total) / (j + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
        }
    }
    theta
}

/// Projection of a nonnegative vector onto `{s >= 0, sum s <= radius}`.
pub fn nonneg_l1_ball_project(s: &[f64], radius: f64) -> Vec<f64> {
    let clipped: Vec<f64> = s.iter().map(|v| v.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= radius {
        clipped
    } else {
        simplex_project_scaled(&clipped, radius)
    }
}

pub fn l2ball_lmo(center: &[f64], radius: f64, d: &[f64]) -> Vec<f64> {
    let n = norm(d);
    if n == 0.0 {
        return center.to_vec();
    }
    center
        .iter()
        .zip(d)
        .map(|(c, g)| c - radius * g / n)
        .collect()
}

pub fn l2ball_project(center: &[f64], radius: f64, u: &[f64]) -> Vec<f64> {
    let diff: Vec<f64> = u.iter().zip(center).map(|(a, c)| a - c).collect();
    let n = norm(&diff);
    if n <= radius {
        return u.to_vec();
    }
    center
        .iter()
        .zip(&diff)
        .map(|(c, v)| c + radius * v / n)
        .collect()
}

/// Box LMO: `hi` where the direction is negative, `lo` otherwise.
pub fn box_lmo(lo: &[f64], hi: &[f64], d: &[f64]) -> Vec<f64> {
    d.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&g, (&l, &h))| if g < 0.0 { h } else { l })
        .collect()
}

pub fn box_project(lo: &[f64], hi: &[f64], u: &[f64]) -> Vec<f64> {
    u.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&v, (&l, &h))| v.clamp(l, h))
        .collect()
}

/// Product of `cols` Euclidean balls (one per column of a row-major
/// `rows x cols` matrix), each centered at zero.
pub fn column_balls_lmo(rows: usize, cols: usize, radius: f64, g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for j in 0..cols {
        let n = (0..rows)
            .map(|i| g[i * cols + j].powi(2))
            .sum::<f64>()
            .sqrt();
        if n > 0.0 {
            for i in 0..rows {
                out[i * cols + j] = -radius * g[i * cols + j] / n;
            }
        }
    }
    out
}

pub fn column_balls_project(rows: usize, cols: usize, radius: f64, u: &[f64]) -> Vec<f64> {
    let mut out = u.to_vec();
    for j in 0..cols {
        let n = (0..rows)
            .map(|i| u[i * cols + j].powi(2))
            .sum::<f64>()
            .sqrt();
        if n > radius {
            for i in 0..rows {
                out[i * cols + j] *= radius / n;
            }
        }
    }
    out
}

/// Leading singular triple `(u, sigma, v)` of a matrix.
#[derive(Clone, Debug)]
pub struct SingularTriple {
    pub u: DVector<f64>,
    pub sigma: f64,
    pub v: DVector<f64>,
}

fn svd_failure(m: &DMatrix<f64>) -> Error {
    let (r, c) = m.shape();
    Error::numerical(format!(
        "SVD did not converge for {r}x{c} matrix (frobenius norm {:.3e}, max |entry| {:.3e})",
        m.norm(),
        m.amax()
    ))
}

type DynSvd = SVD<f64, nalgebra::Dyn, nalgebra::Dyn>;

/// Relative reconstruction error above which a factorization is rejected.
const SVD_RECONSTRUCTION_TOL: f64 = 1e-11;

fn full_svd(m: &DMatrix<f64>) -> Result<DynSvd> {
    // a tolerance of exactly f64::EPSILON can stall the implicit-shift sweep
    // on rank-deficient input and return wrong singular values; 5 eps is the
    // library's own default
    let max_iter = 1000 * (m.nrows() + m.ncols());
    let svd = SVD::try_new(m.clone(), true, true, 5.0 * f64::EPSILON, max_iter);
    // even then a few inputs in ten thousand come back with a wrong
    // factorization, so check it and fall back to one-sided Jacobi
    if let Some(svd) = svd.filter(|s| reconstructs(s, m)) {
        return Ok(svd);
    }
    let svd = jacobi_svd(m)?;
    if reconstructs(&svd, m) {
        Ok(svd)
    } else {
        Err(svd_failure(m))
    }
}

fn reconstructs(svd: &DynSvd, m: &DMatrix<f64>) -> bool {
    let (Some(u), Some(v_t)) = (svd.u.as_ref(), svd.v_t.as_ref()) else {
        return false;
    };
    if svd.singular_values.iter().any(|s| !(*s >= 0.0)) {
        return false;
    }
    let rec = u * DMatrix::from_diagonal(&svd.singular_values) * v_t;
    (rec - m).norm() <= SVD_RECONSTRUCTION_TOL * m.norm() + f64::MIN_POSITIVE
}

/// One-sided (Hestenes) Jacobi SVD. Slower than the bidiagonal method but
/// converges reliably on small dense matrices.
fn jacobi_svd(m: &DMatrix<f64>) -> Result<DynSvd> {
    if m.nrows() < m.ncols() {
        let t = jacobi_svd(&m.transpose())?;
        return Ok(SVD {
            u: t.v_t.map(|v| v.transpose()),
            v_t: t.u.map(|u| u.transpose()),
            singular_values: t.singular_values,
        });
    }
    let n = m.ncols();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let mut converged = false;
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let (x, y) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = c * x - s * y;
                        mat[(i, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(svd_failure(m));
    }
    let sigma = DVector::from_fn(n, |j, _| a.column(j).norm());
    let mut u = DMatrix::<f64>::zeros(m.nrows(), n);
    for j in 0..n {
        if sigma[j] > 0.0 {
            u.set_column(j, &(a.column(j) / sigma[j]));
        }
    }
    Ok(SVD {
        u: Some(u),
        v_t: Some(v.transpose()),
        singular_values: sigma,
    })
}

/// Top singular triple: full SVD for small matrices, seeded power iteration
/// above [`POWER_ITERATION_THRESHOLD`].
pub fn top_singular_triple(m: &DMatrix<f64>) -> Result<SingularTriple> {
    let (rows, cols) = m.shape();
    if rows.max(cols) > POWER_ITERATION_THRESHOLD {
        return power_iteration(m);
    }
    let svd = full_svd(m)?;
    let (u, v_t) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let mut k = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > svd.singular_values[k] {
            k = i;
        }
    }
    Ok(SingularTriple {
        u: u.column(k).into_owned(),
        sigma: svd.singular_values[k],
        v: v_t.row(k).transpose(),
    })
}

fn power_iteration(m: &DMatrix<f64>) -> Result<SingularTriple> {
    let (rows, cols) = m.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut v = DVector::from_fn(cols, |_, _| StandardNormal.sample(&mut rng));
    v /= v.norm();
    let mut sigma = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let u = m * &v;
        let s = u.norm();
        if !s.is_finite() {
            return Err(svd_failure(m));
        }
        if s == 0.0 {
            break;
        }
        let w = m.transpose() * (u / s);
        let wn = w.norm();
        if wn == 0.0 {
            break;
        }
        v = w / wn;
        let converged = (wn - sigma).abs() <= POWER_TOL * wn.max(1.0);
        sigma = wn;
        if converged {
            break;
        }
    }
    let u = m * &v;
    let s = u.norm();
    if s == 0.0 {
        let mut e1 = DVector::zeros(rows);
        e1[0] = 1.0;
        let mut f1 = DVector::zeros(cols);
        f1[0] = 1.0;
        return Ok(SingularTriple {
            u: e1,
            sigma: 0.0,
            v: f1,
        });
    }
    Ok(SingularTriple {
        u: u / s,
        sigma: s,
        v,
    })
}

/// Nuclear-ball LMO: `-radius * u1 v1^T` for the top singular pair of `g`
/// (row-major `rows x cols`); `-radius * e1 e1^T` when `g` vanishes.
pub fn nuclear_lmo(rows: usize, cols: usize, radius: f64, g: &[f64]) -> Result<Vec<f64>> {
    let m = DMatrix::from_row_slice(rows, cols, g);
    let triple = top_singular_triple(&m)?;
    let mut out = vec![0.0; rows * cols];
    if triple.sigma == 0.0 {
        out[0] = -radius;
        return Ok(out);
    }
    for i in 0..rows {
        for j in 0..cols {
            out[i * cols + j] = -radius * triple.u[i] * triple.v[j];
        }
    }
    Ok(out)
}

pub fn nuclear_norm(rows: usize, cols: usize, m: &[f64]) -> Result<f64> {
    let mat = DMatrix::from_row_slice(rows, cols, m);
    Ok(full_svd(&mat)?.singular_values.sum())
}

/// Projection onto `{M : ||M||_* <= radius}` by projecting the spectrum.
pub fn nuclear_project(rows: usize, cols: usize, radius: f64, m: &[f64]) -> Result<Vec<f64>> {
    let mat = DMatrix::from_row_slice(rows, cols, m);
    let svd = full_svd(&mat)?;
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    // points already projected land within rounding of the boundary; leave
    // them alone so projection stays idempotent
    if sigma.iter().sum::<f64>() <= radius * (1.0 + NUCLEAR_BOUNDARY_SLACK) {
        return Ok(m.to_vec());
    }
    let shrunk = nonneg_l1_ball_project(&sigma, radius);
    let (u, v_t) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let mut out = DMatrix::<f64>::zeros(rows, cols);
    for (k, &s) in shrunk.iter().enumerate() {
        if s > 0.0 {
            out += s * u.column(k) * v_t.row(k);
        }
    }
    let mut flat = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            flat.push(out[(i, j)]);
        }
    }
    Ok(flat)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn simplex_lmo_examples() {
        assert_eq!(simplex_lmo(&[3.0, 1.0, 2.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(
            simplex_lmo(&[-1.0, 5.0, -1.0]).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        assert_eq!(simplex_lmo(&[0.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert!(simplex_lmo(&[]).is_err());
    }

    #[test]
    fn simplex_project_examples() {
        let p = simplex_project(&[0.5, 0.5, 0.5]);
        for v in p {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
        assert_eq!(simplex_project(&[2.0, 0.0, 0.0]), vec![1.0, 0.0, 0.0]);
    }

    /// Dense grid search over the 2-simplex for the closest point, refined
    /// around the best cell. Independent of the threshold routine.
    fn grid_projection(u: &[f64; 3]) -> [f64; 3] {
        let dist = |a: f64, b: f64| {
            let c = 1.0 - a - b;
            (a - u[0]).powi(2) + (b - u[1]).powi(2) + (c - u[2]).powi(2)
        };
        let (mut best_a, mut best_b) = (0.0, 0.0);
        let mut best = f64::INFINITY;
        let n = 2000;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let (a, b) = (i as f64 / n as f64, j as f64 / n as f64);
                let d = dist(a, b);
                if d < best {
                    best = d;
                    best_a = a;
                    best_b = b;
                }
            }
        }
        let mut h = 1.0 / n as f64;
        for _ in 0..40 {
            let mut improved = (best_a, best_b);
            for da in [-1.0, 0.0, 1.0] {
                for db in [-1.0, 0.0, 1.0] {
                    let (a, b) = (best_a + da * h, best_b + db * h);
                    if a < 0.0 || b < 0.0 || a + b > 1.0 {
                        continue;
                    }
                    let d = dist(a, b);
                    if d < best {
                        best = d;
                        improved = (a, b);
                    }
                }
            }
            if improved == (best_a, best_b) {
                h /= 2.0;
            }
            (best_a, best_b) = improved;
        }
        [best_a, best_b, 1.0 - best_a - best_b]
    }

    #[test]
    fn simplex_project_matches_grid_oracle() {
        let u = [0.2, 0.3, 0.1];
        let oracle = grid_projection(&u);
        // frozen from the grid oracle: (0.3333.., 0.4333.., 0.2333..)
        let frozen = [1.0 / 3.0, 13.0 / 30.0, 7.0 / 30.0];
        for i in 0..3 {
            assert_abs_diff_eq!(oracle[i], frozen[i], epsilon = 1e-6);
        }
        let p = simplex_project(&u);
        for i in 0..3 {
            assert_abs_diff_eq!(p[i], oracle[i], epsilon = 1e-6);
        }
        for u in [[0.9, -0.4, 0.7], [-1.0, -2.0, 0.5], [0.3, 0.3, 0.3]] {
            let o = grid_projection(&u);
            let p = simplex_project(&u);
            for i in 0..3 {
                assert_abs_diff_eq!(p[i], o[i], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn l2ball_examples() {
        let v = l2ball_lmo(&[0.0, 0.0], 1.0, &[3.0, 4.0]);
        assert_abs_diff_eq!(v[0], -0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], -0.8, epsilon = 1e-15);
        assert_eq!(l2ball_lmo(&[0.5, 0.5], 1.0, &[0.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(l2ball_lmo(&[1.0, 0.0], 2.0, &[0.0, -1.0]), vec![1.0, 2.0]);

        let p = l2ball_project(&[0.0, 0.0], 1.0, &[3.0, 4.0]);
        assert_abs_diff_eq!(p[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.8, epsilon = 1e-15);
        assert_eq!(
            l2ball_project(&[0.0, 0.0], 1.0, &[0.1, 0.1]),
            vec![0.1, 0.1]
        );
        assert_eq!(
            l2ball_project(&[1.0, 1.0], 1.0, &[1.0, 3.0]),
            vec![1.0, 2.0]
        );
    }

    #[test]
    fn box_examples() {
        assert_eq!(box_lmo(&[0.0], &[2.5], &[-1.0]), vec![2.5]);
        assert_eq!(box_lmo(&[0.0], &[2.5], &[1.0]), vec![0.0]);
        assert_eq!(box_lmo(&[0.0], &[2.5], &[0.0]), vec![0.0]);
        assert_eq!(
            box_project(&[0.0, 0.0], &[1.0, 1.0], &[-0.5, 1.5]),
            vec![0.0, 1.0]
        );
    }

    #[test]
    fn nuclear_lmo_examples() {
        let out = nuclear_lmo(2, 2, 5.0, &[2.0, 0.0, 0.0, 1.0]).unwrap();
        let expected = [-5.0, 0.0, 0.0, 0.0];
        for (a, b) in out.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert_eq!(
            nuclear_lmo(2, 3, 3.0, &[0.0; 6]).unwrap(),
            vec![-3.0, 0., 0., 0., 0., 0.]
        );
    }

    #[test]
    fn nuclear_lmo_certificate_random() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (rows, cols) in [(4, 3), (3, 7), (70, 5), (5, 90)] {
            let g: Vec<f64> = (0..rows * cols)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let m = DMatrix::from_row_slice(rows, cols, &g);
            // independent route: largest eigenvalue of the Gram matrix
            let sigma1 = (m.transpose() * &m)
                .symmetric_eigen()
                .eigenvalues
                .max()
                .sqrt();
            let out = nuclear_lmo(rows, cols, 2.0, &g).unwrap();
            let inner: f64 = g.iter().zip(&out).map(|(a, b)| a * b).sum();
            assert!((inner + 2.0 * sigma1).abs() <= 1e-8 * sigma1.max(1.0));
        }
    }

    fn random_matrix(rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        use rand::Rng;
        let (r, c) = (rng.random_range(1..7), rng.random_range(1..7));
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let mut gauss = |r, c| DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut *rng));
        if r > 1 && c > 1 {
            let k = 1 + (r.min(c) - 1) / 2;
            gauss(r, k) * gauss(k, c) * scale
        } else {
            gauss(r, c) * scale
        }
    }

    #[test]
    fn jacobi_svd_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let m = random_matrix(&mut rng);
            let svd = jacobi_svd(&m).unwrap();
            assert!(reconstructs(&svd, &m), "{m}");
            let smax = svd.singular_values.max();
            let keep: Vec<usize> = (0..svd.singular_values.len())
                .filter(|&k| svd.singular_values[k] > 1e-10 * smax)
                .collect();
            let u = svd.u.unwrap().select_columns(&keep);
            let v = svd.v_t.unwrap().select_rows(&keep).transpose();
            let eye = DMatrix::<f64>::identity(keep.len(), keep.len());
            assert!((u.transpose() * &u - &eye).norm() < 1e-9);
            assert!((v.transpose() * &v - &eye).norm() < 1e-9);
        }
    }

    // inputs on which the bidiagonal SVD alone returned a wrong factorization
    #[test]
    fn full_svd_is_always_a_factorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20_000 {
            let m = random_matrix(&mut rng);
            assert!(reconstructs(&full_svd(&m).unwrap(), &m), "{m}");
        }
    }

    #[test]
    fn nuclear_project_examples() {
        let out = nuclear_project(2, 2, 2.0, &[3.0, 0.0, 0.0, 1.0]).unwrap();
        for (a, b) in out.iter().zip([2.0, 0.0, 0.0, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        let inside = [0.25, 0.0, 0.0, 0.25];
        assert_eq!(
            nuclear_project(2, 2, 1.0, &inside).unwrap(),
            inside.to_vec()
        );
        let boundary = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(
            nuclear_project(2, 2, 2.0, &boundary).unwrap(),
            boundary.to_vec()
        );
    }

    #[test]
    fn column_balls() {
        // 2x2, columns (3,4) and (0,0)
        let g = [3.0, 0.0, 4.0, 0.0];
        let v = column_balls_lmo(2, 2, 1.0, &g);
        assert_abs_diff_eq!(v[0], -0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(v[2], -0.8, epsilon = 1e-15);
        assert_eq!((v[1], v[3]), (0.0, 0.0));
        let p = column_balls_project(2, 2, 1.0, &[3.0, 0.1, 4.0, 0.1]);
        assert_abs_diff_eq!(p[0], 0.6, epsilon = 1e-15);
        assert_eq!((p[1], p[3]), (0.1, 0.1));
    }
}
