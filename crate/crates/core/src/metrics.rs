//! Stationarity and optimality measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::simplex_project;
use crate::point::Point;
use crate::problem::PayoffProblem;
use crate::set::FeasibleSet;
use crate::smoothing::{regularize_value, SmoothingState};
use crate::solvers::ErgodicSummary;

/// Slack on the ergodic duality-gap bound before it is reported as violated.
pub const ERGODIC_BOUND_SLACK: f64 = 1e-8;

/// `g^T x - min_{v in X} g^T v`.
pub fn fw_gap(set: &FeasibleSet, x: &Point, g: &Point) -> Result<f64> {
    let v = set.lmo(g)?;
    Ok(g.dot(&x.sub(&v)))
}

/// `|| (P_X(x - sigma g) - x) / sigma ||`.
pub fn projected_gradient_gap(set: &FeasibleSet, x: &Point, g: &Point, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::arg("sigma must be positive"));
    }
    let p = set.project(&x.axpy(-sigma, g))?;
    Ok(p.dist(x) / sigma)
}

/// Frank-Wolfe gap of `L(., y)` at `x`.
pub fn gap_lmo_x(problem: &dyn PayoffProblem, x: &Point, y: &Point) -> Result<f64> {
    fw_gap(problem.x_set(), x, &problem.grad_x(x, y)?)
}

/// Projected-gradient gap of `L(., y)` at `x`.
pub fn gap_po_x(problem: &dyn PayoffProblem, x: &Point, y: &Point, sigma: f64) -> Result<f64> {
    projected_gradient_gap(problem.x_set(), x, &problem.grad_x(x, y)?, sigma)
}

/// `max_{u in Y} L(x, u) - L(x, y)` from the exact best-response oracle.
pub fn gap_dual_y(problem: &dyn PayoffProblem, x: &Point, y: &Point) -> Result<f64> {
    let y_star = problem.best_response_y(x)?.ok_or_else(|| {
        Error::Capability(format!(
            "{} has no exact dual best response; use gap_dual_y_approx",
            problem.name()
        ))
    })?;
    Ok((problem.value(x, &y_star)? - problem.value(x, y)?).max(0.0))
}

/// Bracket on the dual gap from an inner conditional-gradient ascent:
/// the true gap lies in `[estimate, estimate + certificate]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualGapEstimate {
    pub estimate: f64,
    pub certificate: f64,
}

pub fn gap_dual_y_approx(
    problem: &dyn PayoffProblem,
    x: &Point,
    y: &Point,
    inner_iters: usize,
) -> Result<DualGapEstimate> {
    let base = problem.value(x, y)?;
    let lyy = problem.smoothness().lyy;
    let mut cur = y.clone();
    let mut cur_val = base;
    for k in 0..=inner_iters {
        let g = problem.grad_y(x, &cur)?;
        let u = problem.y_set().lmo(&g.scale(-1.0))?;
        let dir = u.sub(&cur);
        let fw = g.dot(&dir).max(0.0);
        if k == inner_iters || fw <= 0.0 {
            break;
        }
        let dist_sq = dir.norm_sq();
        let gamma = if lyy > 0.0 {
            (fw / (lyy * dist_sq)).min(1.0)
        } else {
            2.0 / (k as f64 + 2.0)
        };
        let cand = cur.axpy(gamma, &dir);
        let cand_val = problem.value(x, &cand)?;
        if cand_val >= cur_val || lyy == 0.0 {
            cur = cand;
            cur_val = cand_val;
        }
    }
    // concavity: max_u L(x, u) <= L(x, cur) + FW gap at cur
    let final_fw = {
        let g = problem.grad_y(x, &cur)?;
        let u = problem.y_set().lmo(&g.scale(-1.0))?;
        g.dot(&u.sub(&cur)).max(0.0)
    };
    let estimate = (cur_val - base).max(0.0);
    Ok(DualGapEstimate {
        estimate,
        certificate: final_fw,
    })
}

/// Maximizer over the probability simplex of
/// `(1/n) sum_i y_i s_i - (lambda/2) ||y - 1/n||^2`.
pub fn best_response_simplex_chi2(scores: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!(
            "simplex best response needs lambda > 0, got {lambda}"
        )));
    }
    let n = scores.len();
    if n == 0 {
        return Err(Error::arg("empty score vector"));
    }
    let nf = n as f64;
    let center: Vec<f64> = scores
        .iter()
        .map(|s| 1.0 / nf + s / (nf * lambda))
        .collect();
    Ok(simplex_project(&center))
}

/// `H_t = L_{beta_t}(x, y*_beta(x)) - L_{beta_t}(x, y)`, from the smoothed
/// best-response oracle (the exact one when `beta_t = 0`).
pub fn discrepancy_h(
    problem: &dyn PayoffProblem,
    smoothing: &SmoothingState,
    x: &Point,
    y: &Point,
    t: u64,
) -> Result<f64> {
    let beta = smoothing.beta_at(t);
    let y0 = &smoothing.y0;
    let y_star = if beta == 0.0 {
        problem.best_response_y(x)?
    } else {
        problem.best_response_y_smoothed(x, beta, y0)?
    }
    .ok_or_else(|| {
        Error::Capability(format!("{} has no smoothed best response", problem.name()))
    })?;
    let top = regularize_value(problem.value(x, &y_star)?, beta, &y_star, y0);
    let cur = regularize_value(problem.value(x, y)?, beta, y, y0);
    Ok((top - cur).max(0.0))
}

/// `max_Y L(x, .) - min_X L(., y)`, or `None` when the problem is not
/// convex in x or lacks either best-response oracle.
pub fn duality_gap(problem: &dyn PayoffProblem, x: &Point, y: &Point) -> Result<Option<f64>> {
    if !problem.is_convex_in_x() {
        return Ok(None);
    }
    let (Some(ys), Some(xs)) = (problem.best_response_y(x)?, problem.best_response_x(y)?) else {
        return Ok(None);
    };
    Ok(Some(
        (problem.value(x, &ys)? - problem.value(&xs, y)?).max(0.0),
    ))
}

/// Duality gap at the ergodic averages of a run, checked against the mean
/// of the per-iterate gaps (which bounds it for convex-concave payoffs).
pub fn duality_gap_ergodic(problem: &dyn PayoffProblem, ergodic: &ErgodicSummary) -> Result<f64> {
    if !problem.is_convex_in_x() {
        return Err(Error::Capability(format!(
            "duality gap is only meaningful for convex-concave payoffs; {} is nonconvex in x",
            problem.name()
        )));
    }
    let gap = duality_gap(problem, &ergodic.x_avg, &ergodic.y_avg)?.ok_or_else(|| {
        Error::Capability(format!("{} lacks exact best responses", problem.name()))
    })?;
    if let (Some(gx), Some(gy)) = (ergodic.mean_gap_lmo_x, ergodic.mean_gap_y) {
        let bound = gx + gy;
        if gap > bound + ERGODIC_BOUND_SLACK * (1.0 + bound.abs()) {
            return Err(Error::numerical(format!(
                "ergodic duality gap {gap:.6e} exceeds the mean-gap bound {bound:.6e}"
            )));
        }
    }
    Ok(gap)
}

/// `f(x) - min f` with `f(x) = max_Y L(x, .)`.
pub fn primal_opt_gap(problem: &dyn PayoffProblem, x: &Point) -> Result<Option<f64>> {
    let Some(opt) = problem.optimal_value() else {
        return Ok(None);
    };
    let Some(ys) = problem.best_response_y(x)? else {
        return Ok(None);
    };
    Ok(Some(problem.value(x, &ys)? - opt))
}

/// All point-wise measures at `(x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub gap_x_lmo: f64,
    pub gap_x_po: f64,
    /// Exact dual gap when the problem has a best-response oracle.
    pub gap_y: Option<f64>,
    /// The parameter used for `gap_x_po`.
    pub sigma: f64,
    pub duality_gap: Option<f64>,
    pub primal_opt_gap: Option<f64>,
    /// Smoothed discrepancy at iteration `t` of `smoothing`, when requested.
    pub h_t: Option<f64>,
}

pub fn gap_report(
    problem: &dyn PayoffProblem,
    x: &Point,
    y: &Point,
    sigma: f64,
    smoothing: Option<(&SmoothingState, u64)>,
) -> Result<GapReport> {
    let gx = problem.grad_x(x, y)?;
    let gap_y = match problem.best_response_y(x)? {
        Some(ys) => Some((problem.value(x, &ys)? - problem.value(x, y)?).max(0.0)),
        None => None,
    };
    let h_t = match smoothing {
        Some((s, t)) => Some(discrepancy_h(problem, s, x, y, t)?),
        None => None,
    };
    Ok(GapReport {
        gap_x_lmo: fw_gap(problem.x_set(), x, &gx)?,
        gap_x_po: projected_gradient_gap(problem.x_set(), x, &gx, sigma)?,
        gap_y,
        sigma,
        duality_gap: duality_gap(problem, x, y)?,
        primal_opt_gap: primal_opt_gap(problem, x)?,
        h_t,
    })
}

/// Least-squares fit of `log gap = intercept + slope log t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the fit residuals.
    pub stderr: f64,
    pub points: usize,
}

pub const MIN_RATE_POINTS: usize = 10;

pub fn estimate_rate(ts: &[f64], gaps: &[f64]) -> Result<RateEstimate> {
    if ts.len() != gaps.len() {
        return Err(Error::arg(format!(
            "{} iteration counts but {} gaps",
            ts.len(),
            gaps.len()
        )));
    }
    if ts.len() < MIN_RATE_POINTS {
        return Err(Error::Domain(format!(
            "rate fit needs at least {MIN_RATE_POINTS} points, got {}",
            ts.len()
        )));
    }
    if let Some((t, g)) = ts
        .iter()
        .zip(gaps)
        .find(|(t, g)| !(**t > 0.0) || !(**g > 0.0))
    {
        return Err(Error::Domain(format!(
            "rate fit needs positive data, got t = {t}, gap = {g}"
        )));
    }
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Domain(
            "rate fit needs distinct iteration counts".into(),
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(RateEstimate {
        slope,
        intercept,
        stderr,
        points: lx.len(),
    })
}

/// Fits only the points with `t >= t_max / 10`.
pub fn estimate_rate_trailing_decade(ts: &[f64], gaps: &[f64]) -> Result<RateEstimate> {
    let t_max = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (t, g): (Vec<f64>, Vec<f64>) = ts
        .iter()
        .zip(gaps)
        .filter(|(t, _)| **t >= t_max / 10.0)
        .map(|(t, g)| (*t, *g))
        .unzip();
    estimate_rate(&t, &g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rate_of_exact_power_law() {
        let ts: Vec<f64> = (1..=20).map(|k| (k * 10) as f64).collect();
        let gs: Vec<f64> = ts.iter().map(|t| 3.0 * t.powf(-0.5)).collect();
        let r = estimate_rate(&ts, &gs).unwrap();
        assert_relative_eq!(r.slope, -0.5, epsilon = 1e-12);
        assert_relative_eq!(r.intercept, 3f64.ln(), epsilon = 1e-10);
        assert!(r.stderr < 1e-10);
    }

    #[test]
    fn rate_rejects_short_or_nonpositive() {
        let ts = [1.0, 2.0, 3.0];
        assert!(matches!(estimate_rate(&ts, &ts), Err(Error::Domain(_))));
        let ts: Vec<f64> = (1..=12).map(f64::from).collect();
        let mut gs = ts.clone();
        gs[3] = 0.0;
        assert!(matches!(estimate_rate(&ts, &gs), Err(Error::Domain(_))));
    }

    #[test]
    fn chi2_best_response_examples() {
        let y = best_response_simplex_chi2(&[0.0, 0.0, 0.0, 0.0], 10.0).unwrap();
        for v in y {
            assert_relative_eq!(v, 0.25, epsilon = 1e-15);
        }
        assert!(matches!(
            best_response_simplex_chi2(&[1.0], 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn projected_gap_is_zero_at_constrained_minimum() {
        let set = FeasibleSet::interval(0.0, 1.0).unwrap();
        let x = Point::scalar(0.0);
        let g = Point::scalar(2.0);
        assert_eq!(projected_gradient_gap(&set, &x, &g, 0.5).unwrap(), 0.0);
        assert_eq!(fw_gap(&set, &x, &g).unwrap(), 0.0);
    }
}
