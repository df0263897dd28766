//! Sampling-based verification of sets and problems: oracle optimality,
//! gradient consistency, Lipschitz and concavity constants, and the gap
//! inequalities. Each check returns the worst observed violation (0 or
//! negative means the property held everywhere it was probed).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::metrics;
use crate::point::Point;
use crate::problem::PayoffProblem;
use crate::set::FeasibleSet;
use crate::smoothing::regularize_value;

fn gaussian_like<R: Rng + ?Sized>(rng: &mut R, like: &Point, scale: f64) -> Point {
    let data = (0..like.len())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut *rng);
            scale * z
        })
        .collect();
    Point::new(data, like.shape().clone()).expect("same shape")
}

/// Gaussian point of `set`'s shape, occasionally scaled far outside the set.
pub fn random_direction<R: Rng + ?Sized>(set: &FeasibleSet, rng: &mut R) -> Point {
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    let data = (0..set.dim())
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut *rng);
            scale * z
        })
        .collect();
    Point::new(data, set.shape().clone()).expect("shape of the set")
}

/// Worst violations of the oracle properties of one set.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OracleReport {
    /// `max (d^T lmo(d) - d^T u)` over sampled and enumerated `u`.
    pub lmo_optimality: f64,
    /// Largest infeasibility of an LMO or projection output.
    pub feasibility: f64,
    /// `max ||P(P(u)) - P(u)||`.
    pub idempotence: f64,
    /// `max (||P(u) - P(v)|| - ||u - v||)`.
    pub nonexpansive: f64,
    /// `max (u - P(u))^T (q - P(u))` over sampled feasible `q`.
    pub variational: f64,
    /// `max (||u - P(u)|| - ||u - q||)` over sampled feasible `q`.
    pub nearest: f64,
    pub trials: usize,
}

impl OracleReport {
    /// Checks the report against the suite tolerances.
    pub fn passes(&self) -> bool {
        self.lmo_optimality <= 1e-9
            && self.feasibility <= crate::set::MEMBERSHIP_TOL
            && self.idempotence <= 1e-12
            && self.nonexpansive <= 1e-12
            && self.variational <= 1e-9
            && self.nearest <= 1e-9
    }
}

/// Runs `trials` random directions and points through `set`'s LMO and
/// projection, comparing each against `comparisons` sampled feasible points
/// and, for polytopes, every vertex.
pub fn oracle_suite<R: Rng + ?Sized>(
    set: &FeasibleSet,
    trials: usize,
    comparisons: usize,
    rng: &mut R,
) -> Result<OracleReport> {
    let mut rep = OracleReport {
        lmo_optimality: f64::NEG_INFINITY,
        idempotence: 0.0,
        nonexpansive: f64::NEG_INFINITY,
        variational: f64::NEG_INFINITY,
        nearest: f64::NEG_INFINITY,
        trials,
        ..Default::default()
    };
    let vertices = set.vertices();
    let mut prev: Option<(Point, Point)> = None;
    for _ in 0..trials {
        let d = random_direction(set, rng);
        let v = set.lmo(&d)?;
        rep.feasibility = rep.feasibility.max(set.violation(&v)?);
        let dv = d.dot(&v);
        let scale = 1.0 + d.norm() * set.diameter();
        let mut cmp: Vec<Point> = (0..comparisons).map(|_| set.sample(rng)).collect();
        if let Some(vs) = &vertices {
            cmp.extend(vs.iter().cloned());
        }
        for u in &cmp {
            rep.lmo_optimality = rep.lmo_optimality.max((dv - d.dot(u)) / scale);
        }

        let u = random_direction(set, rng);
        let p = set.project(&u)?;
        rep.feasibility = rep.feasibility.max(set.violation(&p)?);
        rep.idempotence = rep.idempotence.max(set.project(&p)?.dist(&p));
        let r = u.sub(&p);
        let dist = r.norm();
        for q in cmp.iter().take(comparisons) {
            rep.variational = rep.variational.max(r.dot(&q.sub(&p)) / (1.0 + dist));
            rep.nearest = rep.nearest.max(dist - u.dist(q));
        }
        if let Some((u0, p0)) = &prev {
            rep.nonexpansive = rep.nonexpansive.max(p.dist(p0) - u.dist(u0));
        }
        prev = Some((u, p));
    }
    Ok(rep)
}

/// Largest `||fd - g|| / (||g|| + 1e-8)` over both partial gradients, with
/// central differences of step `h` along every coordinate.
pub fn fd_gradient_error(problem: &dyn PayoffProblem, x: &Point, y: &Point, h: f64) -> Result<f64> {
    let (gx, gy) = problem.grads(x, y)?;
    let fd = |p: &Point, f: &dyn Fn(&Point) -> Result<f64>| -> Result<Point> {
        let mut out = Vec::with_capacity(p.len());
        let mut buf = p.as_slice().to_vec();
        for i in 0..p.len() {
            let orig = buf[i];
            buf[i] = orig + h;
            let plus = f(&Point::new(buf.clone(), p.shape().clone())?)?;
            buf[i] = orig - h;
            let minus = f(&Point::new(buf.clone(), p.shape().clone())?)?;
            buf[i] = orig;
            out.push((plus - minus) / (2.0 * h));
        }
        Point::new(out, p.shape().clone())
    };
    let fx = fd(x, &|xp| problem.value(xp, y))?;
    let fy = fd(y, &|yp| problem.value(x, yp))?;
    let ex = fx.dist(&gx) / (gx.norm() + 1e-8);
    let ey = fy.dist(&gy) / (gy.norm() + 1e-8);
    Ok(ex.max(ey))
}

/// A random feasible pair, half of the time a small feasible perturbation
/// of a random point so that local moduli are probed too.
pub fn sample_pair<R: Rng + ?Sized>(
    problem: &dyn PayoffProblem,
    rng: &mut R,
) -> Result<((Point, Point), (Point, Point))> {
    let (xs, ys) = (problem.x_set(), problem.y_set());
    let (x, y) = (xs.sample(rng), ys.sample(rng));
    if rng.random_bool(0.5) {
        let eps = 10f64.powf(rng.random_range(-6.0..-1.0));
        let x2 = xs.project(&x.add(&gaussian_like(rng, &x, eps * xs.diameter())))?;
        let y2 = ys.project(&y.add(&gaussian_like(rng, &y, eps * ys.diameter())))?;
        Ok(((x, y), (x2, y2)))
    } else {
        Ok(((x, y), (xs.sample(rng), ys.sample(rng))))
    }
}

/// Largest excess of a gradient difference over the cross Lipschitz bound
/// `||grad_x L(z) - grad_x L(z')|| <= Lxx ||dx|| + Lyx ||dy||` (and the
/// symmetric bound for `grad_y`), over `pairs` sampled pairs.
pub fn lipschitz_violation<R: Rng + ?Sized>(
    problem: &dyn PayoffProblem,
    pairs: usize,
    rng: &mut R,
) -> Result<f64> {
    let s = problem.smoothness();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let ((x, y), (x2, y2)) = sample_pair(problem, rng)?;
        let (gx, gy) = problem.grads(&x, &y)?;
        let (gx2, gy2) = problem.grads(&x2, &y2)?;
        let (dx, dy) = (x.dist(&x2), y.dist(&y2));
        worst = worst
            .max(gx.dist(&gx2) - (s.lxx * dx + s.lyx * dy))
            .max(gy.dist(&gy2) - (s.lyx * dx + s.lyy * dy));
    }
    Ok(worst)
}

/// Largest excess in the strong-concavity inequality
/// `L(x,y) - L(x,y') - grad_y L(x,y')^T (y - y') <= -(mu/2) ||y - y'||^2`.
pub fn concavity_violation<R: Rng + ?Sized>(
    problem: &dyn PayoffProblem,
    pairs: usize,
    rng: &mut R,
) -> Result<f64> {
    let mu = problem.smoothness().mu;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let x = problem.x_set().sample(rng);
        let (y, y2) = (problem.y_set().sample(rng), problem.y_set().sample(rng));
        let g = problem.grad_y(&x, &y2)?;
        let lhs = problem.value(&x, &y)? - problem.value(&x, &y2)? - g.dot(&y.sub(&y2));
        worst = worst.max(lhs + 0.5 * mu * y.dist(&y2).powi(2));
    }
    Ok(worst)
}

/// Worst violations of the two-sided relation between the Frank-Wolfe and
/// projected-gradient gaps, `G_lmo <= (sigma ||g|| + D) G_po` and
/// `G_po <= sqrt(G_lmo / sigma)`, as absolute excesses over the right-hand sides.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapRelation {
    pub upper: f64,
    pub lower: f64,
}

pub fn gap_relation_violation<R: Rng + ?Sized>(
    problem: &dyn PayoffProblem,
    samples: usize,
    rng: &mut R,
) -> Result<GapRelation> {
    let xs = problem.x_set();
    let mut rel = GapRelation {
        upper: f64::NEG_INFINITY,
        lower: f64::NEG_INFINITY,
    };
    for _ in 0..samples {
        let x = xs.sample(rng);
        let y = problem.y_set().sample(rng);
        let sigma = 10f64.powf(rng.random_range(-3.0..3.0));
        let g = problem.grad_x(&x, &y)?;
        let lmo = metrics::fw_gap(xs, &x, &g)?;
        let po = metrics::projected_gradient_gap(xs, &x, &g, sigma)?;
        let rhs_up = (sigma * g.norm() + xs.diameter()) * po;
        let rhs_low = (lmo.max(0.0) / sigma).sqrt();
        rel.upper = rel.upper.max(lmo - rhs_up);
        rel.lower = rel.lower.max(po - rhs_low);
    }
    Ok(rel)
}

/// `f_beta(x) = max_Y L_beta(x, .)` through the exact smoothed best response.
pub fn smoothed_primal(
    problem: &dyn PayoffProblem,
    x: &Point,
    beta: f64,
    y0: &Point,
) -> Result<f64> {
    let y = problem
        .best_response_y_smoothed(x, beta, y0)?
        .ok_or_else(|| {
            Error::Capability(format!("{} has no smoothed best response", problem.name()))
        })?;
    Ok(regularize_value(problem.value(x, &y)?, beta, &y, y0))
}

/// Worst violations of `0 <= f_{b'}(x) - f_b(x) <= D_Y^2 (b - b') / 2`
/// for random `x` and `b >= b' >= 0`: `(lower, upper)`.
pub fn smoothing_sandwich_violation<R: Rng + ?Sized>(
    problem: &dyn PayoffProblem,
    y0: &Point,
    samples: usize,
    max_beta: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let dy = problem.y_set().diameter();
    let (mut lower, mut upper) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..samples {
        let x = problem.x_set().sample(rng);
        let mut b1 = max_beta * rng.random::<f64>();
        let mut b2 = if rng.random_bool(0.1) {
            0.0
        } else {
            max_beta * rng.random::<f64>()
        };
        if b1 < b2 {
            std::mem::swap(&mut b1, &mut b2);
        }
        let diff = smoothed_primal(problem, &x, b2, y0)? - smoothed_primal(problem, &x, b1, y0)?;
        lower = lower.max(-diff);
        upper = upper.max(diff - dy * dy * (b1 - b2) / 2.0);
    }
    Ok((lower, upper))
}

/// Worst excess in `((b + mu)/2) ||y*_b(x) - y||^2 <= L_b(x, y*_b) - L_b(x, y)`.
pub fn smoothed_distance_violation<R: Rng + ?Sized>(
    problem: &dyn PayoffProblem,
    y0: &Point,
    samples: usize,
    max_beta: f64,
    rng: &mut R,
) -> Result<f64> {
    let mu = problem.smoothness().mu;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let x = problem.x_set().sample(rng);
        let y = problem.y_set().sample(rng);
        let beta = max_beta * rng.random::<f64>();
        let ys = problem
            .best_response_y_smoothed(&x, beta, y0)?
            .ok_or_else(|| {
                Error::Capability(format!("{} has no smoothed best response", problem.name()))
            })?;
        let gain = regularize_value(problem.value(&x, &ys)?, beta, &ys, y0)
            - regularize_value(problem.value(&x, &y)?, beta, &y, y0);
        worst = worst.max(0.5 * (beta + mu) * ys.dist(&y).powi(2) - gain);
    }
    Ok(worst)
}
