use dsmooth::metrics::*;
use dsmooth::problems::*;
use dsmooth::rng::seeded;
use dsmooth::solvers::ErgodicSummary;
use dsmooth::{Error, FeasibleSet, PayoffProblem, Point, SmoothingState};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn v(xs: &[f64]) -> Point {
    Point::vector(xs.to_vec())
}

#[test]
fn frank_wolfe_gap_examples() {
    let game = MatrixGame::new(DMatrix::identity(2, 2)).unwrap();
    assert_eq!(
        gap_lmo_x(&game, &v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(),
        0.0
    );
    assert_eq!(
        gap_lmo_x(&game, &v(&[0.0, 1.0]), &v(&[0.0, 1.0])).unwrap(),
        1.0
    );
    let set = FeasibleSet::simplex(3).unwrap();
    assert_eq!(
        fw_gap(&set, &v(&[0.2, 0.3, 0.5]), &v(&[0.0; 3])).unwrap(),
        0.0
    );
}

#[test]
fn projected_gradient_gap_examples() {
    let set = FeasibleSet::interval(0.0, 1.0).unwrap();
    let pg = |x: f64, g: f64, s: f64| {
        projected_gradient_gap(&set, &Point::scalar(x), &Point::scalar(g), s).unwrap()
    };
    assert_eq!(pg(0.3, 0.0, 1.0), 0.0);
    assert_eq!(pg(0.0, 1.0, 1.0), 0.0);
    assert!((pg(0.5, 0.2, 1.0) - 0.2).abs() < 1e-15);
    // clipped at the boundary: |0 - 0.5| / 2
    assert!((pg(0.5, 1.0, 2.0) - 0.25).abs() < 1e-15);
}

#[test]
fn dual_gap_examples() {
    let game = MatrixGame::new(DMatrix::identity(2, 2)).unwrap();
    assert_eq!(
        gap_dual_y(&game, &v(&[0.5, 0.5]), &v(&[1.0, 0.0])).unwrap(),
        0.0
    );
    assert!((gap_dual_y(&game, &v(&[0.8, 0.2]), &v(&[0.0, 1.0])).unwrap() - 0.6).abs() < 1e-15);

    // L is linear in the scalar dual, so the gap is B * max(g, 0) at y = 0
    let data = dl_generate(DlSizes::DESK, 3).unwrap();
    let bound = 2.5;
    let dl = DictionaryLearning::from_data(&data, 1e-4, 5.0, bound).unwrap();
    let x = dl.x_set().sample(&mut seeded(1));
    let g = dl.grad_y(&x, &Point::scalar(0.0)).unwrap().as_slice()[0];
    let gap = gap_dual_y(&dl, &x, &Point::scalar(0.0)).unwrap();
    assert!((gap - bound * g.max(0.0)).abs() <= 1e-12 * (1.0 + gap));
}

struct NoOracle(MatrixGame);

impl PayoffProblem for NoOracle {
    fn name(&self) -> &str {
        "no-oracle"
    }
    fn x_set(&self) -> &FeasibleSet {
        self.0.x_set()
    }
    fn y_set(&self) -> &FeasibleSet {
        self.0.y_set()
    }
    fn value(&self, x: &Point, y: &Point) -> dsmooth::Result<f64> {
        self.0.value(x, y)
    }
    fn grad_x(&self, x: &Point, y: &Point) -> dsmooth::Result<Point> {
        self.0.grad_x(x, y)
    }
    fn grad_y(&self, x: &Point, y: &Point) -> dsmooth::Result<Point> {
        self.0.grad_y(x, y)
    }
    fn smoothness(&self) -> dsmooth::Smoothness {
        self.0.smoothness()
    }
    fn is_convex_in_x(&self) -> bool {
        true
    }
    fn initial_point(&self) -> (Point, Point) {
        self.0.initial_point()
    }
}

#[test]
fn missing_oracles_are_capability_errors() {
    let p = NoOracle(MatrixGame::new(DMatrix::identity(3, 3)).unwrap());
    let (x, y) = p.initial_point();
    assert!(matches!(gap_dual_y(&p, &x, &y), Err(Error::Capability(_))));
    assert_eq!(duality_gap(&p, &x, &y).unwrap(), None);
    let s = SmoothingState::new(y.clone(), 1.0, 0.2, 0.0).unwrap();
    assert!(matches!(
        discrepancy_h(&p, &s, &x, &y, 0),
        Err(Error::Capability(_))
    ));
}

#[test]
fn approximate_dual_gap_brackets_the_exact_one() {
    // linear in y over a simplex: exact after one vertex step
    let game = MatrixGame::new(random_payoff(4, 5, PayoffEntries::Gaussian, 2).unwrap()).unwrap();
    let mut rng = seeded(6);
    let (x, y) = (game.x_set().sample(&mut rng), game.y_set().sample(&mut rng));
    let exact = gap_dual_y(&game, &x, &y).unwrap();
    let est = gap_dual_y_approx(&game, &x, &y, 1).unwrap();
    assert!((est.estimate - exact).abs() < 1e-12 && est.certificate < 1e-12);
    let ys = game.best_response_y(&x).unwrap().unwrap();
    let at_opt = gap_dual_y_approx(&game, &x, &ys, 1).unwrap();
    assert_eq!((at_opt.estimate, at_opt.certificate), (0.0, 0.0));

    // strongly concave over a simplex, closed-form chi-square best response
    let rc = RobustClassification::new(rc_synthetic(30, 6, 3, 1.0, 4).unwrap(), 10.0, 2.0).unwrap();
    for _ in 0..5 {
        let (x, y) = (rc.x_set().sample(&mut rng), rc.y_set().sample(&mut rng));
        let exact = gap_dual_y(&rc, &x, &y).unwrap();
        let est = gap_dual_y_approx(&rc, &x, &y, 1000).unwrap();
        assert!(est.estimate <= exact + 1e-12, "{est:?} vs {exact}");
        assert!(
            exact <= est.estimate + est.certificate + 1e-12,
            "{est:?} vs {exact}"
        );
    }
}

#[test]
fn discrepancy_on_a_scalar_dual() {
    let data = dl_generate(DlSizes::DESK, 5).unwrap();
    let dl = DictionaryLearning::from_data(&data, 1e-4, 5.0, 1.0).unwrap();
    let x = dl.x_set().sample(&mut seeded(2));
    let y0 = 0.4;
    let s = SmoothingState::new(Point::scalar(y0), 0.5, 0.0, 0.0).unwrap();
    let beta = s.beta_at(0);
    let g = dl.grad_y(&x, &Point::scalar(0.0)).unwrap().as_slice()[0];
    let ys = (y0 + g / beta).clamp(0.0, 1.0);
    let lb = |y: f64| g * y - 0.5 * beta * (y - y0).powi(2);
    for y in [0.0, 0.3, 1.0] {
        let h = discrepancy_h(&dl, &s, &x, &Point::scalar(y), 0).unwrap();
        assert!((h - (lb(ys) - lb(y))).abs() < 1e-12, "y = {y}: {h}");
    }
    assert!(
        discrepancy_h(&dl, &s, &x, &Point::scalar(ys), 0)
            .unwrap()
            .abs()
            < 1e-14
    );
}

#[test]
fn ergodic_duality_gap_examples() {
    let game = MatrixGame::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
    let half = v(&[0.5, 0.5]);
    assert!(duality_gap(&game, &half, &half).unwrap().unwrap().abs() < 1e-15);
    let summary = ErgodicSummary {
        t: 1,
        x_avg: half.clone(),
        y_avg: half.clone(),
        mean_gap_lmo_x: Some(0.0),
        mean_gap_y: Some(0.0),
    };
    assert!(duality_gap_ergodic(&game, &summary).unwrap().abs() < 1e-15);

    // claimed averages too small for the gap at the averages
    let summary = ErgodicSummary {
        x_avg: v(&[1.0, 0.0]),
        ..summary
    };
    assert!(matches!(
        duality_gap_ergodic(&game, &summary),
        Err(Error::Numerical { .. })
    ));
}

#[test]
fn gap_report_at_a_known_saddle() {
    let q = random_quadratic_saddle(4, 1.0, 1.0, 0.3, 3.0, 9).unwrap();
    let (xs, ys) = q.saddle();
    let s = SmoothingState::new(ys.clone(), 0.0, 0.0, 1.0).unwrap();
    let r = gap_report(&q, xs, ys, 0.5, Some((&s, 0))).unwrap();
    assert!(r.gap_x_lmo <= 1e-8 && r.gap_x_po <= 1e-8);
    assert!(r.gap_y.unwrap() <= 1e-8 && r.duality_gap.unwrap() <= 1e-8);
    assert!(r.h_t.unwrap() <= 1e-8);
    assert!(r.primal_opt_gap.unwrap_or(0.0) <= 1e-8);
}

#[test]
fn rate_fit_fixtures() {
    let ts: Vec<f64> = (1..=200).map(|t| (t * 50) as f64).collect();
    let exact: Vec<f64> = ts.iter().map(|t| t.powf(-0.5)).collect();
    assert!((estimate_rate(&ts, &exact).unwrap().slope + 0.5).abs() < 1e-6);
    let flat = vec![0.3; ts.len()];
    assert!(estimate_rate(&ts, &flat).unwrap().slope.abs() < 1e-12);
    let wiggle: Vec<f64> = ts
        .iter()
        .map(|t| t.powf(-1.0 / 3.0) * (1.0 + 0.1 * t.sin()))
        .collect();
    assert!((estimate_rate(&ts, &wiggle).unwrap().slope + 1.0 / 3.0).abs() < 0.05);
    let mut bad = exact.clone();
    bad[4] = 0.0;
    assert!(matches!(estimate_rate(&ts, &bad), Err(Error::Domain(_))));
    assert!(estimate_rate(&ts[..5], &exact[..5]).is_err());
}

#[test]
fn trailing_decade_ignores_the_transient() {
    let ts: Vec<f64> = (0..=40)
        .map(|k| 10f64.powf(1.0 + k as f64 / 10.0))
        .collect();
    let gaps: Vec<f64> = ts
        .iter()
        .map(|&t| if t < 1e4 { 1.0 } else { 1e4 / t })
        .collect();
    let fit = estimate_rate_trailing_decade(&ts, &gaps).unwrap();
    assert!((fit.slope + 1.0).abs() < 1e-9, "{fit:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gaps_are_nonnegative_and_ordered(seed in 0u64..10_000, sigma in prop::sample::select(vec![0.1, 1.0, 10.0])) {
        let game = MatrixGame::new(random_payoff(3, 4, PayoffEntries::Gaussian, seed).unwrap()).unwrap();
        let mut rng = seeded(seed);
        let (x, y) = (game.x_set().sample(&mut rng), game.y_set().sample(&mut rng));
        let g = game.grad_x(&x, &y).unwrap();
        let lmo = fw_gap(game.x_set(), &x, &g).unwrap();
        let po = projected_gradient_gap(game.x_set(), &x, &g, sigma).unwrap();
        prop_assert!(lmo >= -1e-10 && po >= -1e-10);
        prop_assert!(lmo <= (sigma * g.norm() + game.x_set().diameter()) * po + 1e-8);
        prop_assert!(po <= (lmo.max(0.0) / sigma).sqrt() + 1e-8);
        prop_assert!(gap_dual_y(&game, &x, &y).unwrap() >= 0.0);
        prop_assert!(duality_gap(&game, &x, &y).unwrap().unwrap() >= -1e-10);
    }
}
