use ndarray::Array2;
use rand::Rng;
use unfold_ipm::imaging::{ssim, MetricOptions};
use unfold_ipm::linops::{CirculantOperator, GradientOperators, Kernel};
use unfold_ipm::prox::BoxBounds;
use unfold_ipm::seeding::stream;
use unfold_ipm::solver::{run_fb_ipm, var_grid_search, IpmSchedule};
use unfold_ipm::{Error, Image, Problem};

fn schedule(gamma0: f64, mu_decay: f64, iterations: usize) -> IpmSchedule<f64> {
    IpmSchedule {
        gamma0,
        mu0: 1e-2,
        mu_decay,
        iterations,
        x0_margin: 0.01,
    }
}

fn barrier(x: &Image, b: &BoxBounds<f64>) -> f64 {
    x.as_slice().iter().map(|&v| -(v - b.x_min).ln() - (b.x_max - v).ln()).sum()
}

#[test]
fn scalar_problem_reaches_observation() {
    let p = Problem::new(CirculantOperator::identity((1, 1)).unwrap(), Image::filled(1, 1, 1, 0.5), BoxBounds::unit()).unwrap();
    let out = run_fb_ipm(&p, 0.0, &schedule(0.9, 0.98, 500)).unwrap();
    assert!((out.image.as_slice()[0] - 0.5).abs() <= 1e-4);
}

#[test]
fn identity_quadratic_reaches_half_observation() {
    for i in 0..5 {
        let mut rng = stream(1, i);
        let y = Image::from_fn(1, 6, 7, |_| rng.random_range(0.1..0.9));
        let id = CirculantOperator::identity((6, 7)).unwrap();
        let p = Problem::new(id.clone(), y.clone(), BoxBounds::unit())
            .unwrap()
            .with_quadratic(vec![id])
            .unwrap();
        let out = run_fb_ipm(&p, 1.0, &schedule(0.4, 0.98, 500)).unwrap();
        let err = out
            .image
            .as_slice()
            .iter()
            .zip(y.as_slice())
            .map(|(x, y)| (x - 0.5 * y).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-4, "#{i}: {err}");
        assert!(out.trace.iter().all(|r| r.min_margin > 0.0));
    }
}

#[test]
fn zero_step_is_rejected() {
    let p = Problem::new(CirculantOperator::identity((2, 2)).unwrap(), Image::filled(1, 2, 2, 0.5), BoxBounds::unit()).unwrap();
    assert!(matches!(run_fb_ipm(&p, 0.0, &schedule(0.0, 0.98, 10)), Err(Error::InvalidParameter(_))));
    assert!(run_fb_ipm(&p, -1.0, &schedule(0.5, 0.98, 10)).is_err());
}

#[test]
fn every_iterate_is_strictly_feasible() {
    for i in 0..10 {
        let mut rng = stream(2, i);
        let k = Kernel::<f64>::gaussian(1.6, 9).unwrap();
        let y = Image::from_fn(1, 16, 16, |_| rng.random_range(-0.3..1.3));
        let p = Problem::new(CirculantOperator::new(k, (16, 16)).unwrap(), y, BoxBounds::unit()).unwrap();
        let lambda = rng.random_range(1e-4..1e-1);
        let out = run_fb_ipm(&p, lambda, &IpmSchedule::heuristic(&p, lambda)).unwrap();
        assert_eq!(out.trace.len(), 501);
        assert!(out.trace.iter().all(|r| r.min_margin > 0.0 && r.objective.is_finite()));
        assert!(out.image.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
    }
}

#[test]
fn fixed_barrier_weight_objective_does_not_increase() {
    for i in 0..10 {
        let mut rng = stream(3, i);
        let k = Kernel::new(Array2::from_shape_fn((3, 3), |_| rng.random_range(0.0..1.0))).unwrap();
        let blur = CirculantOperator::new(k, (8, 8)).unwrap();
        let y = Image::from_fn(1, 8, 8, |_| rng.random_range(0.0..1.0));
        let g = GradientOperators::new((8, 8)).unwrap();
        let p = Problem::new(blur, y, BoxBounds::unit())
            .unwrap()
            .with_quadratic(vec![g.vertical, g.horizontal])
            .unwrap();
        let lambda = rng.random_range(0.0..1.0);
        let mu = 1e-2;
        let x0_margin: f64 = 0.01;
        // Smooth part plus the barrier curvature at the starting point.
        let lip = p.lipschitz(lambda) + mu * 2.0 / (x0_margin * x0_margin);
        let sched = IpmSchedule {
            gamma0: 0.99 / lip,
            mu0: mu,
            mu_decay: 1.0,
            iterations: 0,
            x0_margin,
        };
        let mut prev = f64::INFINITY;
        for k in 0..=50 {
            let x = run_fb_ipm(&p, lambda, &IpmSchedule { iterations: k, ..sched }).unwrap().image;
            let v = p.value(&x, lambda).unwrap() + mu * barrier(&x, &p.bounds);
            assert!(v <= prev + 1e-12 * prev.abs().max(1.0), "#{i} iterate {k}: {v} > {prev}");
            prev = v;
        }
    }
}

#[test]
fn trace_matches_objective_of_returned_image() {
    let mut rng = stream(4, 0);
    let y = Image::from_fn(1, 8, 8, |_| rng.random_range(0.0..1.0));
    let p = Problem::new(CirculantOperator::new(Kernel::gaussian(1.0, 5).unwrap(), (8, 8)).unwrap(), y, BoxBounds::unit()).unwrap();
    let out = run_fb_ipm(&p, 1e-3, &IpmSchedule::heuristic(&p, 1e-3)).unwrap();
    let last = out.trace.last().unwrap();
    assert_eq!(last.iteration, 500);
    assert_eq!(last.objective, p.value(&out.image, 1e-3).unwrap());
}

#[test]
fn single_point_grid_returns_that_point() {
    let mut rng = stream(5, 0);
    let truth = Image::from_fn(1, 16, 16, |_| rng.random_range(0.2..0.8));
    let blur = CirculantOperator::new(Kernel::gaussian(1.0, 5).unwrap(), (16, 16)).unwrap();
    let p = Problem::new(blur.clone(), blur.apply(&truth).unwrap(), BoxBounds::unit()).unwrap();
    let r = var_grid_search(&p, &truth, &[3e-3], |l| IpmSchedule::heuristic(&p, l), MetricOptions::FULL).unwrap();
    assert_eq!(r.best_lambda, 3e-3);
    assert_eq!(r.points.len(), 1);
    assert!(var_grid_search(&p, &truth, &[], |l| IpmSchedule::heuristic(&p, l), MetricOptions::FULL).is_err());
}

#[test]
fn constant_clean_input_is_not_degraded() {
    for c in [0.5, 0.3] {
        let truth = Image::filled(1, 16, 16, c);
        let p = Problem::new(CirculantOperator::identity((16, 16)).unwrap(), truth.clone(), BoxBounds::unit()).unwrap();
        let grid = [1e-4, 1e-2];
        let r = var_grid_search(&p, &truth, &grid, |l| IpmSchedule::heuristic(&p, l), MetricOptions::default()).unwrap();
        let baseline = ssim(&truth, &truth, MetricOptions::default()).unwrap();
        if c == 0.5 {
            // The barrier is symmetric about the center, so nothing moves.
            assert!(r.best_ssim >= baseline);
        } else {
            // The barrier bias decays with mu; only rounding-level loss remains.
            assert!(r.best_ssim >= baseline - 1e-9, "{}", r.best_ssim);
        }
    }
}

#[test]
fn ties_go_to_the_smaller_weight() {
    let truth = Image::filled(1, 16, 16, 0.5);
    let p = Problem::new(CirculantOperator::identity((16, 16)).unwrap(), truth.clone(), BoxBounds::unit()).unwrap();
    let r = var_grid_search(&p, &truth, &[1e-2, 1e-3, 1e-1], |l| IpmSchedule::heuristic(&p, l), MetricOptions::default()).unwrap();
    assert_eq!(r.best_lambda, 1e-3);
}
