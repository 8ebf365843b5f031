//! Forward-backward proximal interior-point solver and the oracle
//! regularization-weight search built on it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{ssim, ImageTensor, MetricOptions};
use crate::objective::{check_lambda, DeblurProblem};
use crate::prox::{prox_box_scalar, BoxBounds};
use crate::scalar::Real;

/// `gamma_k = gamma0`, `mu_k = mu0 * mu_decay^k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IpmSchedule<T> {
    pub gamma0: T,
    pub mu0: T,
    pub mu_decay: T,
    pub iterations: usize,
    pub x0_margin: T,
}

pub const DEFAULT_MU0: f64 = 1e-2;
pub const DEFAULT_MU_DECAY: f64 = 0.98;
pub const DEFAULT_ITERATIONS: usize = 500;
pub const DEFAULT_X0_MARGIN: f64 = 0.01;
pub const DEFAULT_STEP_FRACTION: f64 = 0.9;

impl<T: Real> IpmSchedule<T> {
    /// Default schedule with `gamma0 = 0.9 / L`, `L` the Lipschitz constant
    /// of the smooth part at this `lambda`.
    pub fn heuristic(problem: &DeblurProblem<T>, lambda: T) -> Self {
        Self {
            gamma0: T::lit(DEFAULT_STEP_FRACTION) / problem.lipschitz(lambda),
            mu0: T::lit(DEFAULT_MU0),
            mu_decay: T::lit(DEFAULT_MU_DECAY),
            iterations: DEFAULT_ITERATIONS,
            x0_margin: T::lit(DEFAULT_X0_MARGIN),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: T| Err(Error::InvalidParameter(format!("{what} out of range: {v}")));
        if !(self.gamma0 > T::zero()) || !self.gamma0.is_finite() {
            return bad("gamma0", self.gamma0);
        }
        if !(self.mu0 > T::zero()) || !self.mu0.is_finite() {
            return bad("mu0", self.mu0);
        }
        // A decay of exactly 1 keeps the barrier weight fixed.
        if !(self.mu_decay > T::zero() && self.mu_decay <= T::one()) {
            return bad("mu_decay", self.mu_decay);
        }
        if !(self.x0_margin > T::zero() && self.x0_margin < T::lit(0.5)) {
            return bad("x0_margin", self.x0_margin);
        }
        Ok(())
    }

    pub fn mu(&self, k: usize) -> T {
        self.mu0 * self.mu_decay.powi(k as i32)
    }
}

/// `clamp(y, x_min + m, x_max - m)` with `m = margin * (x_max - x_min)`.
pub fn initial_point<T: Real>(y: &ImageTensor<T>, bounds: &BoxBounds<T>, margin: T) -> ImageTensor<T> {
    let m = margin * bounds.width();
    y.clamp(bounds.x_min + m, bounds.x_max - m)
}

/// Smallest distance of any pixel to the box boundary.
pub fn min_margin<T: Real>(x: &ImageTensor<T>, bounds: &BoxBounds<T>) -> T {
    x.as_slice()
        .iter()
        .fold(T::infinity(), |m, &v| m.min(v - bounds.x_min).min(bounds.x_max - v))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub min_margin: f64,
}

#[derive(Clone, Debug)]
pub struct SolveOutput<T> {
    pub image: ImageTensor<T>,
    /// One row per iterate `x_0 .. x_K`.
    pub trace: Vec<TraceRow>,
}

/// Box barrier prox applied pixelwise.
pub(crate) fn prox_image<T: Real>(u: &ImageTensor<T>, bounds: &BoxBounds<T>, mu: T, gamma: T) -> Result<ImageTensor<T>> {
    let mut out = u.clone();
    for v in out.as_slice_mut() {
        *v = prox_box_scalar(*v, bounds, mu, gamma, false)?.value;
    }
    Ok(out)
}

/// `x_{k+1} = prox_{gamma mu_k B}(x_k - gamma grad h(x_k))`.
pub fn run_fb_ipm<T: Real>(problem: &DeblurProblem<T>, lambda: T, sched: &IpmSchedule<T>) -> Result<SolveOutput<T>> {
    check_lambda(lambda)?;
    sched.validate()?;
    let bounds = &problem.bounds;
    let mut x = initial_point(&problem.y, bounds, sched.x0_margin);
    let mut trace = Vec::with_capacity(sched.iterations + 1);
    for k in 0..=sched.iterations {
        let (value, grad) = problem.value_grad(&x, lambda)?;
        if !value.is_finite() || !grad.is_finite() {
            return Err(Error::Divergence { iteration: k });
        }
        trace.push(TraceRow {
            iteration: k,
            objective: value.to_f64_lossy(),
            min_margin: min_margin(&x, bounds).to_f64_lossy(),
        });
        if k == sched.iterations {
            break;
        }
        let mut u = x.clone();
        u.axpy(-sched.gamma0, &grad);
        x = prox_image(&u, bounds, sched.mu(k), sched.gamma0).map_err(|e| match e {
            Error::IllPosedCubic(_) | Error::NonFinite(_) => Error::Divergence { iteration: k + 1 },
            other => other,
        })?;
        if !x.is_finite() {
            return Err(Error::Divergence { iteration: k + 1 });
        }
    }
    Ok(SolveOutput { image: x, trace })
}

#[derive(Clone, Debug)]
pub struct GridPoint<T> {
    pub lambda: T,
    /// `None` when the solve failed.
    pub ssim: Option<T>,
}

#[derive(Clone, Debug)]
pub struct VarResult<T> {
    pub best_lambda: T,
    pub best_image: ImageTensor<T>,
    pub best_ssim: T,
    pub points: Vec<GridPoint<T>>,
}

/// Solves for every `lambda` in the grid and keeps the restoration with the
/// highest SSIM against `truth`; ties go to the smaller `lambda`. Failed
/// grid points are skipped.
pub fn var_grid_search<T: Real>(
    problem: &DeblurProblem<T>,
    truth: &ImageTensor<T>,
    lambda_grid: &[T],
    schedule_for: impl Fn(T) -> IpmSchedule<T> + Sync,
    metric: MetricOptions,
) -> Result<VarResult<T>> {
    if lambda_grid.is_empty() {
        return Err(Error::EmptyInput("lambda grid".into()));
    }
    truth.ensure_same_shape(&problem.y)?;
    let runs: Vec<Result<(T, ImageTensor<T>)>> = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let out = run_fb_ipm(problem, lambda, &schedule_for(lambda))?;
            Ok((ssim(&out.image, truth, metric)?, out.image))
        })
        .collect();

    let mut order: Vec<usize> = (0..lambda_grid.len()).collect();
    order.sort_by(|&a, &b| lambda_grid[a].partial_cmp(&lambda_grid[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut best: Option<(usize, T)> = None;
    let mut failed = 0;
    for &i in &order {
        match &runs[i] {
            Ok((s, _)) => {
                if best.is_none_or(|(_, b)| *s > b) {
                    best = Some((i, *s));
                }
            }
            Err(e) => {
                failed += 1;
                log::warn!("lambda {} failed: {e}", lambda_grid[i]);
            }
        }
    }
    let points = lambda_grid
        .iter()
        .zip(&runs)
        .map(|(&lambda, r)| GridPoint {
            lambda,
            ssim: r.as_ref().ok().map(|(s, _)| *s),
        })
        .collect();
    let (i, s) = best.ok_or(Error::AllGridPointsFailed(failed))?;
    let image = match runs.into_iter().nth(i) {
        Some(Ok((_, img))) => img,
        _ => unreachable!("best index refers to a successful run"),
    };
    Ok(VarResult {
        best_lambda: lambda_grid[i],
        best_image: image,
        best_ssim: s,
        points,
    })
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}
