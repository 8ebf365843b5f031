//! Averagedness certificates for the unfolded network on quadratic
//! problems whose operators are all circulant (hence share the Fourier
//! basis).

use rayon::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{estimate_noise_std, ImageTensor};
use crate::objective::{DeblurProblem, Regularizer};
use crate::scalar::Real;
use crate::seeding;
use crate::solver::prox_image;
use crate::unfolded::{lambda_struct, layer_forward, UnfoldedNetwork};

/// Layer `k` with its data-dependent quantities fixed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrozenLayer<T> {
    pub gamma: T,
    pub mu: T,
    pub lambda: T,
}

/// Eigenvalues `1 - gamma (eig_h + lambda eig_d)` of the layer weight
/// `I - gamma (H^T H + lambda D^T D)`.
pub fn layer_weight_spectrum<T: Real>(gamma: T, lambda: T, eig_h: &[T], eig_d: &[T]) -> Result<Vec<T>> {
    if eig_h.len() != eig_d.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![eig_h.len()],
            actual: vec![eig_d.len()],
        });
    }
    Ok(eig_h
        .iter()
        .zip(eig_d)
        .map(|(&h, &d)| T::one() - gamma * (h + lambda * d))
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThetaSequence<T> {
    /// `theta_0 .. theta_{K-1}`.
    pub theta: Vec<T>,
    /// Extreme eigenvalues of the full product `W_{K-1} ... W_0`.
    pub beta_minus: T,
    pub beta_plus: T,
}

/// `theta_k = sum_{l <= k} theta_{l-1} |W_k ... W_l|` with `theta_{-1} = 1`,
/// where the norm of a product of simultaneously diagonal weights is the
/// largest modulus of the product of their eigenvalues.
pub fn theta_sequence<T: Real>(spectra: &[Vec<T>]) -> Result<ThetaSequence<T>> {
    let n = spectra.first().ok_or_else(|| Error::EmptyInput("layer spectra".into()))?.len();
    if n == 0 {
        return Err(Error::EmptyInput("layer spectrum".into()));
    }
    if let Some(s) = spectra.iter().find(|s| s.len() != n) {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            actual: vec![s.len()],
        });
    }
    let k_total = spectra.len();
    // theta_ext[l + 1] = theta_l, theta_ext[0] = theta_{-1}
    let mut theta_ext = vec![T::one()];
    let mut running = vec![T::one(); n];
    for k in 0..k_total {
        running.iter_mut().for_each(|r| *r = T::one());
        let mut acc = T::zero();
        for l in (0..=k).rev() {
            let mut norm = T::zero();
            for (r, &b) in running.iter_mut().zip(&spectra[l]) {
                *r = *r * b;
                norm = norm.max(r.abs());
            }
            acc = acc + theta_ext[l] * norm;
        }
        theta_ext.push(acc);
    }
    let mut full = vec![T::one(); n];
    for s in spectra {
        for (f, &b) in full.iter_mut().zip(s) {
            *f = *f * b;
        }
    }
    let beta_minus = full.iter().copied().fold(T::infinity(), T::min);
    let beta_plus = full.iter().copied().fold(T::neg_infinity(), T::max);
    Ok(ThetaSequence {
        theta: theta_ext[1..].to_vec(),
        beta_minus,
        beta_plus,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    I,
    Ii,
    Iii,
    None,
}

impl Condition {
    pub fn label(&self) -> &'static str {
        match self {
            Condition::I => "i",
            Condition::Ii => "ii",
            Condition::Iii => "iii",
            Condition::None => "none",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate<T> {
    /// Smallest certified averagedness constant, when any condition holds.
    pub alpha: Option<T>,
    pub condition: Condition,
    pub beta_minus: T,
    pub beta_plus: T,
    pub theta_last: T,
    #[serde(rename = "K")]
    pub k: usize,
    /// Smallest `alpha` in `[1/2, 1]` satisfying each condition separately.
    pub alpha_by_condition: [Option<T>; 3],
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kernel_hash: Option<String>,
}

/// Whether condition `c` holds at `alpha`, evaluated literally.
pub fn condition_holds<T: Real>(c: Condition, alpha: T, beta_sum: T, theta: T, k: usize) -> bool {
    let two = T::lit(2.0);
    let pk = two.powi(k as i32);
    let half_pk = pk / two;
    let one = T::one();
    if !(alpha >= T::lit(0.5) && alpha <= one) {
        return false;
    }
    match c {
        Condition::I => beta_sum <= T::zero() && theta <= half_pk * (two * alpha - one),
        Condition::Ii => {
            T::zero() <= beta_sum
                && beta_sum <= two * pk * (one - alpha)
                && two * theta <= beta_sum + pk * (two * alpha - one)
        }
        Condition::Iii => two * pk * (one - alpha) <= beta_sum && theta <= half_pk,
        Condition::None => false,
    }
}

fn solve_condition<T: Real>(c: Condition, beta_sum: T, theta: T, k: usize) -> Option<T> {
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let pk = two.powi(k as i32);
    let one = T::one();
    let (lower, upper) = match c {
        Condition::I => {
            if beta_sum > T::zero() {
                return None;
            }
            ((theta / (pk / two) + one) / two, one)
        }
        Condition::Ii => {
            if beta_sum < T::zero() {
                return None;
            }
            (((two * theta - beta_sum) / pk + one) / two, one - beta_sum / (two * pk))
        }
        Condition::Iii => {
            if theta > pk / two {
                return None;
            }
            (one - beta_sum / (two * pk), one)
        }
        Condition::None => return None,
    };
    let mut alpha = lower.max(half);
    if !(alpha <= upper.min(one)) {
        return None;
    }
    // Absorb rounding in the closed form so the stated inequality holds.
    for _ in 0..16 {
        if condition_holds(c, alpha, beta_sum, theta, k) {
            return Some(alpha);
        }
        alpha = (alpha + alpha * T::epsilon()).min(one);
    }
    None
}

/// Smallest `alpha` in `[1/2, 1]` for which one of the three sufficient
/// conditions holds; ties go to the earlier condition.
pub fn certify<T: Real>(layers: &[FrozenLayer<T>], eig_h: &[T], eig_d: &[T]) -> Result<StabilityCertificate<T>> {
    if layers.is_empty() {
        return Err(Error::EmptyInput("network has no layers".into()));
    }
    let spectra: Vec<Vec<T>> = layers
        .iter()
        .map(|l| layer_weight_spectrum(l.gamma, l.lambda, eig_h, eig_d))
        .collect::<Result<_>>()?;
    let seq = theta_sequence(&spectra)?;
    let k = layers.len();
    let theta = *seq.theta.last().expect("non-empty");
    let beta_sum = seq.beta_plus + seq.beta_minus;
    let conds = [Condition::I, Condition::Ii, Condition::Iii];
    let alpha_by_condition = conds.map(|c| solve_condition(c, beta_sum, theta, k));
    let mut best: Option<(T, Condition)> = None;
    for (c, a) in conds.iter().zip(alpha_by_condition) {
        if let Some(a) = a {
            if best.is_none_or(|(b, _)| a < b) {
                best = Some((a, *c));
            }
        }
    }
    Ok(StabilityCertificate {
        alpha: best.map(|b| b.0),
        condition: best.map_or(Condition::None, |b| b.1),
        beta_minus: seq.beta_minus,
        beta_plus: seq.beta_plus,
        theta_last: theta,
        k,
        alpha_by_condition,
        kernel_hash: None,
    })
}

fn quadratic_ops<T: Real>(problem: &DeblurProblem<T>) -> Result<&[crate::linops::CirculantOperator<T>]> {
    match &problem.regularizer {
        Regularizer::Quadratic { ops } => Ok(ops),
        Regularizer::SmoothedTv => Err(Error::UnsupportedProblem(
            "certification needs a quadratic regularizer; smoothed TV is not covered".into(),
        )),
    }
}

/// Eigenvalues of `H^T H` and `sum_j D_j^T D_j` for a quadratic problem.
pub fn problem_spectra<T: Real>(problem: &DeblurProblem<T>) -> Result<(Vec<T>, Vec<T>)> {
    let ops = quadratic_ops(problem)?;
    let eig_h = problem.blur.eigenvalues_normal();
    let mut eig_d = vec![T::zero(); eig_h.len()];
    for op in ops {
        for (d, e) in eig_d.iter_mut().zip(op.eigenvalues_normal()) {
            *d = *d + e;
        }
    }
    Ok((eig_h, eig_d))
}

/// Freezes each layer's `(gamma, mu, lambda)` along the trajectory of
/// `net` on `input`; `lambda` uses the noise estimate of `input` and the
/// gradient spread of the layer input, as during inference.
pub fn freeze_layers<T: Real>(net: &UnfoldedNetwork<T>, input: &ImageTensor<T>) -> Result<Vec<FrozenLayer<T>>> {
    let problem = net.problem_for(input)?;
    let sigma_hat = estimate_noise_std(input)?;
    let mut x = net.initial_point(input);
    let mut out = Vec::with_capacity(net.depth());
    for p in &net.layers {
        let lambda = lambda_struct(p, &problem, &x, sigma_hat)?.lambda;
        out.push(FrozenLayer {
            gamma: p.gamma(),
            mu: p.mu(),
            lambda,
        });
        x = layer_forward(&problem, p, &x, sigma_hat, false)?.0;
    }
    Ok(out)
}

/// Certificate for the frozen layers on a quadratic problem, tagged with
/// the hash of the blur kernel.
pub fn certify_problem<T: Real>(layers: &[FrozenLayer<T>], problem: &DeblurProblem<T>) -> Result<StabilityCertificate<T>> {
    let (eig_h, eig_d) = problem_spectra(problem)?;
    let mut cert = certify(layers, &eig_h, &eig_d)?;
    cert.kernel_hash = Some(problem.blur.kernel().hash_hex());
    Ok(cert)
}

/// The network map with frozen layers: `x -> R_{K-1}(W_{K-1} ... R_0(W_0 x + b_0) ...)`.
pub fn frozen_map<T: Real>(layers: &[FrozenLayer<T>], problem: &DeblurProblem<T>, x: &ImageTensor<T>) -> Result<ImageTensor<T>> {
    quadratic_ops(problem)?;
    let mut x = x.clone();
    for l in layers {
        let g = problem.full_grad(&x, l.lambda)?;
        let mut u = x;
        u.axpy(-l.gamma, &g);
        x = prox_image(&u, &problem.bounds, l.mu, l.gamma)?;
    }
    Ok(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragednessCheck {
    pub pass: bool,
    pub pairs: usize,
    pub violations: usize,
    /// Largest `(lhs - rhs) / |x - z|^2` observed; negative when every pair
    /// satisfies the inequality strictly.
    pub worst_margin: f64,
    /// Whether the map was also nonexpansive on every pair.
    pub nonexpansive: bool,
}

pub const AVERAGEDNESS_SLACK: f64 = 1e-10;

/// Monte-Carlo test of
/// `|Tx - Tz|^2 <= |x - z|^2 - (1 - alpha)/alpha |(x - Tx) - (z - Tz)|^2`.
/// Pairs are spread over several scales, from well inside the box to far
/// outside it, so that both the linear and the saturating regimes of the
/// map are exercised.
pub fn empirical_averagedness_check<T: Real>(
    map: impl Fn(&ImageTensor<T>) -> Result<ImageTensor<T>> + Sync,
    shape: [usize; 3],
    center: T,
    width: T,
    alpha: T,
    num_pairs: usize,
    seed: u64,
) -> Result<AveragednessCheck> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(Error::InvalidParameter(format!("alpha must be in (0, 1], got {alpha}")));
    }
    let coef = ((T::one() - alpha) / alpha).to_f64_lossy();
    let results: Vec<Result<(f64, f64)>> = (0..num_pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeding::stream(seed, i as u64);
            let spread = 10f64.powf(rng.random_range(-3.0..1.5));
            let gap = spread * 10f64.powf(rng.random_range(-3.0..0.5));
            let w = width.to_f64_lossy();
            let c = center.to_f64_lossy() + w * spread * rng.random_range(-1.0..1.0);
            let [ch, h, wd] = shape;
            let x = ImageTensor::from_fn(ch, h, wd, |_| {
                let n: f64 = rng.sample(StandardNormal);
                T::lit(c + w * spread * n)
            });
            let z = x.map(|v| {
                let n: f64 = rng.sample(StandardNormal);
                v + T::lit(w * gap * n)
            });
            let tx = map(&x)?;
            let tz = map(&z)?;
            let d = x.sub(&z).norm_sq().to_f64_lossy();
            let lhs = tx.sub(&tz).norm_sq().to_f64_lossy();
            let resid = x.sub(&tx).sub(&z.sub(&tz)).norm_sq().to_f64_lossy();
            let rhs = d - coef * resid;
            let scale = d.max(f64::MIN_POSITIVE);
            Ok(((lhs - rhs) / scale, (lhs - d) / scale))
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut nonexpansive = true;
    for r in results {
        let (rel, ne) = r?;
        worst = worst.max(rel);
        if rel > AVERAGEDNESS_SLACK {
            violations += 1;
        }
        if ne > AVERAGEDNESS_SLACK {
            nonexpansive = false;
        }
    }
    Ok(AveragednessCheck {
        pass: violations == 0,
        pairs: num_pairs,
        violations,
        worst_margin: worst,
        nonexpansive,
    })
}

/// [`empirical_averagedness_check`] for the frozen network map on a
/// quadratic problem, with pairs centered on the constraint box.
pub fn check_frozen_network<T: Real>(
    layers: &[FrozenLayer<T>],
    problem: &DeblurProblem<T>,
    alpha: T,
    num_pairs: usize,
    seed: u64,
) -> Result<AveragednessCheck> {
    quadratic_ops(problem)?;
    let b = problem.bounds;
    let center = (b.x_min + b.x_max) * T::lit(0.5);
    empirical_averagedness_check(
        |x| frozen_map(layers, problem, x),
        problem.y.shape(),
        center,
        b.width(),
        alpha,
        num_pairs,
        seed,
    )
}
