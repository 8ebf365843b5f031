//! The unfolded network: `K` forward-backward barrier steps whose stepsize,
//! barrier weight and regularization weight are learned per layer.

mod model_file;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{estimate_noise_std, ImageTensor};
use crate::linops::{CirculantOperator, Kernel};
use crate::objective::DeblurProblem;
use crate::prox::{prox_box_scalar, BoxBounds};
use crate::scalar::{softplus, softplus_grad, softplus_inv, Real};
use crate::solver::{initial_point, DEFAULT_X0_MARGIN};

pub use model_file::{ModelFile, MODEL_FORMAT_VERSION};

/// Pre-activations of one layer: `gamma = softplus(a)`, `mu = softplus(m)`,
/// `lambda = softplus(b) sigma / (eta(x) + softplus(c))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams<T> {
    pub a: T,
    pub m: T,
    pub b: T,
    pub c: T,
}

pub const INIT_GAMMA: f64 = 1.0;
pub const INIT_MU: f64 = 0.02;
pub const INIT_LAMBDA_SCALE: f64 = 1.0;

impl<T: Real> LayerParams<T> {
    pub fn initial() -> Self {
        Self {
            a: softplus_inv(T::lit(INIT_GAMMA)),
            m: softplus_inv(T::lit(INIT_MU)),
            b: softplus_inv(T::lit(INIT_LAMBDA_SCALE)),
            c: softplus_inv(T::lit(INIT_LAMBDA_SCALE)),
        }
    }

    pub fn gamma(&self) -> T {
        softplus(self.a)
    }

    pub fn mu(&self) -> T {
        softplus(self.m)
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.a, self.m, self.b, self.c]
    }

    pub fn from_array(v: [T; 4]) -> Self {
        Self {
            a: v[0],
            m: v[1],
            b: v[2],
            c: v[3],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Regularization weight of a layer and its partials.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaValue<T> {
    pub lambda: T,
    pub d_b: T,
    pub d_c: T,
    pub eta: T,
}

/// `lambda = softplus(b) sigma_hat / (eta + softplus(c))` for a given
/// gradient spread `eta`.
pub fn lambda_from_eta<T: Real>(params: &LayerParams<T>, eta: T, sigma_hat: T) -> Result<LambdaValue<T>> {
    if !(sigma_hat >= T::zero()) || !sigma_hat.is_finite() {
        return Err(Error::InvalidParameter(format!("noise estimate must be >= 0, got {sigma_hat}")));
    }
    let den = eta + softplus(params.c);
    let lambda = softplus(params.b) * sigma_hat / den;
    Ok(LambdaValue {
        lambda,
        d_b: softplus_grad(params.b) * sigma_hat / den,
        d_c: -lambda * softplus_grad(params.c) / den,
        eta,
    })
}

pub fn lambda_struct<T: Real>(
    params: &LayerParams<T>,
    problem: &DeblurProblem<T>,
    x: &ImageTensor<T>,
    sigma_hat: T,
) -> Result<LambdaValue<T>> {
    lambda_from_eta(params, problem.gradient_spread(x)?, sigma_hat)
}

/// Quantities saved by [`layer_forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct LayerCache<T: Real> {
    pub params: LayerParams<T>,
    pub x: ImageTensor<T>,
    pub gamma: T,
    pub mu: T,
    pub lambda: LambdaValue<T>,
    /// `x - gamma grad h(x)`.
    pub u: ImageTensor<T>,
    pub grad_h: ImageTensor<T>,
    pub grad_r: ImageTensor<T>,
    pub jac_diag: Vec<T>,
    pub grad_mu: Vec<T>,
    pub grad_gamma: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct LayerGrads<T> {
    pub params: LayerParams<T>,
    pub x: Option<ImageTensor<T>>,
}

/// One layer: `prox_{gamma mu B}(x - gamma grad h(x, y, lambda))`. `eta`
/// overrides the gradient spread of `x` inside `lambda` when given.
pub fn layer_forward_with_eta<T: Real>(
    problem: &DeblurProblem<T>,
    params: &LayerParams<T>,
    x: &ImageTensor<T>,
    sigma_hat: T,
    eta: Option<T>,
    want_cache: bool,
) -> Result<(ImageTensor<T>, Option<LayerCache<T>>)> {
    let gamma = params.gamma();
    let mu = params.mu();
    let lambda = match eta {
        Some(e) => lambda_from_eta(params, e, sigma_hat)?,
        None => lambda_struct(params, problem, x, sigma_hat)?,
    };
    let (_, grad_f) = problem.fidelity_value_grad(x)?;
    let grad_r = if lambda.lambda == T::zero() && !want_cache {
        ImageTensor::zeros(x.channels(), x.height(), x.width())
    } else {
        problem.reg_value_grad(x)?.1
    };
    let mut grad_h = grad_f;
    grad_h.axpy(lambda.lambda, &grad_r);
    let mut u = x.clone();
    u.axpy(-gamma, &grad_h);
    if !u.is_finite() {
        return Err(Error::NonFinite("layer gradient step".into()));
    }

    let n = u.len();
    let mut out = u.clone();
    let (mut jac, mut gmu, mut ggam) = if want_cache {
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n))
    } else {
        (Vec::new(), Vec::new(), Vec::new())
    };
    for v in out.as_slice_mut() {
        let p = prox_box_scalar(*v, &problem.bounds, mu, gamma, want_cache)?;
        *v = p.value;
        if want_cache {
            jac.push(p.d_x);
            gmu.push(p.d_mu);
            ggam.push(p.d_gamma);
        }
    }
    let cache = want_cache.then(|| LayerCache {
        params: *params,
        x: x.clone(),
        gamma,
        mu,
        lambda,
        u,
        grad_h,
        grad_r,
        jac_diag: jac,
        grad_mu: gmu,
        grad_gamma: ggam,
    });
    Ok((out, cache))
}

pub fn layer_forward<T: Real>(
    problem: &DeblurProblem<T>,
    params: &LayerParams<T>,
    x: &ImageTensor<T>,
    sigma_hat: T,
    want_cache: bool,
) -> Result<(ImageTensor<T>, Option<LayerCache<T>>)> {
    layer_forward_with_eta(problem, params, x, sigma_hat, None, want_cache)
}

/// Gradients of `<upstream, layer output>` with respect to the four
/// pre-activations and, when `want_x`, the layer input (with the gradient
/// spread inside `lambda` held fixed).
pub fn layer_vjp<T: Real>(
    problem: &DeblurProblem<T>,
    cache: &LayerCache<T>,
    upstream: &ImageTensor<T>,
    want_x: bool,
) -> Result<LayerGrads<T>> {
    upstream.ensure_same_shape(&cache.x)?;
    let up = upstream.as_slice();
    let gh = cache.grad_h.as_slice();
    let gr = cache.grad_r.as_slice();
    let mut d_gamma = T::zero();
    let mut d_mu = T::zero();
    let mut d_lambda = T::zero();
    for i in 0..up.len() {
        let j = cache.jac_diag[i];
        d_gamma = d_gamma + up[i] * (cache.grad_gamma[i] - j * gh[i]);
        d_mu = d_mu + up[i] * cache.grad_mu[i];
        d_lambda = d_lambda - up[i] * j * cache.gamma * gr[i];
    }
    let p = &cache.params;
    let params = LayerParams {
        a: d_gamma * softplus_grad(p.a),
        m: d_mu * softplus_grad(p.m),
        b: d_lambda * cache.lambda.d_b,
        c: d_lambda * cache.lambda.d_c,
    };
    let x = if want_x {
        // (I - gamma (H^T H + lambda R''(x))) J up; every factor is symmetric.
        let mut w = upstream.clone();
        for (wi, &j) in w.as_slice_mut().iter_mut().zip(&cache.jac_diag) {
            *wi = *wi * j;
        }
        let mut curv = problem.blur.apply_normal(&w)?;
        if cache.lambda.lambda != T::zero() {
            curv.axpy(cache.lambda.lambda, &problem.reg_hessian_vec(&cache.x, &w)?);
        }
        w.axpy(-cache.gamma, &curv);
        Some(w)
    } else {
        None
    };
    Ok(LayerGrads { params, x })
}

/// Trainable network plus the fixed problem description it unrolls.
#[derive(Clone, Debug, PartialEq)]
pub struct UnfoldedNetwork<T: Real> {
    pub layers: Vec<LayerParams<T>>,
    pub kernel: Kernel<T>,
    pub delta: T,
    pub bounds: BoxBounds<T>,
    pub x0_margin: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub layer: usize,
    pub gamma: f64,
    pub mu: f64,
    pub lambda: f64,
}

#[derive(Clone, Debug)]
pub struct Inference<T> {
    pub image: ImageTensor<T>,
    pub sigma_hat: T,
    pub layers: Vec<LayerRecord>,
}

impl<T: Real> UnfoldedNetwork<T> {
    /// `k` layers at the default initialization.
    pub fn new(kernel: Kernel<T>, k: usize) -> Self {
        Self {
            layers: vec![LayerParams::initial(); k],
            kernel,
            delta: T::lit(crate::objective::DEFAULT_DELTA),
            bounds: BoxBounds::unit(),
            x0_margin: T::lit(DEFAULT_X0_MARGIN),
        }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Smoothed-TV deblurring problem for the observation `y`.
    pub fn problem_for(&self, y: &ImageTensor<T>) -> Result<DeblurProblem<T>> {
        let blur = CirculantOperator::new(self.kernel.clone(), y.spatial_shape())?;
        DeblurProblem::new(blur, y.clone(), self.bounds)?.with_delta(self.delta)
    }

    pub fn initial_point(&self, y: &ImageTensor<T>) -> ImageTensor<T> {
        initial_point(y, &self.bounds, self.x0_margin)
    }

    pub fn infer(&self, y: &ImageTensor<T>) -> Result<Inference<T>> {
        let problem = self.problem_for(y)?;
        let sigma_hat = estimate_noise_std(y)?;
        self.infer_with(&problem, sigma_hat)
    }

    /// Runs all layers on `problem.y` with a given noise estimate.
    pub fn infer_with(&self, problem: &DeblurProblem<T>, sigma_hat: T) -> Result<Inference<T>> {
        let mut x = self.initial_point(&problem.y);
        let mut layers = Vec::with_capacity(self.depth());
        for (k, p) in self.layers.iter().enumerate() {
            let lambda = lambda_struct(p, problem, &x, sigma_hat)?.lambda;
            layers.push(LayerRecord {
                layer: k,
                gamma: p.gamma().to_f64_lossy(),
                mu: p.mu().to_f64_lossy(),
                lambda: lambda.to_f64_lossy(),
            });
            x = layer_forward(problem, p, &x, sigma_hat, false)?.0;
        }
        Ok(Inference {
            image: x,
            sigma_hat,
            layers,
        })
    }
}
