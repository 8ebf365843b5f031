//! Deblurring objective: `1/2 |Hx - y|^2 + lambda R(x)` with either the
//! smoothed total variation or a sum of quadratic terms `1/2 |D_j x|^2`.

use crate::error::{Error, Result};
use crate::imaging::ImageTensor;
use crate::linops::{CirculantOperator, GradientOperators};
use crate::prox::BoxBounds;
use crate::scalar::Real;

pub const DEFAULT_DELTA: f64 = 0.01;

#[derive(Clone, Debug)]
pub enum Regularizer<T: Real> {
    /// `sum_i sqrt(((D_v x)_i^2 + (D_h x)_i^2) / delta^2 + 1)`.
    SmoothedTv,
    /// `1/2 sum_j |D_j x|^2`.
    Quadratic { ops: Vec<CirculantOperator<T>> },
}

#[derive(Clone, Debug)]
pub struct DeblurProblem<T: Real> {
    pub blur: CirculantOperator<T>,
    pub y: ImageTensor<T>,
    pub delta: T,
    pub bounds: BoxBounds<T>,
    pub gradients: GradientOperators<T>,
    pub regularizer: Regularizer<T>,
}

impl<T: Real> DeblurProblem<T> {
    /// Smoothed-TV problem with the default smoothing.
    pub fn new(blur: CirculantOperator<T>, y: ImageTensor<T>, bounds: BoxBounds<T>) -> Result<Self> {
        let shape = y.spatial_shape();
        if blur.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: vec![shape.0, shape.1],
                actual: vec![blur.shape().0, blur.shape().1],
            });
        }
        BoxBounds::new(bounds.x_min, bounds.x_max)?;
        Ok(Self {
            gradients: GradientOperators::new(shape)?,
            blur,
            y,
            delta: T::lit(DEFAULT_DELTA),
            bounds,
            regularizer: Regularizer::SmoothedTv,
        })
    }

    pub fn with_delta(mut self, delta: T) -> Result<Self> {
        if !(delta > T::zero()) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        self.delta = delta;
        Ok(self)
    }

    pub fn with_quadratic(mut self, ops: Vec<CirculantOperator<T>>) -> Result<Self> {
        let shape = self.shape();
        if let Some(op) = ops.iter().find(|op| op.shape() != shape) {
            return Err(Error::ShapeMismatch {
                expected: vec![shape.0, shape.1],
                actual: vec![op.shape().0, op.shape().1],
            });
        }
        self.regularizer = Regularizer::Quadratic { ops };
        Ok(self)
    }

    /// Same operators and settings, different observation.
    pub fn with_observation(&self, y: ImageTensor<T>) -> Result<Self> {
        if y.spatial_shape() != self.shape() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.shape().0, self.shape().1],
                actual: y.shape().to_vec(),
            });
        }
        Ok(Self { y, ..self.clone() })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.blur.shape()
    }

    fn check(&self, x: &ImageTensor<T>) -> Result<()> {
        x.ensure_same_shape(&self.y)
    }

    pub fn fidelity_value_grad(&self, x: &ImageTensor<T>) -> Result<(T, ImageTensor<T>)> {
        self.check(x)?;
        let r = self.blur.apply(x)?.sub(&self.y);
        Ok((r.norm_sq() * T::lit(0.5), self.blur.apply_adjoint(&r)?))
    }

    pub fn tv_value_grad(&self, x: &ImageTensor<T>) -> Result<(T, ImageTensor<T>)> {
        self.check(x)?;
        let g = self.gradients.vertical.apply(x)?;
        let h = self.gradients.horizontal.apply(x)?;
        let inv_d2 = T::one() / (self.delta * self.delta);
        let r = g.zip_map(&h, |a, b| ((a * a + b * b) * inv_d2 + T::one()).sqrt());
        let gv = self.gradients.vertical.apply_adjoint(&g.zip_map(&r, |a, ri| a / ri))?;
        let gh = self.gradients.horizontal.apply_adjoint(&h.zip_map(&r, |b, ri| b / ri))?;
        Ok((r.sum(), gv.add(&gh).scale(inv_d2)))
    }

    /// Hessian of the smoothed TV at `x` applied to `v`.
    pub fn tv_hessian_vec(&self, x: &ImageTensor<T>, v: &ImageTensor<T>) -> Result<ImageTensor<T>> {
        self.check(x)?;
        self.check(v)?;
        let dv = &self.gradients.vertical;
        let dh = &self.gradients.horizontal;
        let (g, h) = (dv.apply(x)?, dh.apply(x)?);
        let (gv, hv) = (dv.apply(v)?, dh.apply(v)?);
        let inv_d2 = T::one() / (self.delta * self.delta);
        let mut top = gv.clone();
        let mut bottom = hv.clone();
        let (gs, hs) = (g.as_slice(), h.as_slice());
        let (gvs, hvs) = (gv.as_slice(), hv.as_slice());
        for (i, (t, b)) in top.as_slice_mut().iter_mut().zip(bottom.as_slice_mut()).enumerate() {
            let (gi, hi) = (gs[i], hs[i]);
            let r = ((gi * gi + hi * hi) * inv_d2 + T::one()).sqrt();
            let r3 = r * r * r;
            let gg = T::one() / r - gi * gi * inv_d2 / r3;
            let hh = T::one() / r - hi * hi * inv_d2 / r3;
            let gh = -gi * hi * inv_d2 / r3;
            *t = gg * gvs[i] + gh * hvs[i];
            *b = gh * gvs[i] + hh * hvs[i];
        }
        Ok(dv.apply_adjoint(&top)?.add(&dh.apply_adjoint(&bottom)?).scale(inv_d2))
    }

    pub fn reg_value_grad(&self, x: &ImageTensor<T>) -> Result<(T, ImageTensor<T>)> {
        match &self.regularizer {
            Regularizer::SmoothedTv => self.tv_value_grad(x),
            Regularizer::Quadratic { ops } => {
                self.check(x)?;
                let mut value = T::zero();
                let mut grad = ImageTensor::zeros(x.channels(), x.height(), x.width());
                for op in ops {
                    let dx = op.apply(x)?;
                    value = value + dx.norm_sq() * T::lit(0.5);
                    grad.axpy(T::one(), &op.apply_adjoint(&dx)?);
                }
                Ok((value, grad))
            }
        }
    }

    pub fn reg_hessian_vec(&self, x: &ImageTensor<T>, v: &ImageTensor<T>) -> Result<ImageTensor<T>> {
        match &self.regularizer {
            Regularizer::SmoothedTv => self.tv_hessian_vec(x, v),
            Regularizer::Quadratic { ops } => {
                self.check(v)?;
                let mut out = ImageTensor::zeros(v.channels(), v.height(), v.width());
                for op in ops {
                    out.axpy(T::one(), &op.apply_normal(v)?);
                }
                Ok(out)
            }
        }
    }

    /// `H^T (Hx - y) + lambda grad R(x)`.
    pub fn full_grad(&self, x: &ImageTensor<T>, lambda: T) -> Result<ImageTensor<T>> {
        Ok(self.value_grad(x, lambda)?.1)
    }

    pub fn value(&self, x: &ImageTensor<T>, lambda: T) -> Result<T> {
        Ok(self.value_grad(x, lambda)?.0)
    }

    pub fn value_grad(&self, x: &ImageTensor<T>, lambda: T) -> Result<(T, ImageTensor<T>)> {
        check_lambda(lambda)?;
        let (f, mut g) = self.fidelity_value_grad(x)?;
        if lambda == T::zero() {
            return Ok((f, g));
        }
        let (r, gr) = self.reg_value_grad(x)?;
        g.axpy(lambda, &gr);
        Ok((f + lambda * r, g))
    }

    /// Largest eigenvalue of the regularizer Hessian over all `x`.
    pub fn reg_lipschitz(&self) -> T {
        let max = |v: Vec<T>| v.into_iter().fold(T::zero(), T::max);
        match &self.regularizer {
            Regularizer::SmoothedTv => max(self.gradients.eigenvalues_normal()) / (self.delta * self.delta),
            Regularizer::Quadratic { ops } => {
                let n = self.shape().0 * self.shape().1;
                let mut total = vec![T::zero(); n];
                for op in ops {
                    for (t, e) in total.iter_mut().zip(op.eigenvalues_normal()) {
                        *t = *t + e;
                    }
                }
                max(total)
            }
        }
    }

    /// Lipschitz constant of `x -> full_grad(x, lambda)`.
    pub fn lipschitz(&self, lambda: T) -> T {
        self.blur.norm_sq() + lambda * self.reg_lipschitz()
    }

    /// Spread of the image gradients: population standard deviation of the
    /// concatenation `[D_v x; D_h x]`.
    pub fn gradient_spread(&self, x: &ImageTensor<T>) -> Result<T> {
        self.check(x)?;
        let g = self.gradients.vertical.apply(x)?;
        let h = self.gradients.horizontal.apply(x)?;
        let n = T::from_usize(g.len() + h.len()).unwrap();
        let mean = (g.sum() + h.sum()) / n;
        let ss = g
            .as_slice()
            .iter()
            .chain(h.as_slice())
            .fold(T::zero(), |acc, &v| acc + (v - mean) * (v - mean));
        Ok((ss / n).sqrt())
    }
}

pub(crate) fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "regularization weight must be finite and non-negative, got {lambda}"
        )));
    }
    Ok(())
}
