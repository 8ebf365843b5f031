//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::NdFloat;
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real floating-point scalar: `f32` or `f64`.
///
/// The pipeline itself is instantiated with `f64` (see the aliases at the
/// crate root); `f32` is supported for the pure math kernels.
pub trait Real:
    NdFloat + FloatConst + FromPrimitive + ToPrimitive + FftNum + Sum + Default + Debug + Display
{
    /// Converts an `f64` literal. Panics only if the literal is not
    /// representable, which never happens for finite constants.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Relative tolerance used by root selection and degeneracy guards:
    /// `1e-12` for `f64`, a few ulps for `f32`.
    #[inline]
    fn root_tol() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(64.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Overflow-safe `ln(1 + exp(z))`.
pub fn softplus<T: Real>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Derivative of [`softplus`]: the logistic function.
pub fn softplus_grad<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inv<T: Real>(y: T) -> T {
    // ln(exp(y) - 1) = y + ln(1 - exp(-y))
    y + (-(-y).exp()).ln_1p()
}

pub(crate) fn median<T: Real>(values: &mut [T]) -> T {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) * T::lit(0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_values() {
        assert!((softplus(0.0f64) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(softplus(100.0f64), 100.0);
        assert!((softplus_grad(100.0f64) - 1.0).abs() < 1e-15);
        assert!((softplus(-3.0f64) - 0.048_587_351_573_741_98).abs() < 1e-15);
        assert!(softplus(-800.0f64) >= 0.0);
        assert!(softplus(800.0f32).is_finite());
    }

    #[test]
    fn softplus_grad_matches_fd() {
        for &z in &[-3.0f64, -0.5, 0.0, 1.7, 12.0] {
            let h = 1e-6;
            let fd = (softplus(z + h) - softplus(z - h)) / (2.0 * h);
            let g = softplus_grad(z);
            assert!((fd - g).abs() <= 1e-8 * g.abs().max(1e-3), "z={z}: {fd} vs {g}");
        }
    }

    #[test]
    fn softplus_inverse_round_trip() {
        for &y in &[0.02f64, 1.0, 5.0, 40.0] {
            assert!((softplus(softplus_inv(y)) - y).abs() < 1e-12 * y.max(1.0));
        }
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
