//! Real roots of cubic polynomials and selection of the unique root lying in
//! a prescribed interval.
//!
//! All three roots come from the trigonometric / Cardano formulas. The
//! admissible one is picked by interval membership and polished by one
//! guarded Newton step. When the discriminant is too close to zero for the
//! closed forms to be trusted, or when rounding pushes the admissible root
//! onto an endpoint, the root is bracketed and bisected instead.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `c3 z^3 + c2 z^2 + c1 z + c0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cubic<T> {
    pub c3: T,
    pub c2: T,
    pub c1: T,
    pub c0: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RealRoots<T> {
    roots: [T; 3],
    count: usize,
    /// Discriminant within `root_tol` of zero, relative to its scale.
    pub near_degenerate: bool,
}

impl<T: Copy> RealRoots<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.roots[..self.count]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LowerBound {
    Open,
    Closed,
}

impl<T: Real> Cubic<T> {
    pub fn new(c3: T, c2: T, c1: T, c0: T) -> Self {
        Self { c3, c2, c1, c0 }
    }

    pub fn eval(&self, z: T) -> T {
        ((self.c3 * z + self.c2) * z + self.c1) * z + self.c0
    }

    pub fn deriv(&self, z: T) -> T {
        (T::lit(3.0) * self.c3 * z + T::lit(2.0) * self.c2) * z + self.c1
    }

    /// Magnitude of the terms summed by [`Cubic::eval`] at `z`; the natural
    /// yardstick for a residual.
    pub fn scale_at(&self, z: T) -> T {
        let a = z.abs();
        self.c3.abs() * a * a * a + self.c2.abs() * a * a + self.c1.abs() * a + self.c0.abs()
    }

    pub fn real_roots(&self) -> Result<RealRoots<T>> {
        if self.c3 == T::zero() || !self.c3.is_finite() {
            return Err(Error::IllPosedCubic(format!("leading coefficient {}", self.c3)));
        }
        let three = T::lit(3.0);
        let a = self.c2 / self.c3;
        let b = self.c1 / self.c3;
        let c = self.c0 / self.c3;
        let shift = a / three;
        // Depressed form t^3 + p t + q with z = t - a/3.
        let p = b - a * a / three;
        let q = T::lit(2.0) * a * a * a / T::lit(27.0) - a * b / three + c;
        let half_q = q * T::lit(0.5);
        let third_p = p / three;
        let cube = third_p * third_p * third_p;
        let disc = half_q * half_q + cube;
        let disc_scale = half_q * half_q + cube.abs();
        // The discriminant is homogeneous of degree six in the root scale.
        let root_scale = a.abs().max(b.abs().sqrt()).max(c.abs().cbrt());
        let near_degenerate = disc.abs() <= T::root_tol() * root_scale.powi(6);

        if disc_scale == T::zero() {
            return Ok(RealRoots {
                roots: [-shift; 3],
                count: 3,
                near_degenerate: true,
            });
        }
        if disc > T::zero() {
            let sq = disc.sqrt();
            // Pick the sign that avoids cancellation.
            let big = -half_q - sq.copysign(q);
            let u = big.cbrt();
            let t = if u == T::zero() { T::zero() } else { u - third_p / u };
            Ok(RealRoots {
                roots: [t - shift, T::zero(), T::zero()],
                count: 1,
                near_degenerate,
            })
        } else {
            // Three real roots (p < 0 here).
            let r = T::lit(2.0) * (-third_p).sqrt();
            let arg = (three * q / (T::lit(2.0) * p) * (-three / p).sqrt())
                .max(-T::one())
                .min(T::one());
            let phi = arg.acos() / three;
            let step = T::lit(2.0) * T::PI() / three;
            let roots = [
                r * phi.cos() - shift,
                r * (phi - step).cos() - shift,
                r * (phi - step - step).cos() - shift,
            ];
            Ok(RealRoots {
                roots,
                count: 3,
                near_degenerate,
            })
        }
    }
}

/// The unique root of `cubic` in `(lo, hi)` (or `[lo, hi)`).
///
/// Fails with [`Error::IllPosedCubic`] when no root or several distinct
/// roots are found there.
pub fn cubic_root_in_interval<T: Real>(cubic: &Cubic<T>, lo: T, hi: T, lower: LowerBound) -> Result<T> {
    cubic_root_in_interval_with(cubic, lo, hi, lower, |z| cubic.eval(z))
}

/// As [`cubic_root_in_interval`], with `eval` an alternative (typically
/// factored, hence more accurate near the endpoints) evaluation of the same
/// polynomial, used for polishing and bisection.
pub fn cubic_root_in_interval_with<T: Real>(
    cubic: &Cubic<T>,
    lo: T,
    hi: T,
    lower: LowerBound,
    eval: impl Fn(T) -> T,
) -> Result<T> {
    if !(lo < hi) {
        return Err(Error::IllPosedCubic(format!("empty interval ({lo}, {hi})")));
    }
    let roots = cubic.real_roots()?;
    let edge = T::root_tol() * T::one().max(lo.abs()).max(hi.abs()).max(hi - lo);
    let admissible = |r: T| match lower {
        LowerBound::Open => r > lo && r < hi,
        LowerBound::Closed => r >= lo && r < hi,
    };

    let mut candidates: Vec<T> = Vec::with_capacity(3);
    for &r in roots.as_slice() {
        if !r.is_finite() {
            continue;
        }
        let inside = match lower {
            LowerBound::Open => r > lo + edge && r < hi - edge,
            LowerBound::Closed if (r - lo).abs() <= edge => {
                if eval(lo) == T::zero() {
                    candidates.push(lo);
                    continue;
                }
                false
            }
            LowerBound::Closed => r > lo && r < hi - edge,
        };
        if inside && !candidates.iter().any(|&c| (c - r).abs() <= edge) {
            candidates.push(r);
        }
    }

    if candidates.len() > 1 {
        // Closed forms lose accuracy when coefficients span many magnitudes;
        // keep only candidates the accurate evaluator confirms.
        candidates.retain(|&r| confirms_root(&eval, r, lo, hi));
    }
    if !roots.near_degenerate {
        match candidates.len() {
            1 => return Ok(polish(cubic, &eval, candidates[0], &admissible)),
            n if n > 1 => {
                return Err(Error::IllPosedCubic(format!(
                    "{n} distinct roots in ({lo}, {hi}): {candidates:?}"
                )))
            }
            _ => {}
        }
    }
    bisect(&eval, lo, hi, lower).ok_or_else(|| {
        Error::IllPosedCubic(format!("no isolated root in ({lo}, {hi}); roots {:?}", roots.as_slice()))
    })
}

fn confirms_root<T: Real>(eval: &impl Fn(T) -> T, r: T, lo: T, hi: T) -> bool {
    let f = eval(r);
    if f == T::zero() {
        return true;
    }
    let delta = T::epsilon().sqrt() * T::one().max(r.abs());
    let a = (r - delta).max(lo);
    let b = (r + delta).min(hi);
    let (fa, fb) = (eval(a), eval(b));
    (fa.signum() != f.signum() && fa != T::zero()) || (fb.signum() != f.signum() && fb != T::zero())
}

fn polish<T: Real>(cubic: &Cubic<T>, eval: &impl Fn(T) -> T, r: T, admissible: &impl Fn(T) -> bool) -> T {
    let fr = eval(r);
    let d = cubic.deriv(r);
    if fr == T::zero() || d == T::zero() || !d.is_finite() {
        return r;
    }
    let next = r - fr / d;
    if admissible(next) && eval(next).abs() <= fr.abs() {
        next
    } else {
        r
    }
}

/// Bisection on a sign-changing bracket; returns a strictly interior point
/// (or `lo` itself when it is a root and the lower end is closed).
fn bisect<T: Real>(eval: &impl Fn(T) -> T, lo: T, hi: T, lower: LowerBound) -> Option<T> {
    let f_lo = eval(lo);
    let f_hi = eval(hi);
    if lower == LowerBound::Closed && f_lo == T::zero() {
        return Some(lo);
    }
    if f_lo == T::zero() || f_hi == T::zero() || !(f_lo.signum() * f_hi.signum() < T::zero()) {
        return None;
    }
    let (mut a, mut b) = (lo, hi);
    let lo_sign = f_lo.signum();
    let mut best: Option<(T, T)> = None;
    for _ in 0..400 {
        let mid = a + (b - a) * T::lit(0.5);
        if mid <= a || mid >= b {
            break;
        }
        let fm = eval(mid);
        if best.map_or(true, |(_, bf)| fm.abs() < bf) {
            best = Some((mid, fm.abs()));
        }
        if fm == T::zero() {
            return Some(mid);
        }
        if fm.signum() == lo_sign {
            a = mid;
        } else {
            b = mid;
        }
    }
    // The last bracket endpoints are both interior unless they are the
    // original ends; prefer whichever interior one has the smaller residual.
    [a, b]
        .into_iter()
        .filter(|&z| z > lo && z < hi)
        .map(|z| (z, eval(z).abs()))
        .chain(best)
        .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(z, _)| z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factored_cubic() {
        // (z-1)(z-2)(z-3) = z^3 - 6z^2 + 11z - 6
        let c = Cubic::new(1.0_f64, -6.0, 11.0, -6.0);
        let r = cubic_root_in_interval(&c, 1.5, 2.5, LowerBound::Open).unwrap();
        assert!((r - 2.0).abs() < 1e-14);
        assert!(matches!(
            cubic_root_in_interval(&c, 0.5, 3.5, LowerBound::Open),
            Err(Error::IllPosedCubic(_))
        ));
        assert!(cubic_root_in_interval(&c, 3.5, 4.5, LowerBound::Open).is_err());
    }

    #[test]
    fn slab_example_cubic() {
        let c = Cubic::new(1.0_f64, -3.0, 1.0, 0.5);
        let r = cubic_root_in_interval(&c, 0.0, 1.0, LowerBound::Open).unwrap();
        assert!((r - 0.741_4).abs() < 1e-4);
        assert!(c.eval(r).abs() <= 1e-12 * c.scale_at(r));
    }

    #[test]
    fn closed_lower_boundary_root() {
        // z (z^2 - 2)
        let c = Cubic::new(1.0_f64, 0.0, -2.0, 0.0);
        assert_eq!(cubic_root_in_interval(&c, 0.0, 1.0, LowerBound::Closed).unwrap(), 0.0);
        assert!(cubic_root_in_interval(&c, 0.0, 1.0, LowerBound::Open).is_err());
    }

    #[test]
    fn triple_root_falls_back_to_bisection() {
        // (z - 0.3)^3
        let c = Cubic::new(1.0_f64, -0.9, 0.27, -0.027);
        let roots = c.real_roots().unwrap();
        assert!(roots.near_degenerate);
        let r = cubic_root_in_interval(&c, 0.0, 1.0, LowerBound::Open).unwrap();
        assert!((r - 0.3).abs() < 1e-5);
    }

    #[test]
    fn single_real_root_branch() {
        // z^3 + z + 1 has one real root near -0.6823
        let c = Cubic::new(1.0_f64, 0.0, 1.0, 1.0);
        let roots = c.real_roots().unwrap();
        assert_eq!(roots.as_slice().len(), 1);
        assert!((roots.as_slice()[0] + 0.682_327_803_828_019_3).abs() < 1e-14);
    }

    #[test]
    fn zero_leading_coefficient() {
        assert!(Cubic::new(0.0, 1.0, 1.0, 1.0).real_roots().is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let c = Cubic::new(1.0f32, -3.0, 1.0, 0.5);
        let r = cubic_root_in_interval(&c, 0.0, 1.0, LowerBound::Open).unwrap();
        assert!((r - 0.741_4).abs() < 1e-3);
    }
}
