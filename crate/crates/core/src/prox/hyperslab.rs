use crate::error::{Error, Result};
use crate::prox::cubic::{cubic_root_in_interval_with, Cubic, LowerBound};
use crate::prox::{check_dim, check_params, dot, scaled, Hyperslab, Jacobian, ProxDerivatives, ProxResult};
use crate::scalar::Real;

/// Root in `(b_min, b_max)` of
/// `z^3 - (b_min + b_max + t) z^2 + (b_min b_max + t (b_min + b_max) - 2 s) z
///  - b_min b_max t + s (b_min + b_max)`,
/// where `t = a^T x` and `s = gamma mu |a|^2`.
pub(crate) fn slab_kappa<T: Real>(t: T, b_min: T, b_max: T, s: T) -> Result<T> {
    let sum = b_min + b_max;
    let prod = b_min * b_max;
    let cubic = Cubic::new(
        T::one(),
        -(sum + t),
        prod + t * sum - T::lit(2.0) * s,
        -prod * t + s * sum,
    );
    // Same polynomial in factored form, accurate near the slab edges.
    let factored = |z: T| (b_max - z) * (b_min - z) * (z - t) + s * (sum - T::lit(2.0) * z);
    cubic_root_in_interval_with(&cubic, b_min, b_max, LowerBound::Open, factored)
}

/// `eta = (b_max - k)(b_min - k) - (b_min + b_max - 2k)(k - t) - 2 s`, the
/// derivative of the cubic at its root; strictly negative in exact arithmetic.
pub(crate) fn slab_eta<T: Real>(kappa: T, t: T, b_min: T, b_max: T, s: T) -> Result<T> {
    let eta = (b_max - kappa) * (b_min - kappa)
        - (b_min + b_max - T::lit(2.0) * kappa) * (kappa - t)
        - T::lit(2.0) * s;
    let w = b_max - b_min;
    let floor = T::lit(1e-14) * T::one().max(w * w);
    if !(eta.abs() >= floor) {
        return Err(Error::DerivativeDegeneracy(format!(
            "hyperslab eta = {eta} below {floor} (kappa = {kappa}, t = {t})"
        )));
    }
    Ok(eta)
}

/// Barrier prox for the hyperslab `b_min <= a^T u <= b_max`:
/// `x + (kappa - a^T x) / |a|^2 a` with `kappa` the admissible cubic root.
pub fn prox_hyperslab<T: Real>(
    x: &[T],
    c: &Hyperslab<T>,
    mu: T,
    gamma: T,
    want_derivs: bool,
) -> Result<ProxResult<T>> {
    check_params(mu, gamma)?;
    check_dim(x, c.a.len())?;
    let na = dot(&c.a, &c.a);
    let t = dot(&c.a, x);
    let s = gamma * mu * na;
    let kappa = slab_kappa(t, c.b_min, c.b_max, s)?;
    let coef = (kappa - t) / na;
    let value: Vec<T> = x.iter().zip(&c.a).map(|(&xi, &ai)| xi + coef * ai).collect();

    let derivatives = if want_derivs {
        let eta = slab_eta(kappa, t, c.b_min, c.b_max, s)?;
        let jac_coef = ((c.b_max - kappa) * (c.b_min - kappa) / eta - T::one()) / na;
        let lever = c.b_min + c.b_max - T::lit(2.0) * kappa;
        Some(ProxDerivatives {
            jac_x: Jacobian::RankOne {
                scale: T::one(),
                u: scaled(&c.a, jac_coef),
                v: c.a.clone(),
            },
            grad_mu: scaled(&c.a, -gamma * lever / eta),
            grad_gamma: scaled(&c.a, -mu * lever / eta),
        })
    } else {
        None
    };
    Ok(ProxResult {
        value,
        kappa: Some(kappa),
        derivatives,
    })
}
