use crate::error::Result;
use crate::prox::{check_dim, check_params, dot, scaled, Affine, Jacobian, ProxDerivatives, ProxResult};
use crate::scalar::Real;

/// Barrier prox for the half-space `a^T u <= b`:
/// `x + (r - sqrt(r^2 + 4 gamma mu |a|^2)) / (2 |a|^2) a`, `r = b - a^T x`.
pub fn prox_affine<T: Real>(x: &[T], c: &Affine<T>, mu: T, gamma: T, want_derivs: bool) -> Result<ProxResult<T>> {
    check_params(mu, gamma)?;
    check_dim(x, c.a.len())?;
    let na = dot(&c.a, &c.a);
    let r = c.b - dot(&c.a, x);
    let s4 = T::lit(4.0) * gamma * mu * na;
    let root = (r * r + s4).sqrt();
    // r - root, and 1 - r/root, without cancellation when r >> 0.
    let (step, one_minus) = if r > T::zero() {
        (-s4 / (r + root), s4 / ((root + r) * root))
    } else {
        (r - root, T::one() - r / root)
    };
    let coef = step / (T::lit(2.0) * na);
    let value: Vec<T> = x.iter().zip(&c.a).map(|(&xi, &ai)| xi + coef * ai).collect();

    let derivatives = want_derivs.then(|| ProxDerivatives {
        jac_x: Jacobian::RankOne {
            scale: T::one(),
            u: scaled(&c.a, -one_minus / (T::lit(2.0) * na)),
            v: c.a.clone(),
        },
        grad_mu: scaled(&c.a, -gamma / root),
        grad_gamma: scaled(&c.a, -mu / root),
    });
    Ok(ProxResult {
        value,
        kappa: None,
        derivatives,
    })
}
