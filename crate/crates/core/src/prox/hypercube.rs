use crate::error::Result;
use crate::prox::hyperslab::{slab_eta, slab_kappa};
use crate::prox::{check_params, BoxBounds, Jacobian, ProxDerivatives, ProxResult};
use crate::scalar::Real;

/// One coordinate of the box prox and its partial derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarProx<T> {
    pub value: T,
    pub d_x: T,
    pub d_mu: T,
    pub d_gamma: T,
}

/// Scalar hyperslab prox with `a = 1` on `(x_min, x_max)`.
pub fn prox_box_scalar<T: Real>(x: T, bounds: &BoxBounds<T>, mu: T, gamma: T, want_derivs: bool) -> Result<ScalarProx<T>> {
    let s = gamma * mu;
    let (lo, hi) = (bounds.x_min, bounds.x_max);
    let kappa = slab_kappa(x, lo, hi, s)?;
    if !want_derivs {
        return Ok(ScalarProx {
            value: kappa,
            d_x: T::zero(),
            d_mu: T::zero(),
            d_gamma: T::zero(),
        });
    }
    let eta = slab_eta(kappa, x, lo, hi, s)?;
    let lever = lo + hi - T::lit(2.0) * kappa;
    Ok(ScalarProx {
        value: kappa,
        d_x: (hi - kappa) * (lo - kappa) / eta,
        d_mu: -gamma * lever / eta,
        d_gamma: -mu * lever / eta,
    })
}

/// Separable barrier prox for `[x_min, x_max]^n`; the Jacobian is diagonal.
pub fn prox_box<T: Real>(x: &[T], bounds: &BoxBounds<T>, mu: T, gamma: T, want_derivs: bool) -> Result<ProxResult<T>> {
    check_params(mu, gamma)?;
    bounds.validate_self()?;
    let n = x.len();
    let mut value = Vec::with_capacity(n);
    let (mut jac, mut gmu, mut ggam) = if want_derivs {
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n))
    } else {
        (Vec::new(), Vec::new(), Vec::new())
    };
    for &xi in x {
        let p = prox_box_scalar(xi, bounds, mu, gamma, want_derivs)?;
        value.push(p.value);
        if want_derivs {
            jac.push(p.d_x);
            gmu.push(p.d_mu);
            ggam.push(p.d_gamma);
        }
    }
    Ok(ProxResult {
        value,
        kappa: None,
        derivatives: want_derivs.then(|| ProxDerivatives {
            jac_x: Jacobian::Diagonal(jac),
            grad_mu: gmu,
            grad_gamma: ggam,
        }),
    })
}

impl<T: Real> BoxBounds<T> {
    fn validate_self(&self) -> Result<()> {
        BoxBounds::new(self.x_min, self.x_max).map(|_| ())
    }
}
