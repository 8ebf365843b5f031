use crate::error::{Error, Result};
use crate::prox::cubic::{cubic_root_in_interval_with, Cubic, LowerBound};
use crate::prox::{check_dim, check_params, dot, Ball, Jacobian, ProxDerivatives, ProxResult};
use crate::scalar::Real;

/// Barrier prox for the ball `|u - c|^2 <= alpha`:
/// `c + (alpha - k^2) / (alpha - k^2 + 2 gamma mu) (x - c)`, where `k` is the
/// root in `[0, sqrt(alpha))` of `z^3 - d z^2 - (alpha + 2 gamma mu) z + alpha d`
/// and `d = |x - c|`. `k` equals `|value - c|`.
pub fn prox_ball<T: Real>(x: &[T], c: &Ball<T>, mu: T, gamma: T, want_derivs: bool) -> Result<ProxResult<T>> {
    check_params(mu, gamma)?;
    check_dim(x, c.center.len())?;
    let diff: Vec<T> = x.iter().zip(&c.center).map(|(&xi, &ci)| xi - ci).collect();
    let d = dot(&diff, &diff).sqrt();
    let two = T::lit(2.0);
    let s2 = two * gamma * mu;
    let alpha = c.alpha;
    let radius = alpha.sqrt();

    let cubic = Cubic::new(T::one(), -d, -(alpha + s2), alpha * d);
    let factored = |z: T| (z - d) * (z - radius) * (z + radius) - s2 * z;
    let kappa = cubic_root_in_interval_with(&cubic, T::zero(), radius, LowerBound::Closed, factored)?;

    let slack = (radius - kappa) * (radius + kappa);
    // Near the sphere `alpha - k^2` cancels; `k / d` is the same factor.
    let shrink = if kappa * kappa > T::lit(0.5) * alpha {
        kappa / d
    } else {
        slack / (slack + s2)
    };
    let value: Vec<T> = c
        .center
        .iter()
        .zip(&diff)
        .map(|(&ci, &di)| ci + shrink * di)
        .collect();

    let derivatives = if want_derivs {
        // v = value - c, w = x - value
        let v: Vec<T> = diff.iter().map(|&di| shrink * di).collect();
        let w: Vec<T> = diff.iter().zip(&v).map(|(&di, &vi)| di - vi).collect();
        let vv = dot(&v, &v);
        let slack_v = alpha - vv;
        let denom = slack_v + s2;
        let sm = alpha - T::lit(3.0) * vv + s2 + two * dot(&v, &diff);
        let floor = T::root_tol() * (alpha + s2);
        if !(sm.abs() > floor) {
            return Err(Error::DerivativeDegeneracy(format!(
                "ball Sherman-Morrison denominator {sm} below {floor}"
            )));
        }
        // M = I - 2 w v^T / sm; J = slack_v / denom * M.
        let u: Vec<T> = w.iter().map(|&wi| -two * wi / sm).collect();
        let mv_coef = two * vv / sm;
        let mv: Vec<T> = v.iter().zip(&w).map(|(&vi, &wi)| vi - mv_coef * wi).collect();
        Some(ProxDerivatives {
            jac_x: Jacobian::RankOne {
                scale: slack_v / denom,
                u,
                v: v.clone(),
            },
            grad_mu: mv.iter().map(|&m| -two * gamma / denom * m).collect(),
            grad_gamma: mv.iter().map(|&m| -two * mu / denom * m).collect(),
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
