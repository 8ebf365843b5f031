//! Closed-form proximity operators of the logarithmic barrier
//! `B(u) = -sum_i ln c_i(u)` for half-spaces, hyperslabs, Euclidean balls and
//! per-coordinate boxes, with derivatives with respect to the input point,
//! the barrier weight `mu` and the stepsize `gamma`.
//!
//! Every operator evaluates `prox_{gamma mu B}(x)`, the minimizer of
//! `0.5 |x - u|^2 + gamma mu B(u)`, which always lies strictly inside the
//! constraint set.

mod ball;
mod cubic;
mod halfspace;
mod hypercube;
mod hyperslab;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use ball::prox_ball;
pub use cubic::{cubic_root_in_interval, cubic_root_in_interval_with, Cubic, LowerBound, RealRoots};
pub use halfspace::prox_affine;
pub use hypercube::{prox_box, prox_box_scalar, ScalarProx};
pub use hyperslab::prox_hyperslab;

/// `{u : a^T u <= b}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine<T> {
    pub a: Vec<T>,
    pub b: T,
}

/// `{u : b_min <= a^T u <= b_max}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperslab<T> {
    pub a: Vec<T>,
    pub b_min: T,
    pub b_max: T,
}

/// `{u : |u - center|^2 <= alpha}`; `alpha` is the squared radius.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball<T> {
    pub center: Vec<T>,
    pub alpha: T,
}

/// `[x_min, x_max]^n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxBounds<T> {
    pub x_min: T,
    pub x_max: T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintSpec<T> {
    Affine(Affine<T>),
    Hyperslab(Hyperslab<T>),
    Ball(Ball<T>),
    Box(BoxBounds<T>),
}

/// Structured Jacobian of the prox with respect to its input.
#[derive(Clone, Debug, PartialEq)]
pub enum Jacobian<T> {
    /// `scale * (I + u v^T)`.
    RankOne { scale: T, u: Vec<T>, v: Vec<T> },
    Diagonal(Vec<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProxDerivatives<T> {
    pub jac_x: Jacobian<T>,
    pub grad_mu: Vec<T>,
    pub grad_gamma: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProxResult<T> {
    pub value: Vec<T>,
    /// Cubic root parameterizing the solution (hyperslab: `a^T value`;
    /// ball: `|value - center|`).
    pub kappa: Option<T>,
    /// Present only when requested.
    pub derivatives: Option<ProxDerivatives<T>>,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn scaled<T: Real>(a: &[T], s: T) -> Vec<T> {
    a.iter().map(|&v| v * s).collect()
}

impl<T: Real> Jacobian<T> {
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        match self {
            Jacobian::RankOne { scale, u, v } => {
                let vx = dot(v, x);
                x.iter().zip(u).map(|(&xi, &ui)| *scale * (xi + ui * vx)).collect()
            }
            Jacobian::Diagonal(d) => d.iter().zip(x).map(|(&di, &xi)| di * xi).collect(),
        }
    }

    pub fn apply_transpose(&self, x: &[T]) -> Vec<T> {
        match self {
            Jacobian::RankOne { scale, u, v } => {
                let ux = dot(u, x);
                x.iter().zip(v).map(|(&xi, &vi)| *scale * (xi + vi * ux)).collect()
            }
            Jacobian::Diagonal(_) => self.apply(x),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Jacobian::RankOne { u, .. } => u.len(),
            Jacobian::Diagonal(d) => d.len(),
        }
    }

    /// Dense row-major matrix; meant for small problems and tests.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut e = vec![T::zero(); n];
                e[i] = T::one();
                self.apply_transpose(&e)
            })
            .collect()
    }
}

impl<T: Real> BoxBounds<T> {
    pub fn new(x_min: T, x_max: T) -> Result<Self> {
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidConstraint(format!(
                "box needs finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Self { x_min, x_max })
    }

    pub fn unit() -> Self {
        Self {
            x_min: T::zero(),
            x_max: T::one(),
        }
    }

    pub fn width(&self) -> T {
        self.x_max - self.x_min
    }
}

impl<T: Real> ConstraintSpec<T> {
    pub fn affine(a: Vec<T>, b: T) -> Result<Self> {
        let s = Self::Affine(Affine { a, b });
        s.validate()?;
        Ok(s)
    }

    pub fn hyperslab(a: Vec<T>, b_min: T, b_max: T) -> Result<Self> {
        let s = Self::Hyperslab(Hyperslab { a, b_min, b_max });
        s.validate()?;
        Ok(s)
    }

    pub fn ball(center: Vec<T>, alpha: T) -> Result<Self> {
        let s = Self::Ball(Ball { center, alpha });
        s.validate()?;
        Ok(s)
    }

    pub fn boxed(x_min: T, x_max: T) -> Result<Self> {
        Ok(Self::Box(BoxBounds::new(x_min, x_max)?))
    }

    pub fn validate(&self) -> Result<()> {
        let nonzero = |a: &[T]| a.iter().any(|v| *v != T::zero()) && a.iter().all(|v| v.is_finite());
        match self {
            Self::Affine(c) if !nonzero(&c.a) => Err(Error::InvalidConstraint("a must be nonzero".into())),
            Self::Hyperslab(c) if !nonzero(&c.a) => {
                Err(Error::InvalidConstraint("a must be nonzero".into()))
            }
            Self::Hyperslab(c) if !(c.b_min < c.b_max) => Err(Error::InvalidConstraint(format!(
                "hyperslab needs b_min < b_max, got [{}, {}]",
                c.b_min, c.b_max
            ))),
            Self::Ball(c) if !(c.alpha > T::zero()) => {
                Err(Error::InvalidConstraint(format!("ball needs alpha > 0, got {}", c.alpha)))
            }
            Self::Box(c) => BoxBounds::new(c.x_min, c.x_max).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Constraint values `c_i(u)`; `u` is strictly feasible iff all are > 0.
    pub fn constraint_values(&self, u: &[T]) -> Vec<T> {
        match self {
            Self::Affine(c) => vec![c.b - dot(&c.a, u)],
            Self::Hyperslab(c) => {
                let t = dot(&c.a, u);
                vec![c.b_max - t, t - c.b_min]
            }
            Self::Ball(c) => {
                let d2 = u.iter().zip(&c.center).fold(T::zero(), |acc, (&x, &m)| acc + (x - m) * (x - m));
                vec![c.alpha - d2]
            }
            Self::Box(c) => u.iter().flat_map(|&x| [c.x_max - x, x - c.x_min]).collect(),
        }
    }

    pub fn strictly_feasible(&self, u: &[T]) -> bool {
        self.constraint_values(u).into_iter().all(|v| v > T::zero())
    }

    /// `B(u)`, or `None` outside the interior.
    pub fn barrier(&self, u: &[T]) -> Option<T> {
        let vals = self.constraint_values(u);
        if vals.iter().all(|&v| v > T::zero()) {
            Some(vals.into_iter().map(|v| -v.ln()).sum())
        } else {
            None
        }
    }

    /// `grad B(u)` at a strictly feasible point.
    pub fn barrier_grad(&self, u: &[T]) -> Vec<T> {
        match self {
            Self::Affine(c) => {
                let r = c.b - dot(&c.a, u);
                scaled(&c.a, T::one() / r)
            }
            Self::Hyperslab(c) => {
                let t = dot(&c.a, u);
                scaled(&c.a, T::one() / (c.b_max - t) - T::one() / (t - c.b_min))
            }
            Self::Ball(c) => {
                let diff: Vec<T> = u.iter().zip(&c.center).map(|(&x, &m)| x - m).collect();
                let r = c.alpha - dot(&diff, &diff);
                scaled(&diff, T::lit(2.0) / r)
            }
            Self::Box(c) => u
                .iter()
                .map(|&x| T::one() / (c.x_max - x) - T::one() / (x - c.x_min))
                .collect(),
        }
    }

    /// Stationarity residual `|value - x + gamma mu grad B(value)|` of a prox
    /// evaluation.
    pub fn stationarity_residual(&self, x: &[T], value: &[T], mu: T, gamma: T) -> T {
        let g = self.barrier_grad(value);
        let gm = gamma * mu;
        value
            .iter()
            .zip(x)
            .zip(&g)
            .fold(T::zero(), |acc, ((&p, &xi), &gi)| {
                let r = p - xi + gm * gi;
                acc + r * r
            })
            .sqrt()
    }
}

fn check_params<T: Real>(mu: T, gamma: T) -> Result<()> {
    if !(mu > T::zero() && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("mu must be > 0, got {mu}")));
    }
    if !(gamma > T::zero() && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
    }
    Ok(())
}

fn check_dim<T>(x: &[T], expected: usize) -> Result<()> {
    if x.len() != expected {
        return Err(Error::ShapeMismatch {
            expected: vec![expected],
            actual: vec![x.len()],
        });
    }
    Ok(())
}

/// `prox_{gamma mu B}(x)` for any supported constraint.
pub fn prox<T: Real>(
    x: &[T],
    spec: &ConstraintSpec<T>,
    mu: T,
    gamma: T,
    want_derivs: bool,
) -> Result<ProxResult<T>> {
    match spec {
        ConstraintSpec::Affine(c) => prox_affine(x, c, mu, gamma, want_derivs),
        ConstraintSpec::Hyperslab(c) => prox_hyperslab(x, c, mu, gamma, want_derivs),
        ConstraintSpec::Ball(c) => prox_ball(x, c, mu, gamma, want_derivs),
        ConstraintSpec::Box(c) => prox_box(x, c, mu, gamma, want_derivs),
    }
}
