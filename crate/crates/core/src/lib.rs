//! Barrier proximal interior-point image restoration.
//!
//! The crate provides closed-form proximity operators of logarithmic
//! barriers with their derivatives ([`prox`]), a forward-backward proximal
//! interior-point solver for constrained deblurring ([`solver`]), an
//! unfolded version of that solver with learnable per-layer stepsize,
//! barrier and regularization parameters ([`unfolded`], [`training`]), and
//! an averagedness certifier for the quadratic case ([`stability`]).
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`, which is what the pipeline and the CLI use.

pub mod error;
pub mod imaging;
pub mod linops;
pub mod objective;
pub mod prox;
mod scalar;
pub mod seeding;
pub mod solver;
pub mod stability;
pub mod training;
pub mod unfolded;

pub use error::{Error, Result};
pub use scalar::{softplus, softplus_grad, softplus_inv, Real};

pub type Image = imaging::ImageTensor<f64>;
pub type Operator = linops::CirculantOperator<f64>;
pub type Problem = objective::DeblurProblem<f64>;
pub type Network = unfolded::UnfoldedNetwork<f64>;
pub type Certificate = stability::StabilityCertificate<f64>;

pub type Image32 = imaging::ImageTensor<f32>;
pub type Operator32 = linops::CirculantOperator<f32>;
