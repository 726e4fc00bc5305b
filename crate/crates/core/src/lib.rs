//! Physics-informed neural networks for small-strain linear elastostatics.
//!
//! Displacement fields are represented by small fully connected tanh
//! networks whose outputs are multiplied by a distance factor so that fixed
//! displacements hold exactly. Training minimizes either the mean-square
//! residual of equilibrium and traction conditions at grid points
//! ([`loss::CollocationLoss`]) or the total potential energy
//! ([`loss::EnergyLoss`]) with L-BFGS ([`optimizer`]).
//!
//! The guide in `book/` walks through each piece with runnable snippets.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod error;
pub mod harness;
pub mod loss;
pub mod mechanics;
pub mod network;
pub mod optimizer;
pub mod problems;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/elasticity.md")]
    mod elasticity {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/optimizer.md")]
    mod optimizer {}
    #[doc = include_str!("../../../book/src/benchmarks.md")]
    mod benchmarks {}
    #[doc = include_str!("../../../book/src/running.md")]
    mod running {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
