//! Stokes data for connections `d - (Z/t^2 + f/t) dt` on matrix Lie algebras.
//!
//! Two independent routes are provided. The series route evaluates the
//! multilogarithm families `M_n`, `L_n`, `J_n`, `Q_n` by iterated integrals
//! and assembles Stokes factors, the Stokes map and its inverse, and the
//! Stokes multipliers. The [`oracle`] route computes the same objects from
//! canonical solutions of the Fourier-Laplace dual Fuchsian system.

// Negated comparisons are deliberate: NaN must fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod complexpath;
pub mod error;
pub mod liealg;
pub mod mlogfun;
pub mod ode;
pub mod oracle;
pub mod quad;
pub mod stokes;
pub mod transforms;
pub mod trees;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;

pub(crate) const TWO_PI_I: C64 = C64::new(0.0, std::f64::consts::TAU);

/// `2πi`.
pub fn two_pi_i() -> C64 {
    TWO_PI_I
}
