//! Independent route to Stokes data through the Fourier-Laplace dual
//! Fuchsian system.

pub mod fuchsian;
pub mod imd;
pub mod laplace;

pub use fuchsian::{
    canonical_h, canonical_solution, chen_series, parallel_transport, regularized_series, regularized_transport,
    FuchsianSystem, RayChain,
};
pub use imd::isomonodromy_flow;
pub use laplace::{fundamental, laplace_y, stokes_factor_numeric, IrregularSystem, LaplaceConfig, NumericStokesFactor};
