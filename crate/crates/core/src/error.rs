use crate::C64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("detour radius {radius} exceeds the admissible bound {limit}")]
    RadiusTooLarge { radius: f64, limit: f64 },
    #[error("degenerate path: start and end coincide")]
    DegeneratePath,
    #[error("ray passes within {distance:e} of the pole {pole}")]
    RayHitsPole { pole: C64, distance: f64 },
    #[error("pole {pole} lies on the integration path")]
    PoleOnPath { pole: C64 },
    #[error("step size underflow at path parameter {at}")]
    ToleranceNotMet { at: f64 },
    #[error("non-generic input: {0}")]
    NonGeneric(String),
    #[error("transform is not unit: F_1({at}) = {value}")]
    NotUnit { at: C64, value: C64 },
    #[error("transform is not invertible: F_1({at}) = 0")]
    NotInvertible { at: C64 },
    #[error("components lie on several rays")]
    MixedRays,
    #[error("series not converged at order {order}: last term norm {norm:e}")]
    NotConverged { order: usize, norm: f64 },
    #[error("support escapes the truncation window of height {height}")]
    WindowTooSmall { height: usize },
    #[error("ray at angle {angle}π is not admissible")]
    InadmissibleRay { angle: f64 },
    #[error("resonant residue")]
    Resonant,
    #[error("point {z} is outside the disc of convergence (radius {radius})")]
    OutOfDisc { z: C64, radius: f64 },
    #[error("projector condition fails: residual {residual:e}")]
    ProjectorMismatch { residual: f64 },
    #[error("tail bound {bound:e} exceeds the quadrature tolerance")]
    TailBoundExceeded { bound: f64 },
    #[error("estimates spread {spread:e} exceeds the tolerance")]
    SpreadTooLarge { spread: f64 },
    #[error("path crosses the root hyperplane of {root:?}")]
    HyperplaneCrossing { root: (usize, usize) },
    #[error("invalid input: {0}")]
    Invalid(String),
}
