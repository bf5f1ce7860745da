//! Suspension flows over substitutions: orbits, twisted integrals and bounds on
//! spectral measures of small balls.

mod bounds;
mod calibrate;
mod engine;
mod suspension;

pub use bounds::{
    combined_bound, hof_bound, near_zero_bound, near_zero_log2, product_bound, Branch, CombinedBound,
    CombinedConstants, HofBound, OmegaContext, ProductBound, Radius,
};
pub use calibrate::{
    calibrate_product, logstar_bound_check, spectral_sweep, validate_product, LogstarCheck, LogstarPoint,
    ProductCalibration, ProductCheck, ReportRow, SpectralReport, SweepConfig,
};
pub use engine::{g_r, twisted_sum, twisted_sum_direct, GrEstimate, TwistEngine};
pub use suspension::{orbit_tiles, CylFunction, CylKind, OrbitStart, RoofMode, SuspensionSpec, Tile};

use crate::algebra::AlgebraError;
use crate::ekspansion::EkError;
use crate::hp::PrecisionError;
use crate::lattice::LatticeError;
use crate::subst::SubstError;

/// Default trapezoid nodes per tile for Lipschitz functions.
pub const DEFAULT_LIP_NODES: usize = 64;
/// Deepest hierarchy level the engine will build.
pub const MAX_LEVELS: usize = 600;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Subst(#[from] SubstError),
    #[error(transparent)]
    Precision(#[from] PrecisionError),
    #[error(transparent)]
    Ek(#[from] EkError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("{what} needs {needed} but the budget is {budget}")]
    Budget { what: String, needed: String, budget: String },
    #[error("outside the domain: {0}")]
    Domain(String),
    #[error("function has mean {mean:e}, not zero")]
    MeanNotZero { mean: f64 },
    #[error("wrong mode: {0}")]
    Mode(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}
