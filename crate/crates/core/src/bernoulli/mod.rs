//! Fourier transforms of biased Bernoulli convolutions, decay experiments and the
//! η-search for simultaneous small embeddings.

mod eta;
mod fourier;

pub use eta::{
    det_m, det_m_nodes, eta_search, roof_coefficients, slow_decay_probe, DetM, EtaConfig, EtaResult, ProbePoint,
    SearchMethod,
};
pub use fourier::{
    alpha_power_grid, biased_gamma_cap, decay_csv, fit_beta, fit_gamma, fourier, gap_inequality_holds, pisot_nondecay,
    salem_logstar_decay, unbiased_beta_cap, BernoulliSpec, BetaFit, DecayPoint, DecayReport, FourierValue, GammaFit,
    PisotReport, DECAY_CSV_HEADER,
};

use crate::algebra::AlgebraError;
use crate::ekspansion::EkError;
use crate::hp::PrecisionError;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum BernoulliError {
    #[error(transparent)]
    Precision(#[from] PrecisionError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Ek(#[from] EkError),
    #[error("outside the domain: {0}")]
    Domain(String),
    #[error("wrong number class: {0}")]
    Classification(String),
    #[error("search needs {needed} nodes but the budget is {budget}")]
    SearchBudget { needed: String, budget: u64 },
    #[error("candidate {coeffs:?} reached distance {max_dist:e} at n = {n}, not below {epsilon}")]
    VerificationFailure { coeffs: Vec<i64>, max_dist: f64, n: usize, epsilon: f64 },
    #[error("|det M| = {det:e} is below 2^(-P/2); the roof vector is degenerate")]
    Singularity { det: f64 },
    #[error("fit failed: {0}")]
    Fit(String),
}
