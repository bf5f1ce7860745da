//! Erdős–Kahane machinery: vector digit expansions in base A, bad-set predicates,
//! rate functions and the scalar expansion of powers of a Salem number.

mod predicates;
mod rates;
mod scalar;
mod vector;

pub use predicates::{bad_set_predicates, scales, BadSet};
pub use rates::{
    fit_logstar_envelope, glue_implication, k_l, klogk_fact, logstar, logstar_comparison_holds, logstar_tower, psi,
    psi_power_sides, r0_exceeds, r0_tower, rate_h, rate_h_tower, t_l, LogstarFit, RateParams,
};
pub use scalar::{
    calibrate_c1, calibrate_c2, delta1, garsia_coefficient_check, grid_weights, salem_sum_bound, scalar_ek, select_l,
    select_l_raw, sum_of_squares, FieldWeight, GarsiaCheck, PowerTable, ScalarEkTrace, SumBound, Weight,
};
pub use vector::{
    digit_polynomial_residual, ek_expand, reconstruction_error, remainder_norms, residual_gap, EkStep, EkTrace,
    ResidualGap, TraceChecks,
};

use crate::hp::PrecisionError;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EkError {
    #[error(transparent)]
    Precision(#[from] PrecisionError),
    #[error("step {step}: {msg}")]
    Certification { step: usize, msg: String },
    #[error("denominator B^-1 - C1 alpha^-n = {value:e} is not positive; n is too small")]
    Denominator { value: f64 },
    #[error("operation needs a Salem number: {0}")]
    NotSalem(String),
    #[error("trace has {len} steps but index {needed} is required")]
    TraceTooShort { needed: String, len: usize },
    #[error("outside the domain: {0}")]
    Domain(String),
    #[error("{needed} steps exceed the budget of {budget}")]
    Budget { needed: String, budget: u64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}
