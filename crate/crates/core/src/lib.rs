#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod bernoulli;
pub mod cli;
pub mod ekspansion;
pub mod hp;
pub mod lattice;
pub mod matrix;
pub mod spectral;
pub mod subst;
