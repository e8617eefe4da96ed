//! Condition numbers of computational problems: worst-case, Frobenius,
//! p-th average over random perturbation directions, componentwise and
//! relative variants, with sphere-sampling and finite-difference checks.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod condcore;
pub mod ensembles;
pub mod error;
pub mod numlin;
pub mod problems;
pub mod sampling;

pub use condcore::{ConditionMap, KappaReport, MomentEstimate, MomentMode};
pub use error::{Error, Result};
