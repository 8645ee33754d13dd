//! Multi-label classification with mixtures of conditional tree-structured
//! Bayesian networks (CTBNs).
//!
//! Each expert models `P(y | x)` as a directed forest over the labels whose
//! conditionals are L2-regularized logistic regressions. A softmax gate
//! mixes the experts. Training grows the mixture one expert at a time,
//! learning each new structure on instances the current mixture explains
//! poorly, and refits all parameters with EM. Prediction searches for the
//! most probable joint label vector.

// Negated float comparisons below are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod ctbn;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod inference;
pub mod logreg;
pub mod mixture;
pub mod optim;
pub mod structlearn;
pub mod synthetic;

pub use error::{Error, Result};
