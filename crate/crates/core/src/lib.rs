#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Auditing binary linear classifiers released under Gaussian output
//! perturbation: calibration, accuracy and fairness bounds, Monte-Carlo
//! validation and data utilities.

pub mod cli;
pub mod data;
pub mod error;
pub mod fairness;
pub mod linmodel;
pub mod montecarlo;
pub mod numerics;
pub mod privacy;
pub mod rng;

pub use error::{Error, Result};

/// Version of every JSON document the library and CLI emit.
pub const SCHEMA_VERSION: u32 = 1;
