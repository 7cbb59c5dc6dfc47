//! Finite-difference laboratory for Schrodinger operators H = -Delta + V:
//! commutator positivity checks, regularized resolvents, and limiting
//! absorption sweeps near the threshold of the continuous spectrum.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod cli;
pub mod config;
pub mod error;
pub mod hypotheses;
pub mod lattice;
pub mod linalg;
pub mod normspace;
pub mod oracle;
pub mod potential;
pub mod report;
pub mod resolvent;

pub use error::{LabError, Result};
