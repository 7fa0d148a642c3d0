//! Property testers for positive semidefiniteness in the matrix-vector and
//! vector-matrix-vector query models, a sketch-based signed spectrum
//! estimator, and the experiment harness that checks them against exact
//! eigendecompositions.
//!
//! A hidden symmetric matrix is only reachable through counted queries
//! ([`oracle`]). Testers return a [`Verdict`] with the number of queries
//! they spent and, for one-sided testers, a witness `w` with `wᵀAw < 0`
//! whenever they reject.

pub mod error;
pub mod harness;
pub mod kernels;
pub mod mv_testers;
pub mod oracle;
pub mod rng;
pub mod spectrum;
pub mod vmv_testers;

mod verdict;

pub use error::{Error, Result};
pub use verdict::{Mode, Verdict};
