//! Dense linear algebra helpers, the Chebyshev threshold polynomial and the
//! randomized estimators shared by the testers.

mod chebyshev;
mod estimators;
mod linalg;
mod sphere;

pub use chebyshev::ThresholdPolynomial;
pub(crate) use estimators::median;
pub use estimators::{
    frobenius_estimate, hutchinson_trace, schatten1_scale_estimate, trace_estimate, EstimateTarget,
    EstimatorResult, FROBENIUS_BLOCK, TRACE_GROUPS, TRACE_GROUP_SIZE,
};
pub use linalg::{orthonormalize, schatten_norm, sym_eig_small, sym_eigenvalues, SymEig};
pub use sphere::{sphere_moments, sphere_quadform_variance_exact};
