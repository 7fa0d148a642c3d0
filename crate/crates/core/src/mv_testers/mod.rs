//! Testers in the matrix-vector model.
//!
//! [`krylov_tester`] is adaptive: it searches the Krylov space
//! `span{g, Ag, …, Aᵏg}` for a direction of negative curvature.
//! [`nonadaptive_mv_tester`] fixes its query vectors in advance and reads a
//! bilinear sketch off `m` products.

mod deflation;
mod krylov;
mod nonadaptive;

pub use deflation::{deflation_poly_certificate, DeflatedPolynomial};
pub use krylov::{build_krylov, krylov_size, krylov_tester, KrylovConfig, KrylovMode, KrylovSpace};
pub use nonadaptive::{nonadaptive_mv_size, nonadaptive_mv_tester};
