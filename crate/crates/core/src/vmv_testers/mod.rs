//! Testers in the vector-matrix-vector model.
//!
//! * [`oja_l1_tester`]: adaptive, one-sided, `(ε, ℓ1)`; Oja-style descent on
//!   the Rayleigh quotient after a Gaussian dimension reduction.
//! * [`bilinear_sketch_tester`]: non-adaptive, two-sided, `(ε, ℓ2)`; the
//!   `γ` statistic of a `k x k` bilinear sketch.
//! * [`adaptive_l2_tester`]: two-sided `(ε, ℓ2)`; runs the Oja tester on a
//!   shifted and rescaled sketch instead of reading all of it.
//! * [`nonadaptive_l1_tester`]: non-adaptive, one-sided, `(ε, ℓ1)`.

mod adaptive_l2;
mod nonadaptive;
mod oja;
mod sketch;

pub use adaptive_l2::{adaptive_l2_tester, L2Config};
pub use nonadaptive::{nonadaptive_l1_tester, nonadaptive_sketch_size};
pub use oja::{oja_l1_tester, oja_step, oja_step_with, run_oja, sketch_reduce, OjaConfig, OjaOutcome, OjaRun};
pub use sketch::{bilinear_sketch_tester, build_sketch, log_factor, sketch_size, SketchConfig, SketchState};

/// `ε·d^(1/p - 1)`: running an `(ε', ℓ1)` tester with this `ε'` tests
/// `(ε, ℓp)`, because `‖A‖_p >= d^(1/p - 1)·‖A‖₁`. `p = ∞` is allowed.
pub fn lp_to_l1_eps(eps: f64, p: f64, d: usize) -> f64 {
    let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
    eps * (d as f64).powf(inv_p - 1.0)
}
