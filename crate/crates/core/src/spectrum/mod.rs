//! Sketch-based estimates of `‖A_{k,±}‖_F²` and of the signed top-`k`
//! eigenvalues from vector-matrix-vector queries.
//!
//! One repetition draws a Gaussian `R` and two affine embeddings `S1`, `S2`,
//! queries `M1 = S1·A·R`, `M2 = S2·A·R` and `Q = S1·A·S2ᵀ`, and fits a PSD
//! rank-`k` `Y` to `M1·Y·M2ᵀ ≈ Q`. The fit cost approximates
//! `‖A - A_{k,+}‖_F²`, so `‖A‖_F²` minus the cost approximates
//! `‖A_{k,+}‖_F²`.

mod estimate;
mod fit;
mod guarantee;
mod sketch;

pub use estimate::{
    estimate_akplus_sq, pythagorean_split, top_eigs_signed, top_eigs_signed_adaptive,
    top_eigs_signed_adaptive_traced, AdaptiveRoundQueries, EigenEstimate, SpectrumConfig,
};
pub use guarantee::{check_signed_guarantee, GuaranteeCheck};
pub use fit::{psd_rank_diagnostics, psd_rank_k_fit, random_fit_problem, FitOptions, FitProblem, PsdFit};
pub use sketch::{
    affine_embedding, block_frobenius_sq, embed_rows, frobenius_sq, sketch_cols, SpectrumSketch,
};
