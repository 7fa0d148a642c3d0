use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{contract, Result};
use crate::kernels::{frobenius_estimate, sym_eig_small, trace_estimate};
use crate::oracle::VmvOracle;
use crate::rng;
use crate::{Mode, Verdict};

/// Failure probability allowed for the Frobenius estimate `β`.
const BETA_FAIL: f64 = 0.01;

/// Constants of the bilinear sketch tester.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SketchConfig {
    /// `k = ⌈kappa·ε⁻²·ln²(max(e, 1/ε))⌉`.
    pub kappa: f64,
    /// Accept iff `γ <= c_psd` (and the sketch is PSD).
    pub c_psd: f64,
}

impl SketchConfig {
    pub const DEFAULT_KAPPA: f64 = 4.0;
    pub const DEFAULT_C_PSD: f64 = 0.47;
}

impl Default for SketchConfig {
    fn default() -> Self {
        Self { kappa: Self::DEFAULT_KAPPA, c_psd: Self::DEFAULT_C_PSD }
    }
}

/// Sketch dimension for accuracy `eps`, before capping at `d`.
pub fn sketch_size(eps: f64, kappa: f64) -> usize {
    let l = (1.0 / eps).ln().max(1.0);
    (kappa * l * l / (eps * eps)).ceil().max(1.0) as usize
}

/// `ln k`, floored at 1 so that `k <= 2` does not divide by zero.
pub fn log_factor(k: usize) -> f64 {
    (k as f64).ln().max(1.0)
}

/// `S = GᵀAG` for a Gaussian `d x k` matrix `G`, with the side estimates
/// `α ≈ Tr(A)` and `β ≈ ‖A‖_F` and the statistic
/// `γ = (α - λ_min(S)) / (β·√k·ln k)`.
#[derive(Debug, Clone)]
pub struct SketchState {
    pub k: usize,
    pub g: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda_min: f64,
    /// Unit eigenvector of `S` for `lambda_min`.
    pub min_vector: nalgebra::DVector<f64>,
    pub queries: u64,
}

/// Queries the `k(k+1)/2` distinct entries of `GᵀAG`, then estimates
/// `α` and `β` with independent randomness.
pub fn build_sketch<R: Rng + ?Sized>(op: &dyn VmvOracle, k: usize, rng: &mut R) -> Result<SketchState> {
    if k == 0 {
        return Err(contract("sketch dimension must be at least 1"));
    }
    let before = op.vmv_queries();
    let g = rng::gaussian_matrix(rng, op.dim(), k, 1.0);
    let s = op.sketch_gram(&g)?;
    let alpha = trace_estimate(op, rng)?.value;
    let beta = frobenius_estimate(op, BETA_FAIL, rng)?.value;
    let eig = sym_eig_small(&s)?;
    let lambda_min = eig.min();
    let gamma = if beta > 0.0 { (alpha - lambda_min) / (beta * (k as f64).sqrt() * log_factor(k)) } else { 0.0 };
    Ok(SketchState {
        k,
        g,
        s,
        alpha,
        beta,
        gamma,
        lambda_min,
        min_vector: eig.min_vector(),
        queries: op.vmv_queries() - before,
    })
}

/// Two-sided `(ε, ℓ2)` tester.
///
/// Rejects when the sketch itself is not PSD (with witness `Gu` for the
/// bottom eigenvector `u`) or when `γ > c_psd`. If the sketch size reaches
/// `d`, `G` is invertible and the PSD check alone is exact, so `γ` is only
/// reported, not used.
pub fn bilinear_sketch_tester<R: Rng + ?Sized>(
    op: &dyn VmvOracle,
    eps: f64,
    cfg: &SketchConfig,
    rng: &mut R,
) -> Result<Verdict> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(contract("eps must lie in (0, 1)"));
    }
    let before = op.vmv_queries();
    let d = op.dim();
    let k = sketch_size(eps, cfg.kappa).min(d);
    let state = build_sketch(op, k, rng)?;
    let queries = op.vmv_queries() - before;
    if state.beta == 0.0 {
        let mut v = Verdict::accept(Mode::TwoSided, queries);
        v.statistic = Some(0.0);
        return Ok(v);
    }
    let scale = state.s.amax().max(f64::MIN_POSITIVE);
    let mut verdict = if state.lambda_min < -1e-10 * scale {
        Verdict::reject(Mode::TwoSided, Some(&state.g * &state.min_vector), queries)
    } else if k < d && state.gamma > cfg.c_psd {
        Verdict::reject(Mode::TwoSided, None, queries)
    } else {
        Verdict::accept(Mode::TwoSided, queries)
    };
    verdict.statistic = Some(state.gamma);
    Ok(verdict)
}
