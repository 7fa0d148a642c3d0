use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::oracle::VmvOracle;
use crate::rng;

/// Block width of the bilinear Frobenius sketch.
pub const FROBENIUS_BLOCK: usize = 4;
/// Hutchinson samples per group in [`trace_estimate`].
pub const TRACE_GROUP_SIZE: usize = 32;
/// Groups whose median [`trace_estimate`] reports.
pub const TRACE_GROUPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateTarget {
    Trace,
    Frobenius,
    Schatten1Range,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorResult {
    pub value: f64,
    pub n_queries: u64,
    pub target: EstimateTarget,
}

/// Mean of `gᵀAg` over `n` standard Gaussian `g`; `n` queries.
pub fn hutchinson_trace<R: Rng + ?Sized>(op: &dyn VmvOracle, n: usize, rng: &mut R) -> Result<EstimatorResult> {
    if n == 0 {
        return Err(contract("need at least one Hutchinson sample"));
    }
    let before = op.vmv_queries();
    let mut sum = 0.0;
    for _ in 0..n {
        let g = rng::gaussian_vector(rng, op.dim());
        sum += op.quad_form(&g)?;
    }
    Ok(EstimatorResult { value: sum / n as f64, n_queries: op.vmv_queries() - before, target: EstimateTarget::Trace })
}

/// Median of [`TRACE_GROUPS`] Hutchinson means of [`TRACE_GROUP_SIZE`]
/// samples each. Each mean has standard deviation `sqrt(2/32)·‖A‖_F`, so the
/// median is within `‖A‖_F` of the trace with high probability.
pub fn trace_estimate<R: Rng + ?Sized>(op: &dyn VmvOracle, rng: &mut R) -> Result<EstimatorResult> {
    let before = op.vmv_queries();
    let mut means = Vec::with_capacity(TRACE_GROUPS);
    for _ in 0..TRACE_GROUPS {
        means.push(hutchinson_trace(op, TRACE_GROUP_SIZE, rng)?.value);
    }
    Ok(EstimatorResult {
        value: median(&mut means),
        n_queries: op.vmv_queries() - before,
        target: EstimateTarget::Trace,
    })
}

/// Estimate `β` of `‖A‖_F`, within a factor 2 with probability at least
/// `1 - eps_fail`.
///
/// Each repetition draws Gaussian `L`, `R` of width 4 and uses
/// `‖LᵀAR‖_F² / 16`, an unbiased estimate of `‖A‖_F²`; the median over
/// `⌈8·ln(1/eps_fail)⌉` repetitions is reported as its square root. A zero
/// operator gives exactly 0.
pub fn frobenius_estimate<R: Rng + ?Sized>(op: &dyn VmvOracle, eps_fail: f64, rng: &mut R) -> Result<EstimatorResult> {
    if !(eps_fail > 0.0 && eps_fail < 1.0) {
        return Err(contract("eps_fail must lie in (0, 1)"));
    }
    let before = op.vmv_queries();
    let reps = (8.0 * (1.0 / eps_fail).ln()).ceil().max(1.0) as usize;
    let d = op.dim();
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let l = rng::gaussian_matrix(rng, d, FROBENIUS_BLOCK, 1.0);
        let r = rng::gaussian_matrix(rng, d, FROBENIUS_BLOCK, 1.0);
        let b: DMatrix<f64> = op.sketch_block(&l, &r)?;
        samples.push(b.norm_squared() / (FROBENIUS_BLOCK * FROBENIUS_BLOCK) as f64);
    }
    Ok(EstimatorResult {
        value: median(&mut samples).sqrt(),
        n_queries: op.vmv_queries() - before,
        target: EstimateTarget::Frobenius,
    })
}

/// Interval `(‖Ag‖/(2d), d·‖Ag‖)` that contains `‖A‖₁` with constant
/// probability. `Ag` is read off with the `d` queries `eᵢᵀAg`.
pub fn schatten1_scale_estimate<R: Rng + ?Sized>(op: &dyn VmvOracle, rng: &mut R) -> Result<((f64, f64), u64)> {
    let before = op.vmv_queries();
    let d = op.dim();
    let g = DMatrix::from_column_slice(d, 1, rng::gaussian_vector(rng, d).as_slice());
    let ag = op.sketch_block(&DMatrix::identity(d, d), &g)?;
    let n = ag.norm();
    let df = d as f64;
    Ok(((n / (2.0 * df), df * n), op.vmv_queries() - before))
}

pub(crate) fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
