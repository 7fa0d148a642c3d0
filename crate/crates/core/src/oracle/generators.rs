//! Synthetic instances: rotated diagonal spectra, Wishart matrices and the
//! spiked Gaussian block embedding.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{mirror_upper, SymmetricOperator};
use crate::error::{contract, Result};
use crate::rng;

/// Substream used by all generators, kept apart from the small stream ids
/// that callers tend to pick for their own draws.
const GENERATOR_STREAM: u64 = 0x6765_6e65_7261_7465;

/// A prescribed spectrum together with the seed of the random rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumInstance {
    pub eigenvalues: Vec<f64>,
    pub rotation_seed: u64,
}

impl SpectrumInstance {
    pub fn new(eigenvalues: Vec<f64>, rotation_seed: u64) -> Self {
        Self { eigenvalues, rotation_seed }
    }
}

/// First `r` columns of a Haar-distributed `d x d` orthogonal matrix.
///
/// QR of a Gaussian matrix with the signs of `diag(R)` moved into `Q`. The
/// first `r` columns of `Q` only depend on the first `r` Gaussian columns, so
/// the thin factorization gives the same distribution at a fraction of the
/// cost.
pub fn haar_columns(d: usize, r: usize, seed: u64) -> DMatrix<f64> {
    assert!(r <= d, "cannot draw {r} orthonormal columns in dimension {d}");
    if r == 0 {
        return DMatrix::zeros(d, 0);
    }
    let mut g = rng::stream(seed, GENERATOR_STREAM);
    let z = rng::gaussian_matrix(&mut g, d, r, 1.0);
    let qr = z.qr();
    let mut q = qr.q();
    let rr = qr.r();
    for j in 0..r {
        if rr[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `A = QDQᵀ` with `Q` Haar random.
///
/// The most frequent eigenvalue `c` is factored out as `cI`, so only the
/// columns of `Q` belonging to the remaining eigenvalues are drawn. Since the
/// columns of a Haar matrix are exchangeable this does not change the
/// distribution, and a spectrum with a single repeated value comes out as
/// exactly `cI`.
pub fn gen_rotated_diag(inst: &SpectrumInstance) -> Result<SymmetricOperator> {
    let d = inst.eigenvalues.len();
    if d == 0 {
        return Err(contract("spectrum must be non-empty"));
    }
    if inst.eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(contract("eigenvalues must be finite"));
    }
    let mut sorted = inst.eigenvalues.clone();
    sorted.sort_by(f64::total_cmp);
    let c = modal_value(&sorted);
    let rest: Vec<f64> = inst.eigenvalues.iter().copied().filter(|&l| l != c).collect();
    let q = haar_columns(d, rest.len(), inst.rotation_seed);
    let mut scaled = q.clone();
    for (j, l) in rest.iter().enumerate() {
        scaled.column_mut(j).scale_mut(l - c);
    }
    let mut a = scaled * q.transpose();
    for i in 0..d {
        a[(i, i)] += c;
    }
    Ok(SymmetricOperator::from_symmetric_parts(mirror_upper(a), Some(sorted), inst.rotation_seed))
}

/// `W = XXᵀ` with `X` a `d x d` matrix of `N(0, 1/d)` entries.
pub fn gen_wishart(d: usize, seed: u64) -> SymmetricOperator {
    let mut g = rng::stream(seed, GENERATOR_STREAM);
    let x = rng::gaussian_matrix(&mut g, d, d, 1.0 / (d as f64).sqrt());
    let w = &x * x.transpose();
    SymmetricOperator::from_symmetric_parts(mirror_upper(w), None, seed)
}

/// The `2d x 2d` matrix `[[0, M], [Mᵀ, 0]] + shift·I` with `M = G + s·uvᵀ`
/// and `G`, `u`, `v` standard Gaussian.
///
/// Its eigenvalues are `shift ± σᵢ(M)`.
pub fn gen_spiked_sym(d: usize, s: f64, shift: f64, seed: u64) -> SymmetricOperator {
    let mut g = rng::stream(seed, GENERATOR_STREAM);
    let gm = rng::gaussian_matrix(&mut g, d, d, 1.0);
    let u: DVector<f64> = rng::gaussian_vector(&mut g, d);
    let v: DVector<f64> = rng::gaussian_vector(&mut g, d);
    let m = gm + (&u * v.transpose()) * s;
    let mut a = DMatrix::zeros(2 * d, 2 * d);
    a.view_mut((0, d), (d, d)).copy_from(&m);
    a.view_mut((d, 0), (d, d)).copy_from(&m.transpose());
    for i in 0..2 * d {
        a[(i, i)] = shift;
    }
    SymmetricOperator::from_symmetric_parts(a, None, seed)
}

fn modal_value(sorted: &[f64]) -> f64 {
    let mut best = sorted[0];
    let mut best_run = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > best_run {
            best_run = j - i;
            best = sorted[i];
        }
        i = j;
    }
    best
}
