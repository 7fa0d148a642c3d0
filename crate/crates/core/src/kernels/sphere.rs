use nalgebra::DMatrix;

use super::linalg::sym_eigenvalues;
use crate::error::{contract, Result};

/// `(E[u₁⁴], E[u₁²u₂²])` for `u` uniform on the unit sphere in `R^d`:
/// `(3/(d(d+2)), 1/(d(d+2)))`.
pub fn sphere_moments(d: usize) -> Result<(f64, f64)> {
    if d < 2 {
        return Err(contract("sphere moments need d >= 2"));
    }
    let n = (d * (d + 2)) as f64;
    Ok((3.0 / n, 1.0 / n))
}

/// `Var(uᵀMu)` for `u` uniform on the sphere, in closed form:
/// `2/(d+2) · (mean(λ²) - mean(λ)²)` over the eigenvalues of `M`.
pub fn sphere_quadform_variance_exact(m: &DMatrix<f64>) -> f64 {
    let eig = sym_eigenvalues(m);
    let d = eig.len() as f64;
    if eig.is_empty() {
        return 0.0;
    }
    let mean = eig.iter().sum::<f64>() / d;
    let mean_sq = eig.iter().map(|l| l * l).sum::<f64>() / d;
    2.0 / (d + 2.0) * (mean_sq - mean * mean)
}
