use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{contract, Result};

/// Eigendecomposition of a small symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: DVector<f64>,
    /// Column `i` is the unit eigenvector for `values[i]`.
    pub vectors: DMatrix<f64>,
}

impl SymEig {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn min_vector(&self) -> DVector<f64> {
        self.vectors.column(0).into_owned()
    }
}

/// Full eigendecomposition, sorted ascending.
///
/// Fails if `m` is not square or not symmetric to within `1e-9` relative to
/// its largest entry.
pub fn sym_eig_small(m: &DMatrix<f64>) -> Result<SymEig> {
    check_symmetric(m)?;
    if m.nrows() == 0 {
        return Ok(SymEig { values: DVector::zeros(0), vectors: DMatrix::zeros(0, 0) });
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
    Ok(SymEig { values, vectors })
}

/// Eigenvalues only, ascending. The input is assumed symmetric; only the
/// lower triangle is read.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Schatten-`p` norm from eigenvalues; `p = f64::INFINITY` gives the
/// spectral norm.
pub fn schatten_norm(eigenvalues: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return eigenvalues.iter().fold(0.0, |m, l| m.max(l.abs()));
    }
    eigenvalues.iter().map(|l| l.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(contract("matrix must be square"));
    }
    let tol = 1e-9 * m.amax().max(1.0);
    for j in 0..m.ncols() {
        for i in 0..j {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return Err(contract(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Orthonormal basis of the span of `vectors` by modified Gram-Schmidt.
///
/// Each vector is projected twice against the basis built so far (the
/// second pass repairs the orthogonality lost in the first). A vector whose
/// residual norm falls below `tol` times its original norm is dropped.
pub fn orthonormalize(vectors: &[DVector<f64>], tol: f64) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let original = v.norm();
        if original == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
        }
        let n = w.norm();
        if n > tol * original {
            basis.push(w / n);
        }
    }
    basis
}
