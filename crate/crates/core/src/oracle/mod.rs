//! Query-counted access to a hidden symmetric matrix.
//!
//! Testers never see the matrix. They go through [`VmvOracle`] (bilinear
//! forms `xᵀAy`) or [`MvOracle`] (products `Av`), and every call is tallied
//! on an atomic counter so the harness can compare reported query counts
//! against what was actually spent.
//!
//! Batched methods such as [`VmvOracle::sketch_block`] exist only to keep
//! the simulation fast; they charge exactly as many queries as the loop of
//! single queries they replace.

mod descriptor;
mod generators;
mod virtual_op;

pub use descriptor::{far_magnitude, Bulk, InstanceDescriptor};
pub use generators::{gen_rotated_diag, gen_spiked_sym, gen_wishart, haar_columns, SpectrumInstance};
pub use virtual_op::{PowerOperator, VirtualOperator};

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, contract, Result};

/// Access through vector-matrix-vector queries.
pub trait VmvOracle {
    fn dim(&self) -> usize;

    /// `xᵀAy`, one query.
    fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64>;

    /// `xᵀAx`, one query.
    fn quad_form(&self, x: &DVector<f64>) -> Result<f64> {
        self.bilinear(x, x)
    }

    /// `LᵀAR`, charged `cols(L) * cols(R)` queries.
    fn sketch_block(&self, l: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>>;

    /// `GᵀAG`, charged `k(k+1)/2` queries for `k = cols(G)` since only the
    /// upper triangle has to be asked for.
    fn sketch_gram(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>>;

    /// Queries charged so far.
    fn vmv_queries(&self) -> u64;

    /// Adds `n` queries to the tally. Used by operators that simulate their
    /// own queries through this one.
    fn charge_vmv(&self, n: u64);

    /// `GᵀAG` without charging anything. Only for building virtual
    /// operators, which then charge one query here per query they answer.
    fn congruence_uncounted(&self, g: &DMatrix<f64>) -> DMatrix<f64>;
}

/// Access through matrix-vector queries.
pub trait MvOracle {
    fn dim(&self) -> usize;

    /// `Av`, one query.
    fn mat_vec(&self, v: &DVector<f64>) -> Result<DVector<f64>>;

    /// `AG`, charged `cols(G)` queries.
    fn mat_mat(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>>;

    fn mv_queries(&self) -> u64;
}

/// Snapshot of both counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QueryCounts {
    pub mv: u64,
    pub vmv: u64,
}

impl std::ops::Sub for QueryCounts {
    type Output = QueryCounts;

    fn sub(self, rhs: Self) -> Self {
        QueryCounts { mv: self.mv - rhs.mv, vmv: self.vmv - rhs.vmv }
    }
}

/// A hidden dense symmetric matrix exposed only through counted queries.
#[derive(Debug)]
pub struct SymmetricOperator {
    matrix: DMatrix<f64>,
    spectrum: Option<Vec<f64>>,
    seed: u64,
    mv: AtomicU64,
    vmv: AtomicU64,
}

impl SymmetricOperator {
    /// Wraps a dense matrix. The input must be symmetric to within `1e-9`
    /// relative to its largest entry; the stored copy is exactly symmetric.
    pub fn from_dense(matrix: DMatrix<f64>, seed: u64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(contract("operator matrix must be square"));
        }
        let scale = matrix.amax().max(1.0);
        let d = matrix.nrows();
        for j in 0..d {
            for i in 0..j {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-9 * scale {
                    return Err(contract(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self::from_symmetric_parts(mirror_upper(matrix), None, seed))
    }

    pub(crate) fn from_symmetric_parts(
        matrix: DMatrix<f64>,
        spectrum: Option<Vec<f64>>,
        seed: u64,
    ) -> Self {
        Self { matrix, spectrum, seed, mv: AtomicU64::new(0), vmv: AtomicU64::new(0) }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_symmetric_parts(DMatrix::identity(d, d), Some(vec![1.0; d]), 0)
    }

    pub fn zeros(d: usize) -> Self {
        Self::from_symmetric_parts(DMatrix::zeros(d, d), Some(vec![0.0; d]), 0)
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut spectrum = values.to_vec();
        spectrum.sort_by(f64::total_cmp);
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(values));
        Self::from_symmetric_parts(m, Some(spectrum), 0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The hidden matrix. Ground truth for tests and the harness; reading it
    /// is not a query.
    pub fn dense(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Eigenvalues in ascending order: the spectrum the generator prescribed
    /// when there is one, otherwise a full eigendecomposition.
    pub fn eigenvalues(&self) -> Vec<f64> {
        match &self.spectrum {
            Some(s) => s.clone(),
            None => crate::kernels::sym_eigenvalues(&self.matrix),
        }
    }

    /// Eigenvalues prescribed at construction, if any.
    pub fn known_spectrum(&self) -> Option<&[f64]> {
        self.spectrum.as_deref()
    }

    pub fn counts(&self) -> QueryCounts {
        QueryCounts { mv: self.mv.load(Ordering::Relaxed), vmv: self.vmv.load(Ordering::Relaxed) }
    }

    /// `xᵀAx` without touching the counters, for re-checking witnesses.
    pub fn quad_form_uncounted(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.matrix * x))
    }

    /// `A + tI` as a new operator with zeroed counters.
    pub fn shifted(&self, t: f64) -> Self {
        let mut m = self.matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += t;
        }
        let spectrum = self.spectrum.as_ref().map(|s| s.iter().map(|l| l + t).collect());
        Self::from_symmetric_parts(m, spectrum, self.seed)
    }

    /// `cA` as a new operator with zeroed counters.
    pub fn scaled(&self, c: f64) -> Self {
        let spectrum = self.spectrum.as_ref().map(|s| {
            let mut v: Vec<f64> = s.iter().map(|l| c * l).collect();
            v.sort_by(f64::total_cmp);
            v
        });
        Self::from_symmetric_parts(&self.matrix * c, spectrum, self.seed)
    }

    /// Copy of the operator with zeroed counters.
    pub fn fresh_copy(&self) -> Self {
        Self::from_symmetric_parts(self.matrix.clone(), self.spectrum.clone(), self.seed)
    }
}

impl VmvOracle for SymmetricOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        check_dim(self.matrix.nrows(), x.len())?;
        check_dim(self.matrix.nrows(), y.len())?;
        self.vmv.fetch_add(1, Ordering::Relaxed);
        Ok(x.dot(&(&self.matrix * y)))
    }

    fn sketch_block(&self, l: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.matrix.nrows(), l.nrows())?;
        check_dim(self.matrix.nrows(), r.nrows())?;
        self.charge_vmv((l.ncols() * r.ncols()) as u64);
        Ok(l.tr_mul(&(&self.matrix * r)))
    }

    fn sketch_gram(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.matrix.nrows(), g.nrows())?;
        let k = g.ncols() as u64;
        self.charge_vmv(k * (k + 1) / 2);
        Ok(self.congruence_uncounted(g))
    }

    fn vmv_queries(&self) -> u64 {
        self.vmv.load(Ordering::Relaxed)
    }

    fn charge_vmv(&self, n: u64) {
        self.vmv.fetch_add(n, Ordering::Relaxed);
    }

    fn congruence_uncounted(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        mirror_upper(g.tr_mul(&(&self.matrix * g)))
    }
}

impl MvOracle for SymmetricOperator {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn mat_vec(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.matrix.nrows(), v.len())?;
        self.mv.fetch_add(1, Ordering::Relaxed);
        Ok(&self.matrix * v)
    }

    fn mat_mat(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.matrix.nrows(), g.nrows())?;
        self.mv.fetch_add(g.ncols() as u64, Ordering::Relaxed);
        Ok(&self.matrix * g)
    }

    fn mv_queries(&self) -> u64 {
        self.mv.load(Ordering::Relaxed)
    }
}

/// Copies the upper triangle onto the lower one so the result is exactly
/// symmetric.
pub(crate) fn mirror_upper(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            m[(j, i)] = m[(i, j)];
        }
    }
    m
}
