use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};

use super::{mirror_upper, MvOracle, VmvOracle};
use crate::error::{check_dim, contract, Result};

/// An operator whose queries are simulated by queries to a parent.
///
/// For `B = GᵀAG`, `xᵀBy = (Gx)ᵀA(Gy)` is a single query to `A`. The
/// compressed matrix is precomputed (uncharged) so the simulation costs
/// `O(m²)` per query, and every answered query charges exactly one query to
/// the parent. The affine form `c·GᵀAG + s·I` is covered too, since the
/// `s·xᵀy` term needs no query.
pub struct VirtualOperator<'a> {
    parent: &'a dyn VmvOracle,
    hidden: DMatrix<f64>,
    pullback: DMatrix<f64>,
    count: AtomicU64,
}

impl<'a> VirtualOperator<'a> {
    /// `GᵀAG` for a `d x m` matrix `G`.
    pub fn congruence(parent: &'a dyn VmvOracle, g: DMatrix<f64>) -> Result<Self> {
        Self::affine(parent, g, 1.0, 0.0)
    }

    /// `scale·GᵀAG + shift·I`.
    pub fn affine(parent: &'a dyn VmvOracle, g: DMatrix<f64>, scale: f64, shift: f64) -> Result<Self> {
        check_dim(parent.dim(), g.nrows())?;
        if !scale.is_finite() || !shift.is_finite() {
            return Err(contract("affine coefficients must be finite"));
        }
        let mut hidden = parent.congruence_uncounted(&g) * scale;
        for i in 0..hidden.nrows() {
            hidden[(i, i)] += shift;
        }
        Ok(Self { parent, hidden, pullback: g, count: AtomicU64::new(0) })
    }

    /// Maps a vector of this operator's space into the parent's: `w ↦ Gw`.
    /// A witness `wᵀBw < 0` becomes `(Gw)ᵀA(Gw) < 0` when `shift = 0`.
    pub fn pullback(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.pullback * w
    }

    pub fn sketch_matrix(&self) -> &DMatrix<f64> {
        &self.pullback
    }

    /// The simulated matrix. Ground truth for tests, not a query.
    pub fn dense(&self) -> &DMatrix<f64> {
        &self.hidden
    }
}

impl VmvOracle for VirtualOperator<'_> {
    fn dim(&self) -> usize {
        self.hidden.nrows()
    }

    fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), y.len())?;
        self.charge_vmv(1);
        Ok(x.dot(&(&self.hidden * y)))
    }

    fn sketch_block(&self, l: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), l.nrows())?;
        check_dim(self.dim(), r.nrows())?;
        self.charge_vmv((l.ncols() * r.ncols()) as u64);
        Ok(l.tr_mul(&(&self.hidden * r)))
    }

    fn sketch_gram(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), g.nrows())?;
        let k = g.ncols() as u64;
        self.charge_vmv(k * (k + 1) / 2);
        Ok(self.congruence_uncounted(g))
    }

    fn vmv_queries(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    fn charge_vmv(&self, n: u64) {
        self.count.fetch_add(n, Ordering::Relaxed);
        self.parent.charge_vmv(n);
    }

    fn congruence_uncounted(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        mirror_upper(g.tr_mul(&(&self.hidden * g)))
    }
}

/// `A^q` in the matrix-vector model: each product costs `q` queries to `A`.
pub struct PowerOperator<'a> {
    base: &'a dyn MvOracle,
    power: u32,
}

impl<'a> PowerOperator<'a> {
    pub fn new(base: &'a dyn MvOracle, power: u32) -> Result<Self> {
        if power == 0 {
            return Err(contract("power must be at least 1"));
        }
        Ok(Self { base, power })
    }

    pub fn power(&self) -> u32 {
        self.power
    }
}

impl MvOracle for PowerOperator<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn mat_vec(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let mut out = self.base.mat_vec(v)?;
        for _ in 1..self.power {
            out = self.base.mat_vec(&out)?;
        }
        Ok(out)
    }

    fn mat_mat(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut out = self.base.mat_mat(g)?;
        for _ in 1..self.power {
            out = self.base.mat_mat(&out)?;
        }
        Ok(out)
    }

    /// Queries charged to the base operator.
    fn mv_queries(&self) -> u64 {
        self.base.mv_queries()
    }
}
