use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{contract, Result};
use crate::kernels::sym_eig_small;
use crate::oracle::{mirror_upper, MvOracle, PowerOperator};
use crate::rng;
use crate::{Mode, Verdict};

/// Orthonormal basis of a Krylov space and the compression of `A` onto it.
#[derive(Debug, Clone)]
pub struct KrylovSpace {
    /// `d x r` orthonormal basis, `r <= k + 1`.
    pub basis: DMatrix<f64>,
    /// `A·basis`, one product per query.
    pub products: DMatrix<f64>,
    /// `basisᵀ·A·basis`.
    pub projected: DMatrix<f64>,
    pub k: usize,
    /// Set when the space became invariant before reaching dimension `k + 1`.
    pub degenerate: bool,
}

/// Builds `span{g, Ag, …, Aᵏg}` for Gaussian `g`.
///
/// Lanczos-style: `A` is applied to the newest orthonormal basis vector
/// rather than to the raw power `Aʲg`, which spans the same space without
/// the ill-conditioning. The next vector is orthogonalized twice against the
/// whole basis. `k + 1` queries, the last one supplying `A` on the last basis
/// vector so the projection needs no further queries. A residual below
/// `1e-10` of the product's norm means an invariant subspace was hit; the
/// space then stops early and is flagged.
pub fn build_krylov<R: Rng + ?Sized>(op: &dyn MvOracle, k: usize, rng: &mut R) -> Result<KrylovSpace> {
    let d = op.dim();
    if k + 1 > d {
        return Err(contract(format!("Krylov degree {k} needs k + 1 <= d = {d}")));
    }
    let g = rng::gaussian_vector(rng, d);
    let mut basis: Vec<DVector<f64>> = vec![&g / g.norm()];
    let mut products: Vec<DVector<f64>> = Vec::with_capacity(k + 1);
    let mut degenerate = false;
    for j in 0..=k {
        let w = op.mat_vec(&basis[j])?;
        products.push(w.clone());
        if j == k {
            break;
        }
        let mut r = w;
        let size = r.norm();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&r);
                r.axpy(-c, b, 1.0);
            }
        }
        let n = r.norm();
        if n <= 1e-10 * size || n == 0.0 {
            degenerate = true;
            break;
        }
        basis.push(r / n);
    }
    let basis = DMatrix::from_columns(&basis);
    let products = DMatrix::from_columns(&products);
    let projected = mirror_upper(basis.tr_mul(&products));
    Ok(KrylovSpace { basis, products, projected, k, degenerate })
}

/// How the tester handles `p > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KrylovMode {
    /// Degree scaled by an extra `log₂ d`.
    LogD,
    /// Run the `p = 1` tester on `A^q`, `q` the smallest odd integer `>= p`,
    /// at accuracy `ε^q`. Each product costs `q` queries.
    OddPower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovConfig {
    pub kappa: f64,
    /// Independent starting vectors; any rejection rejects.
    pub reps: usize,
    pub mode: KrylovMode,
}

impl KrylovConfig {
    pub const DEFAULT_KAPPA: f64 = 1.0;
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self { kappa: Self::DEFAULT_KAPPA, reps: 1, mode: KrylovMode::LogD }
    }
}

/// `k = ⌈kappa·ε^(-p/(2p+1))·ln(1/ε)⌉`, times `log₂ d` when `p > 1`.
pub fn krylov_size(eps: f64, p: f64, d: usize, kappa: f64) -> usize {
    let exponent = if p.is_infinite() { 0.5 } else { p / (2.0 * p + 1.0) };
    let mut k = kappa * eps.powf(-exponent) * (1.0 / eps).ln().max(1.0);
    if p > 1.0 {
        k *= (d as f64).log2().max(1.0);
    }
    k.ceil().max(1.0) as usize
}

/// One-sided adaptive `(ε, ℓp)` tester in the matrix-vector model.
///
/// Rejects iff `λ_min(ΠAΠ) < -1e-10·scale` for the Krylov projection `Π`,
/// where `scale` is `norm_estimate` if given and otherwise the largest
/// eigenvalue magnitude of the projection. The witness is the Ritz vector of
/// the smallest Ritz value.
pub fn krylov_tester<R: Rng + ?Sized>(
    op: &dyn MvOracle,
    eps: f64,
    p: f64,
    norm_estimate: Option<f64>,
    cfg: &KrylovConfig,
    rng: &mut R,
) -> Result<Verdict> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(contract("eps must lie in (0, 1)"));
    }
    if !(p >= 1.0) || cfg.reps == 0 {
        return Err(contract("need p >= 1 and at least one repetition"));
    }
    let before = op.mv_queries();
    let d = op.dim();
    if cfg.mode == KrylovMode::OddPower && p > 1.0 {
        let q = odd_power(p);
        let power = PowerOperator::new(op, q)?;
        let inner_cfg = KrylovConfig { mode: KrylovMode::LogD, ..*cfg };
        let inner = krylov_tester(&power, eps.powi(q as i32), 1.0, norm_estimate.map(|n| n.powi(q as i32)), &inner_cfg, rng)?;
        let witness = match inner.witness {
            // vᵀA^q v = wᵀAw for w = A^((q-1)/2) v
            Some(v) if q > 1 => Some(PowerOperator::new(op, (q - 1) / 2)?.mat_vec(&v)?),
            other => other,
        };
        return Ok(Verdict { witness, queries_used: op.mv_queries() - before, ..inner });
    }
    let k = krylov_size(eps, p, d, cfg.kappa).min(d.saturating_sub(1));
    for _ in 0..cfg.reps {
        let space = build_krylov(op, k, rng)?;
        let eig = sym_eig_small(&space.projected)?;
        let scale = norm_estimate.unwrap_or_else(|| eig.values.amax());
        if eig.min() < -1e-10 * scale {
            let w = &space.basis * eig.min_vector();
            return Ok(Verdict::reject(Mode::OneSided, Some(w), op.mv_queries() - before));
        }
    }
    Ok(Verdict::accept(Mode::OneSided, op.mv_queries() - before))
}

fn odd_power(p: f64) -> u32 {
    let q = p.ceil() as u32;
    if q % 2 == 0 {
        q + 1
    } else {
        q
    }
}
