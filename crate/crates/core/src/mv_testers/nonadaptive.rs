use rand::Rng;

use crate::error::{contract, Result};
use crate::kernels::sym_eig_small;
use crate::oracle::{mirror_upper, MvOracle};
use crate::rng;
use crate::{Mode, Verdict};

/// `m = ⌈kappa·d^(1-1/p)/ε⌉`, capped at `d`.
pub fn nonadaptive_mv_size(eps: f64, p: f64, d: usize, kappa: f64) -> usize {
    let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let m = kappa * (d as f64).powf(1.0 - inv_p) / eps;
    (m.ceil() as usize).clamp(1, d)
}

/// One-sided non-adaptive `(ε, ℓp)` tester in the matrix-vector model.
///
/// Each repetition spends `m` queries on `AG` and tests the sketch
/// `Gᵀ(AG)` for a negative eigenvalue beyond `-1e-10·max|Sᵢⱼ|`.
pub fn nonadaptive_mv_tester<R: Rng + ?Sized>(
    op: &dyn MvOracle,
    eps: f64,
    p: f64,
    kappa: f64,
    reps: usize,
    rng: &mut R,
) -> Result<Verdict> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(contract("eps must lie in (0, 1)"));
    }
    if !(p >= 1.0) || reps == 0 || !(kappa > 0.0) {
        return Err(contract("need p >= 1, kappa > 0 and at least one repetition"));
    }
    let before = op.mv_queries();
    let d = op.dim();
    let m = nonadaptive_mv_size(eps, p, d, kappa);
    let sketches: Vec<_> = (0..reps).map(|_| rng::gaussian_matrix(rng, d, m, 1.0)).collect();
    for g in &sketches {
        let ag = op.mat_mat(g)?;
        let s = mirror_upper(g.tr_mul(&ag));
        let eig = sym_eig_small(&s)?;
        if eig.min() < -1e-10 * s.amax() {
            let w = g * eig.min_vector();
            return Ok(Verdict::reject(Mode::OneSided, Some(w), op.mv_queries() - before));
        }
    }
    Ok(Verdict::accept(Mode::OneSided, op.mv_queries() - before))
}
