use rand::Rng;

use crate::error::{contract, Result};
use crate::kernels::sym_eig_small;
use crate::oracle::VmvOracle;
use crate::rng;
use crate::{Mode, Verdict};

/// `m = ⌈kappa/ε⌉`, capped at `d`.
pub fn nonadaptive_sketch_size(eps: f64, kappa: f64, d: usize) -> usize {
    ((kappa / eps).ceil() as usize).clamp(1, d)
}

/// One-sided non-adaptive `(ε, ℓ1)` tester.
///
/// Each of `reps` independent repetitions asks for all `m(m+1)/2` entries of
/// `GᵀAG` (`m = ⌈kappa/ε⌉`, the query vectors fixed in advance) and rejects
/// if the sketch has a negative eigenvalue beyond rounding level
/// (`-1e-10·max|Sᵢⱼ|`), returning `Gu` as witness.
pub fn nonadaptive_l1_tester<R: Rng + ?Sized>(
    op: &dyn VmvOracle,
    eps: f64,
    kappa: f64,
    reps: usize,
    rng: &mut R,
) -> Result<Verdict> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(contract("eps must lie in (0, 1)"));
    }
    if reps == 0 || !(kappa > 0.0) {
        return Err(contract("need kappa > 0 and at least one repetition"));
    }
    let before = op.vmv_queries();
    let m = nonadaptive_sketch_size(eps, kappa, op.dim());
    let sketches: Vec<_> = (0..reps).map(|_| rng::gaussian_matrix(rng, op.dim(), m, 1.0)).collect();
    for g in &sketches {
        let s = op.sketch_gram(g)?;
        let eig = sym_eig_small(&s)?;
        if eig.min() < -1e-10 * s.amax() {
            let w = g * eig.min_vector();
            return Ok(Verdict::reject(Mode::OneSided, Some(w), op.vmv_queries() - before));
        }
    }
    Ok(Verdict::accept(Mode::OneSided, op.vmv_queries() - before))
}
