use rand::Rng;

use super::oja::{oja_l1_tester, OjaConfig};
use super::sketch::{log_factor, sketch_size, SketchConfig};
use crate::error::{contract, Result};
use crate::kernels::{frobenius_estimate, trace_estimate};
use crate::oracle::{VirtualOperator, VmvOracle};
use crate::rng;
use crate::{Mode, Verdict};

/// Constants of [`adaptive_l2_tester`].
#[derive(Debug, Clone, PartialEq)]
pub struct L2Config {
    pub sketch: SketchConfig,
    /// Expected distance `C_far - c_psd` between the far-side values of `γ`
    /// and the threshold; sets the accuracy the inner tester works at.
    pub gap: f64,
    /// Gaussian quadratic-form probes made up front.
    pub probes: usize,
    /// Repetitions of the inner Oja tester.
    pub amplification: usize,
}

impl Default for L2Config {
    fn default() -> Self {
        Self { sketch: SketchConfig::default(), gap: 0.5, probes: 10, amplification: 3 }
    }
}

/// Two-sided adaptive `(ε, ℓ2)` tester.
///
/// After a few direct probes (a negative `xᵀAx` rejects at once) it never
/// reads the sketch `S = GᵀAG`. Instead it runs the Oja tester on
///
/// `Γ = (S - αI)/(β·√k·ln k) + c_psd·I`,
///
/// whose smallest eigenvalue is `c_psd - γ`: non-negative exactly when the
/// sketch tester would accept, about `-gap` on far inputs. Every query to
/// `Γ` is one query to `A`.
pub fn adaptive_l2_tester<R: Rng + ?Sized>(
    op: &dyn VmvOracle,
    eps: f64,
    cfg: &L2Config,
    rng: &mut R,
) -> Result<Verdict> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(contract("eps must lie in (0, 1)"));
    }
    let before = op.vmv_queries();
    let d = op.dim();
    for _ in 0..cfg.probes {
        let x = rng::gaussian_vector(rng, d);
        if op.quad_form(&x)? < 0.0 {
            return Ok(Verdict::reject(Mode::TwoSided, Some(x), op.vmv_queries() - before));
        }
    }
    let k = sketch_size(eps, cfg.sketch.kappa).min(d);
    let alpha = trace_estimate(op, rng)?.value;
    let beta = frobenius_estimate(op, 0.01, rng)?.value;
    if beta == 0.0 {
        return Ok(Verdict::accept(Mode::TwoSided, op.vmv_queries() - before));
    }
    let denom = beta * (k as f64).sqrt() * log_factor(k);
    let shift = cfg.sketch.c_psd;
    let g = rng::gaussian_matrix(rng, d, k, 1.0);
    let gamma_op = VirtualOperator::affine(op, g, 1.0 / denom, shift - alpha / denom)?;
    // ‖Γ‖₁ is at most about k·(shift + 2/ln k) while λ_min(Γ) ≈ -gap on far inputs.
    let eps_gamma = (cfg.gap / (k as f64 * (shift + 2.0 / log_factor(k)))).min(0.5);
    let oja = OjaConfig { amplification: cfg.amplification, ..OjaConfig::for_eps(eps_gamma) };
    let inner = oja_l1_tester(&gamma_op, eps_gamma, &oja, rng)?;
    let queries = op.vmv_queries() - before;
    Ok(if inner.is_psd { Verdict::accept(Mode::TwoSided, queries) } else { Verdict::reject(Mode::TwoSided, None, queries) })
}
