use nalgebra::DVector;
use rand::Rng;

use crate::error::{contract, Result};
use crate::kernels::schatten1_scale_estimate;
use crate::oracle::{VirtualOperator, VmvOracle};
use crate::rng;
use crate::{Mode, Verdict};

/// Parameters of [`oja_l1_tester`].
///
/// The step size at a scale guess `L` for `‖B‖₁` is `eta / L`, where `B` is
/// the reduced operator.
#[derive(Debug, Clone, PartialEq)]
pub struct OjaConfig {
    /// Step constant: `η = eta / L`.
    pub eta: f64,
    /// Iterations `N` per step-size scale.
    pub max_iters: usize,
    /// Number of scales run to completion before giving up. Scales that
    /// abort on an unstable step do not count.
    pub eta_scales: usize,
    /// Independent repetitions; any rejection rejects.
    pub amplification: usize,
    /// Reduced dimension `m = ⌈reduce / ε⌉`, capped at `d`.
    pub reduce: f64,
}

impl OjaConfig {
    pub const DEFAULT_ETA: f64 = 0.5;
    pub const DEFAULT_KAPPA_N: f64 = 1.0;
    pub const DEFAULT_REDUCE: f64 = 4.0;
    pub const DEFAULT_SCALES: usize = 2;
    pub const DEFAULT_AMPLIFICATION: usize = 20;

    /// Defaults for accuracy `eps`, with `N = ⌈κ_N/(eta·ε)·ln(1/ε)⌉`.
    pub fn for_eps(eps: f64) -> Self {
        Self::with_kappa(eps, Self::DEFAULT_KAPPA_N)
    }

    pub fn with_kappa(eps: f64, kappa_n: f64) -> Self {
        let eta = Self::DEFAULT_ETA;
        Self {
            eta,
            max_iters: iterations(eps, eta, kappa_n),
            eta_scales: Self::DEFAULT_SCALES,
            amplification: Self::DEFAULT_AMPLIFICATION,
            reduce: Self::DEFAULT_REDUCE,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(contract("eta must be positive"));
        }
        if self.max_iters == 0 || self.eta_scales == 0 || self.amplification == 0 {
            return Err(contract("max_iters, eta_scales and amplification must be at least 1"));
        }
        if !(self.reduce > 0.0) {
            return Err(contract("reduce must be positive"));
        }
        Ok(())
    }
}

fn iterations(eps: f64, eta: f64, kappa_n: f64) -> usize {
    (kappa_n / (eta * eps) * (1.0 / eps).ln().max(1.0)).ceil().max(1.0) as usize
}

/// One Oja step with a given direction: `x - η(gᵀAx)g`, one query.
/// Returns the new iterate and `gᵀAx`.
pub fn oja_step_with(
    op: &dyn VmvOracle,
    x: &DVector<f64>,
    eta: f64,
    g: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    let s = op.bilinear(g, x)?;
    let mut next = x.clone();
    next.axpy(-eta * s, g, 1.0);
    Ok((next, s))
}

/// [`oja_step_with`] with a fresh standard Gaussian direction.
pub fn oja_step<R: Rng + ?Sized>(
    op: &dyn VmvOracle,
    x: &DVector<f64>,
    eta: f64,
    rng: &mut R,
) -> Result<(DVector<f64>, f64)> {
    let g = rng::gaussian_vector(rng, op.dim());
    oja_step_with(op, x, eta, &g)
}

/// The `m`-dimensional operator `GᵀAG` with `G` of `N(0, 1/m)` entries.
/// Each of its queries is one query to `op`; [`VirtualOperator::pullback`]
/// maps witnesses back.
pub fn sketch_reduce<'a>(op: &'a dyn VmvOracle, m: usize, seed: u64) -> Result<VirtualOperator<'a>> {
    if m == 0 || m > op.dim() {
        return Err(contract(format!("reduced dimension {m} must lie in 1..={}", op.dim())));
    }
    let mut r = rng::stream(seed, 0);
    let g = rng::gaussian_matrix(&mut r, op.dim(), m, 1.0 / (m as f64).sqrt());
    VirtualOperator::congruence(op, g)
}

#[derive(Debug, Clone, PartialEq)]
pub enum OjaOutcome {
    /// `xᵀAx < 0`, confirmed by a direct query.
    Witness(DVector<f64>),
    /// All iterations ran without a confirmed negative value.
    Completed,
    /// A step with `η·gᵀAg > 2` came up: the step size is too large for
    /// this operator, so the scale is abandoned.
    Aborted,
}

/// Trace of one run at a fixed step size.
#[derive(Debug, Clone, PartialEq)]
pub struct OjaRun {
    pub outcome: OjaOutcome,
    /// Maintained `f(x) = xᵀAx` after every step, for the current
    /// (normalized) iterate.
    pub f_trace: Vec<f64>,
    pub queries: u64,
}

/// Runs `N` steps of `x ← x - η(gᵀAx)g` from a Gaussian start, keeping
/// `f(x) = xᵀAx` up to date with
/// `f(x) - f(x') = η(gᵀAx)²(2 - η·gᵀAg)`. That costs two queries per step
/// and one for the start. The iterate is renormalized after each step.
///
/// A drop below `-1e-10·scale·‖x‖²` is confirmed with a direct query (and
/// `f` resynchronized if the confirmation fails); only a confirmed value
/// below `-1e-12·scale·‖x‖²` is reported, so floating-point drift can never
/// produce a rejection of a PSD operator.
pub fn run_oja<R: Rng + ?Sized>(
    op: &dyn VmvOracle,
    eta: f64,
    n: usize,
    scale: f64,
    record: bool,
    rng: &mut R,
) -> Result<OjaRun> {
    let before = op.vmv_queries();
    let m = op.dim();
    let mut x = rng::unit_vector(rng, m);
    let mut f = op.quad_form(&x)?;
    let mut f_trace = Vec::new();
    if record {
        f_trace.push(f);
    }
    let mut outcome = OjaOutcome::Completed;
    for _ in 0..n {
        let g = rng::gaussian_vector(rng, m);
        let gag = op.quad_form(&g)?;
        if eta * gag > 2.0 {
            outcome = OjaOutcome::Aborted;
            break;
        }
        let (next, s) = oja_step_with(op, &x, eta, &g)?;
        f -= eta * s * s * (2.0 - eta * gag);
        let norm = next.norm();
        x = next / norm;
        f /= norm * norm;
        if record {
            f_trace.push(f);
        }
        if f < -1e-10 * scale {
            let direct = op.quad_form(&x)?;
            if direct < -1e-12 * scale {
                outcome = OjaOutcome::Witness(x);
                break;
            }
            f = direct;
        }
    }
    Ok(OjaRun { outcome, f_trace, queries: op.vmv_queries() - before })
}

/// One-sided adaptive `(ε, ℓ1)` tester.
///
/// Each repetition reduces to `m = ⌈reduce/ε⌉` dimensions, brackets
/// `‖B‖₁` within a factor `2m²` using `m` queries, and walks the step size
/// down from the largest candidate by factors of two. Scales whose steps
/// turn unstable are abandoned early; after `eta_scales` completed scales
/// the repetition accepts. A confirmed negative Rayleigh quotient rejects,
/// with the iterate pulled back to the original space as witness.
pub fn oja_l1_tester<R: Rng + ?Sized>(
    op: &dyn VmvOracle,
    eps: f64,
    cfg: &OjaConfig,
    rng: &mut R,
) -> Result<Verdict> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(contract("eps must lie in (0, 1)"));
    }
    cfg.validate()?;
    let before = op.vmv_queries();
    let d = op.dim();
    let m = ((cfg.reduce / eps).ceil() as usize).clamp(1, d);
    for _ in 0..cfg.amplification {
        let reduced = if m < d { Some(sketch_reduce(op, m, rng::child_seed(rng))?) } else { None };
        let b: &dyn VmvOracle = match &reduced {
            Some(r) => r,
            None => op,
        };
        let ((lo, hi), _) = schatten1_scale_estimate(b, rng)?;
        if hi == 0.0 {
            continue;
        }
        let scales = (hi / lo).log2().ceil() as usize + 1;
        let mut completed = 0;
        for s in 0..scales {
            let guess = lo * 2f64.powi(s as i32);
            let run = run_oja(b, cfg.eta / guess, cfg.max_iters, guess, false, rng)?;
            match run.outcome {
                OjaOutcome::Witness(x) => {
                    let w = match &reduced {
                        Some(r) => r.pullback(&x),
                        None => x,
                    };
                    return Ok(Verdict::reject(Mode::OneSided, Some(w), op.vmv_queries() - before));
                }
                OjaOutcome::Completed => {
                    completed += 1;
                    if completed >= cfg.eta_scales {
                        break;
                    }
                }
                OjaOutcome::Aborted => {}
            }
        }
    }
    Ok(Verdict::accept(Mode::OneSided, op.vmv_queries() - before))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{gen_rotated_diag, SpectrumInstance, SymmetricOperator};
    use nalgebra::DMatrix;

    #[test]
    fn step_on_zero_is_identity() {
        let op = SymmetricOperator::zeros(3);
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let mut r = rng::stream(0, 0);
        let (next, s) = oja_step(&op, &x, 0.3, &mut r).unwrap();
        assert_eq!(next, x);
        assert_eq!(s, 0.0);
        assert_eq!(op.vmv_queries(), 1);
    }

    #[test]
    fn step_closed_form() {
        let op = SymmetricOperator::identity(3);
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let (next, s) = oja_step_with(&op, &e1, 0.1, &e1).unwrap();
        assert_eq!(s, 1.0);
        assert!((next - &e1 * 0.9).amax() < 1e-15);
    }

    #[test]
    fn incremental_f_matches_direct() {
        let eigs: Vec<f64> = (0..30).map(|i| if i == 0 { -0.05 } else { 1.0 / 29.0 }).collect();
        let op = gen_rotated_diag(&SpectrumInstance::new(eigs, 2)).unwrap();
        for seed in 0..20 {
            let mut r = rng::stream(seed, 1);
            let x0 = rng::gaussian_vector(&mut r, 30);
            let mut x = x0.clone();
            let mut f = op.quad_form_uncounted(&x);
            for _ in 0..50 {
                let g = rng::gaussian_vector(&mut r, 30);
                let gag = op.quad_form_uncounted(&g);
                let (next, s) = oja_step_with(&op, &x, 0.2, &g).unwrap();
                f -= 0.2 * s * s * (2.0 - 0.2 * gag);
                x = next;
                let direct = op.quad_form_uncounted(&x);
                assert!((f - direct).abs() <= 1e-8 * direct.abs().max(x.norm_squared() * 1e-3));
            }
        }
    }

    #[test]
    fn reduction_with_identity_sketch_is_exact() {
        let op = gen_rotated_diag(&SpectrumInstance::new(vec![-1.0, 2.0, 3.0], 1)).unwrap();
        let v = VirtualOperator::congruence(&op, DMatrix::identity(3, 3)).unwrap();
        assert!((v.dense() - op.dense()).amax() < 1e-14);
        assert!(sketch_reduce(&op, 4, 0).is_err());
        assert!(sketch_reduce(&op, 0, 0).is_err());
    }

    #[test]
    fn identity_is_never_rejected() {
        let op = SymmetricOperator::identity(50);
        let cfg = OjaConfig { amplification: 2, ..OjaConfig::for_eps(0.2) };
        for seed in 0..20 {
            let mut r = rng::stream(seed, 0);
            let v = oja_l1_tester(&op, 0.2, &cfg, &mut r).unwrap();
            assert!(v.is_psd);
            assert_eq!(v.mode, Mode::OneSided);
        }
    }

    #[test]
    fn zero_operator_accepts() {
        let op = SymmetricOperator::zeros(10);
        let mut r = rng::stream(1, 0);
        assert!(oja_l1_tester(&op, 0.3, &OjaConfig::for_eps(0.3), &mut r).unwrap().is_psd);
    }

    #[test]
    fn query_count_matches_counter() {
        let eigs: Vec<f64> = (0..40).map(|i| if i == 0 { -0.3 } else { 0.7 / 39.0 }).collect();
        let op = gen_rotated_diag(&SpectrumInstance::new(eigs, 5)).unwrap();
        let mut r = rng::stream(5, 0);
        let v = oja_l1_tester(&op, 0.2, &OjaConfig::for_eps(0.2), &mut r).unwrap();
        assert_eq!(v.queries_used, op.vmv_queries());
    }

    #[test]
    fn invalid_eps() {
        let op = SymmetricOperator::identity(3);
        let mut r = rng::stream(1, 0);
        assert!(oja_l1_tester(&op, 0.0, &OjaConfig::for_eps(0.5), &mut r).is_err());
        assert!(oja_l1_tester(&op, 1.0, &OjaConfig::for_eps(0.5), &mut r).is_err());
    }
}
