//! Low-rank PSD fitting: `min ‖M1·Y·M2ᵀ + Q‖_F²` over PSD `Y` of rank at most `k`.
//!
//! The problem is first reduced to the joint row space of `M1` and `M2`.
//! When the reduced `M1` has full column rank it is factored as `U1·R1`
//! and the substitution `W = R1·Z·R1ᵀ` turns the objective into
//! `‖W·T - C‖² + c0`, whose unconstrained minimizer is close to `sym(C·T⁺)`.
//! Otherwise the factored objective is optimized directly. In both cases
//! `W = LLᵀ` with `L` having `k` columns, and `L` is found by gradient
//! descent with Barzilai-Borwein steps and Armijo backtracking from a
//! spectral start plus random restarts.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{contract, Result};
use crate::kernels::sym_eig_small;
use crate::rng;

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Total starts, including the spectral one.
    pub restarts: usize,
    pub max_iters: usize,
    /// Stop once one step improves the objective by less than this fraction.
    pub tol: f64,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { restarts: 10, max_iters: 2000, tol: 1e-10, seed: 0x5eed_f17 }
    }
}

/// Output of [`psd_rank_k_fit`].
#[derive(Debug, Clone)]
pub struct PsdFit {
    pub cost: f64,
    pub y: DMatrix<f64>,
}

/// `min ‖M1·Y·M2ᵀ + Q‖_F²` over PSD `Y` with rank at most `k`.
pub fn psd_rank_k_fit(m1: &DMatrix<f64>, m2: &DMatrix<f64>, q: &DMatrix<f64>, k: usize) -> Result<PsdFit> {
    FitProblem::new(m1, m2, q)?.solve(k, None, &FitOptions::default())
}

/// Reduced objective `‖A1·L·Lᵀ·A2ᵀ - C‖² + c0` together with the map back
/// to `Y`.
#[derive(Debug, Clone)]
pub struct FitProblem {
    m1: DMatrix<f64>,
    m2: DMatrix<f64>,
    q: DMatrix<f64>,
    /// Orthonormal basis of the joint row space, `m x s`.
    v: DMatrix<f64>,
    /// `None` means `A1 = I`.
    a1: Option<DMatrix<f64>>,
    a2: DMatrix<f64>,
    c: DMatrix<f64>,
    c0: f64,
    /// `Z = back·W·backᵀ`, or `None` when `Z = W`.
    back: Option<DMatrix<f64>>,
}

impl FitProblem {
    pub fn new(m1: &DMatrix<f64>, m2: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<Self> {
        let m = m1.ncols();
        if m2.ncols() != m || q.nrows() != m1.nrows() || q.ncols() != m2.nrows() {
            return Err(contract(format!(
                "non-conformal fit: M1 {}x{}, M2 {}x{}, Q {}x{}",
                m1.nrows(),
                m1.ncols(),
                m2.nrows(),
                m2.ncols(),
                q.nrows(),
                q.ncols()
            )));
        }
        if m == 0 {
            return Err(contract("fit needs at least one column"));
        }
        let b = -q;
        let mut stacked = DMatrix::zeros(m1.nrows() + m2.nrows(), m);
        stacked.rows_mut(0, m1.nrows()).copy_from(m1);
        stacked.rows_mut(m1.nrows(), m2.nrows()).copy_from(m2);
        let v = row_space(&stacked);
        let p1 = m1 * &v;
        let p2 = m2 * &v;

        let mut prob = Self {
            m1: m1.clone(),
            m2: m2.clone(),
            q: q.clone(),
            a1: Some(p1.clone()),
            a2: p2.clone(),
            c: b.clone(),
            c0: 0.0,
            back: None,
            v,
        };
        let s = prob.v.ncols();
        if s == 0 {
            return Ok(prob);
        }
        // Pick a side with full column rank for the substitution.
        // The objective is invariant under transposing the whole problem.
        for (pa, pb, target) in [(&p1, &p2, b.clone()), (&p2, &p1, b.transpose())] {
            if pa.nrows() < s || !full_column_rank(pa) {
                continue;
            }
            let qr = pa.clone().qr();
            let u = qr.q();
            let r = qr.r();
            let Some(r_inv) = r.clone().try_inverse() else { continue };
            // T = R⁻ᵀ·Pbᵀ, so A2 = Tᵀ = Pb·R⁻¹.
            let a2 = pb * &r_inv;
            let c = u.transpose() * &target;
            prob.c0 = (target.norm_squared() - c.norm_squared()).max(0.0);
            prob.a1 = None;
            prob.a2 = a2;
            prob.c = c;
            prob.back = Some(r_inv);
            break;
        }
        Ok(prob)
    }

    /// Dimension of the reduced variable.
    pub fn reduced_dim(&self) -> usize {
        self.v.ncols()
    }

    /// Direct cost `‖M1·Y·M2ᵀ + Q‖²`.
    pub fn cost_of(&self, y: &DMatrix<f64>) -> f64 {
        (&self.m1 * y * self.m2.transpose() + &self.q).norm_squared()
    }

    /// Solves at rank `k`, optionally warm-started from a previous `Y`.
    pub fn solve(&self, k: usize, warm: Option<&DMatrix<f64>>, opts: &FitOptions) -> Result<PsdFit> {
        let m = self.m1.ncols();
        if k == 0 || k > m {
            return Err(contract(format!("fit rank {k} must lie in 1..={m}")));
        }
        let s = self.v.ncols();
        let zero = DMatrix::zeros(m, m);
        if s == 0 {
            return Ok(PsdFit { cost: self.cost_of(&zero), y: zero });
        }
        let r = k.min(s);
        let mut rng = rng::stream(opts.seed, (k as u64) << 32 | s as u64);

        let mut starts = Vec::with_capacity(opts.restarts + 1);
        starts.push(self.spectral_start(r)?);
        if let Some(y) = warm {
            starts.push(self.start_from_y(y, r)?);
        }
        let scale = starts[0].norm().max(self.typical_scale(r));
        while starts.len() < opts.restarts.max(1) + usize::from(warm.is_some()) {
            starts.push(rng::gaussian_matrix(&mut rng, s, r, scale / ((s * r) as f64).sqrt()));
        }

        let mut best: Option<(f64, DMatrix<f64>)> = None;
        for l0 in starts {
            let (f, l) = self.descend(l0, opts);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, l));
            }
        }
        let (_, l) = best.expect("at least one start");
        let y = self.lift(&l);
        let zero_cost = self.cost_of(&zero);
        let cost = self.cost_of(&y);
        // The zero matrix is always feasible.
        if zero_cost <= cost {
            return Ok(PsdFit { cost: zero_cost, y: zero });
        }
        Ok(PsdFit { cost, y })
    }

    fn typical_scale(&self, r: usize) -> f64 {
        let a1 = self.a1.as_ref().map_or(1.0, |a| a.norm());
        let denom = (a1 * self.a2.norm()).max(f64::MIN_POSITIVE);
        (self.c.norm() / denom).sqrt() * (r as f64).sqrt()
    }

    /// Top-`r` PSD part of the symmetrized least-squares solution.
    fn spectral_start(&self, r: usize) -> Result<DMatrix<f64>> {
        let pinv = |m: &DMatrix<f64>| m.clone().pseudo_inverse(1e-12 * m.norm().max(f64::MIN_POSITIVE));
        let a2p = pinv(&self.a2).map_err(|e| contract(e.to_string()))?;
        let x = match &self.a1 {
            None => &self.c * a2p.transpose(),
            Some(a1) => {
                let a1p = pinv(a1).map_err(|e| contract(e.to_string()))?;
                a1p * &self.c * a2p.transpose()
            }
        };
        psd_factor(&((&x + x.transpose()) * 0.5), r)
    }

    /// Expresses a full-size `Y` in reduced coordinates and factors it.
    fn start_from_y(&self, y: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
        let z = self.v.transpose() * y * &self.v;
        let w = match &self.back {
            None => z,
            Some(r_inv) => {
                let r_mat = r_inv.clone().try_inverse().ok_or_else(|| contract("singular factor"))?;
                &r_mat * z * r_mat.transpose()
            }
        };
        psd_factor(&((&w + w.transpose()) * 0.5), r)
    }

    fn lift(&self, l: &DMatrix<f64>) -> DMatrix<f64> {
        let w = l * l.transpose();
        let z = match &self.back {
            None => w,
            Some(r_inv) => r_inv * w * r_inv.transpose(),
        };
        let y = &self.v * z * self.v.transpose();
        (&y + y.transpose()) * 0.5
    }

    fn residual(&self, l: &DMatrix<f64>) -> DMatrix<f64> {
        let w = l * l.transpose();
        let left = match &self.a1 {
            None => w,
            Some(a1) => a1 * w,
        };
        left * self.a2.transpose() - &self.c
    }

    fn objective(&self, l: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let e = self.residual(l);
        (e.norm_squared(), e)
    }

    /// `∇_L ‖A1·LLᵀ·A2ᵀ - C‖² = 2(A1ᵀ·E·A2 + A2ᵀ·Eᵀ·A1)·L`.
    fn gradient(&self, e: &DMatrix<f64>, l: &DMatrix<f64>) -> DMatrix<f64> {
        let g = match &self.a1 {
            None => e * &self.a2,
            Some(a1) => a1.transpose() * e * &self.a2,
        };
        (&g + g.transpose()) * l * 2.0
    }

    fn descend(&self, mut l: DMatrix<f64>, opts: &FitOptions) -> (f64, DMatrix<f64>) {
        let (mut f, e) = self.objective(&l);
        let mut grad = self.gradient(&e, &l);
        let mut step = {
            let a1 = self.a1.as_ref().map_or(1.0, |a| a.norm());
            let lip = 4.0 * (a1 * self.a2.norm()).powi(2) * l.norm_squared().max(self.typical_scale(l.ncols()).powi(2));
            1.0 / lip.max(f64::MIN_POSITIVE)
        };
        for _ in 0..opts.max_iters {
            let gg = grad.norm_squared();
            if gg == 0.0 || !gg.is_finite() {
                break;
            }
            let mut accepted = None;
            for _ in 0..60 {
                let cand = &l - &grad * step;
                let (fc, ec) = self.objective(&cand);
                if fc <= f - 1e-4 * step * gg {
                    accepted = Some((cand, fc, ec));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, fc, ec)) = accepted else { break };
            let g_new = self.gradient(&ec, &cand);
            let dl = &cand - &l;
            let dg = &g_new - &grad;
            let improvement = f - fc;
            l = cand;
            grad = g_new;
            let done = improvement <= opts.tol * f.max(f64::MIN_POSITIVE);
            f = fc;
            if done {
                break;
            }
            let sy = dl.dot(&dg);
            step = if sy > 0.0 { dl.norm_squared() / sy } else { step * 2.0 };
        }
        (f + self.c0, l)
    }
}

/// Orthonormal basis of the row space of `m`.
fn row_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(n, 0);
    }
    let keep: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > 1e-10 * smax).collect();
    let mut v = DMatrix::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        v.set_column(j, &vt.row(i).transpose());
    }
    v
}

fn full_column_rank(m: &DMatrix<f64>) -> bool {
    let sv = m.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    smax > 0.0 && sv.len() == m.ncols() && sv.iter().all(|&x| x > 1e-8 * smax)
}

/// `L` with `LLᵀ` the best PSD rank-`r` approximation of symmetric `x`.
/// Columns for missing positive eigenvalues are left at zero.
fn psd_factor(x: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    let eig = sym_eig_small(x)?;
    let n = x.nrows();
    let mut l = DMatrix::zeros(n, r);
    for j in 0..r.min(n) {
        let idx = n - 1 - j;
        let lam = eig.values[idx];
        if lam > 0.0 {
            l.set_column(j, &(eig.vectors.column(idx) * lam.sqrt()));
        }
    }
    Ok(l)
}

/// A `Y` kept only for reporting checks: `(λ_min, σ_{k+1} / σ_1)`.
pub fn psd_rank_diagnostics(y: &DMatrix<f64>, k: usize) -> Result<(f64, f64)> {
    let eig = sym_eig_small(y)?;
    let mut mags: Vec<f64> = eig.values.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let top = mags.first().copied().unwrap_or(0.0);
    let tail = mags.get(k).copied().unwrap_or(0.0);
    let ratio = if top > 0.0 { tail / top } else { 0.0 };
    Ok((eig.min(), ratio))
}

/// Random conformal problem for tests and demos.
pub fn random_fit_problem<R: Rng + ?Sized>(
    rng: &mut R,
    rows1: usize,
    rows2: usize,
    cols: usize,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let m1 = rng::gaussian_matrix(rng, rows1, cols, 1.0);
    let m2 = rng::gaussian_matrix(rng, rows2, cols, 1.0);
    let q = rng::gaussian_matrix(rng, rows1, rows2, 1.0);
    (m1, m2, q)
}
