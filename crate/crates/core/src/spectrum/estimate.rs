use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fit::{FitOptions, FitProblem};
use super::sketch::{block_frobenius_sq, embed_rows, frobenius_sq, sketch_cols, SpectrumSketch};
use crate::error::{contract, Result};
use crate::kernels::{median, sym_eig_small};
use crate::oracle::VmvOracle;

/// Constants of the spectrum estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumConfig {
    /// `R` has `⌈c_r·k/ε⌉` columns.
    pub c_r: f64,
    /// `S1`, `S2` have `⌈embed_rows·m/ε²⌉` rows.
    pub embed_rows: f64,
    /// `⌈reps_factor·ln(1/δ)⌉` repetitions, rounded up to odd.
    pub reps_factor: f64,
    /// Frobenius estimates use up to `⌈pairs_c/ε²⌉` probe pairs.
    pub pairs_c: f64,
    pub fit: FitOptions,
}

impl SpectrumConfig {
    pub const DEFAULT_C_R: f64 = 2.0;
    pub const DEFAULT_EMBED_ROWS: f64 = 40.0;
    pub const DEFAULT_REPS_FACTOR: f64 = 1.0;
    pub const DEFAULT_PAIRS_C: f64 = 32.0;
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            c_r: Self::DEFAULT_C_R,
            embed_rows: Self::DEFAULT_EMBED_ROWS,
            reps_factor: Self::DEFAULT_REPS_FACTOR,
            pairs_c: Self::DEFAULT_PAIRS_C,
            fit: FitOptions::default(),
        }
    }
}

impl SpectrumConfig {
    pub fn repetitions(&self, delta: f64) -> usize {
        let n = (self.reps_factor * (1.0 / delta).ln()).ceil().max(1.0) as usize;
        n | 1
    }

    fn pairs(&self, eps: f64) -> usize {
        (self.pairs_c / (eps * eps)).ceil() as usize
    }
}

/// Signed eigenvalue estimates, largest magnitude first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenEstimate {
    pub values: Vec<f64>,
    /// `ε·‖A‖_F`, with the Frobenius norm estimated.
    pub error_bound: f64,
    /// Estimates of `‖A_{i,+}‖_F²` for `i = 1..=k`.
    pub plus_sq: Vec<f64>,
    /// Estimates of `‖A_{i,-}‖_F²` for `i = 1..=k`.
    pub minus_sq: Vec<f64>,
    pub queries: u64,
}

fn check_args(op: &dyn VmvOracle, k: usize, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(contract("eps must lie in (0, 1)"));
    }
    if k == 0 || k > op.dim() {
        return Err(contract(format!("k = {k} must lie in 1..={}", op.dim())));
    }
    Ok(())
}

/// Fit costs for ranks `1..=k`, each warm-started from the previous rank and
/// never above it since a lower-rank solution stays feasible.
fn nested_costs(m1: &DMatrix<f64>, m2: &DMatrix<f64>, q: &DMatrix<f64>, k: usize, opts: &FitOptions) -> Result<Vec<f64>> {
    let prob = FitProblem::new(m1, m2, q)?;
    let mut costs = Vec::with_capacity(k);
    let mut warm: Option<DMatrix<f64>> = None;
    let mut prev = f64::INFINITY;
    for i in 1..=k {
        let fit = prob.solve(i, warm.as_ref(), opts)?;
        prev = prev.min(fit.cost);
        costs.push(prev);
        warm = Some(fit.y);
    }
    Ok(costs)
}

/// Costs of the positive and negative fits, `‖A_{i,±} - A‖²` up to sketching
/// error. The positive side fits `M1·Y·M2ᵀ ≈ Q`, the negative side `≈ -Q`.
fn signed_costs(m1: &DMatrix<f64>, m2: &DMatrix<f64>, q: &DMatrix<f64>, k: usize, opts: &FitOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let plus = nested_costs(m1, m2, &(-q), k, opts)?;
    let minus = nested_costs(m1, m2, q, k, opts)?;
    Ok((plus, minus))
}

/// Estimate of `‖A_{k,+}‖_F²` to within `ε·‖A‖_F²` with probability
/// `1 - delta`: the Frobenius norm minus the sketched fit cost, median over
/// repetitions.
pub fn estimate_akplus_sq<R: Rng + ?Sized>(
    op: &dyn VmvOracle,
    k: usize,
    eps: f64,
    delta: f64,
    cfg: &SpectrumConfig,
    rng: &mut R,
) -> Result<f64> {
    check_args(op, k, eps)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(contract("delta must lie in (0, 1)"));
    }
    let d = op.dim();
    let m = sketch_cols(k, eps, cfg.c_r, d);
    let rows = embed_rows(m, eps, cfg.embed_rows, d);
    let mut ests = Vec::new();
    for _ in 0..cfg.repetitions(delta) {
        let sk = SpectrumSketch::build(op, m, rows, rng)?;
        let (fro, _) = frobenius_sq(op, cfg.pairs(eps), rng)?;
        let prob = FitProblem::new(&sk.m1, &sk.m2, &(-&sk.q))?;
        ests.push(fro - prob.solve(k, None, &cfg.fit)?.cost);
    }
    Ok(median(&mut ests))
}

/// Turns per-rank squared-norm estimates into signed eigenvalues.
fn assemble(plus: Vec<f64>, minus: Vec<f64>, k: usize, fro: f64, eps: f64, queries: u64) -> EigenEstimate {
    let diffs = |v: &[f64]| -> Vec<f64> {
        let mut prev = 0.0;
        v.iter()
            .map(|&e| {
                let out = (e - prev).max(0.0).sqrt();
                prev = e;
                out
            })
            .collect()
    };
    let mut values: Vec<f64> = diffs(&plus).into_iter().chain(diffs(&minus).into_iter().map(|x| -x)).collect();
    values.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    values.truncate(k);
    EigenEstimate { values, error_bound: eps * fro.max(0.0).sqrt(), plus_sq: plus, minus_sq: minus, queries }
}

fn median_columns(rows: &[Vec<f64>]) -> Vec<f64> {
    let k = rows.first().map_or(0, Vec::len);
    (0..k)
        .map(|i| {
            let mut col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            median(&mut col)
        })
        .collect()
}

/// Signed top-`k` eigenvalues to within `ε·‖A‖_F`.
///
/// Every squared norm `‖A_{i,±}‖²` is estimated to `(ε²/2)·‖A‖_F²` with one
/// sketch per repetition shared across all `2k` fits, and
/// `λ̃_{i,±} = ±√max(0, est_i - est_{i-1})`.
pub fn top_eigs_signed<R: Rng + ?Sized>(
    op: &dyn VmvOracle,
    k: usize,
    eps: f64,
    cfg: &SpectrumConfig,
    rng: &mut R,
) -> Result<EigenEstimate> {
    check_args(op, k, eps)?;
    let before = op.vmv_queries();
    let d = op.dim();
    let inner = eps * eps / 2.0;
    let m = sketch_cols(k, inner, cfg.c_r, d);
    let rows = embed_rows(m, inner, cfg.embed_rows, d);
    let reps = cfg.repetitions(1.0 / (20.0 * k as f64));
    let (mut plus, mut minus, mut fros) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..reps {
        let sk = SpectrumSketch::build(op, m, rows, rng)?;
        let (fro, _) = frobenius_sq(op, cfg.pairs(inner), rng)?;
        let (cp, cm) = signed_costs(&sk.m1, &sk.m2, &sk.q, k, &cfg.fit)?;
        plus.push(cp.iter().map(|c| fro - c).collect());
        minus.push(cm.iter().map(|c| fro - c).collect());
        fros.push(fro);
    }
    let fro = median(&mut fros);
    Ok(assemble(median_columns(&plus), median_columns(&minus), k, fro, eps, op.vmv_queries() - before))
}

/// Orthonormal bases of the column space of `m` and of its complement.
fn range_split(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > 1e-10 * smax)
        .collect();
    let mut basis = DMatrix::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        basis.set_column(j, &u.column(i));
    }
    let comp_dim = n - keep.len();
    if comp_dim == 0 {
        return Ok((basis, DMatrix::zeros(n, 0)));
    }
    let proj = DMatrix::identity(n, n) - &basis * basis.transpose();
    let eig = sym_eig_small(&proj)?;
    let mut comp = DMatrix::zeros(n, comp_dim);
    for j in 0..comp_dim {
        comp.set_column(j, &eig.vectors.column(n - 1 - j));
    }
    Ok((basis, comp))
}

/// The four terms of `‖M1·Y·M2ᵀ - Q‖²` after splitting rows by the range of
/// `M1` and columns by the range of `M2`: the fitted block
/// `‖Π1(M1·Y·M2ᵀ - Q)Π2‖²` followed by `‖Π1⊥QΠ2‖²`, `‖Π1QΠ2⊥‖²` and
/// `‖Π1⊥QΠ2⊥‖²`.
pub fn pythagorean_split(m1: &DMatrix<f64>, m2: &DMatrix<f64>, q: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<[f64; 4]> {
    let (u1, c1) = range_split(m1)?;
    let (u2, c2) = range_split(m2)?;
    let fit = u1.transpose() * (m1 * y * m2.transpose() - q) * &u2;
    Ok([
        fit.norm_squared(),
        (c1.transpose() * q * &u2).norm_squared(),
        (u1.transpose() * q * &c2).norm_squared(),
        (c1.transpose() * q * &c2).norm_squared(),
    ])
}

/// Same contract as [`top_eigs_signed`] with two rounds of queries per
/// repetition. Round one asks for `M1` and `M2` only. Round two asks for
/// `Q` restricted to the ranges of `M1` and `M2`, and for Frobenius
/// estimates of the three blocks of `Q` outside them, which add to the fit
/// cost as constants.
pub fn top_eigs_signed_adaptive<R: Rng + ?Sized>(
    op: &dyn VmvOracle,
    k: usize,
    eps: f64,
    cfg: &SpectrumConfig,
    rng: &mut R,
) -> Result<EigenEstimate> {
    Ok(top_eigs_signed_adaptive_traced(op, k, eps, cfg, rng)?.0)
}

/// Per-repetition query split of the adaptive estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AdaptiveRoundQueries {
    pub round1: u64,
    pub round2_core: u64,
    pub round2_residual: u64,
    pub rank1: usize,
    pub rank2: usize,
}

/// [`top_eigs_signed_adaptive`] together with the per-repetition query split.
pub fn top_eigs_signed_adaptive_traced<R: Rng + ?Sized>(
    op: &dyn VmvOracle,
    k: usize,
    eps: f64,
    cfg: &SpectrumConfig,
    rng: &mut R,
) -> Result<(EigenEstimate, Vec<AdaptiveRoundQueries>)> {
    check_args(op, k, eps)?;
    let before = op.vmv_queries();
    let d = op.dim();
    let inner = eps * eps / 2.0;
    let m = sketch_cols(k, inner, cfg.c_r, d);
    let rows = embed_rows(m, inner, cfg.embed_rows, d);
    let reps = cfg.repetitions(1.0 / (20.0 * k as f64));
    let pairs = cfg.pairs(inner);
    let (mut plus, mut minus, mut fros, mut trace) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for _ in 0..reps {
        let mut sk = SpectrumSketch::draw(d, m, rows, rng)?;
        sk.query_products(op)?;
        let mut split = AdaptiveRoundQueries { round1: sk.queries_used, ..Default::default() };

        let (u1, c1) = range_split(&sk.m1)?;
        let (u2, c2) = range_split(&sk.m2)?;
        split.rank1 = u1.ncols();
        split.rank2 = u2.ncols();
        let (l1, l1c) = (sk.s1.transpose() * &u1, sk.s1.transpose() * &c1);
        let (r2, r2c) = (sk.s2.transpose() * &u2, sk.s2.transpose() * &c2);
        let t0 = op.vmv_queries();
        let core = op.sketch_block(&l1, &r2)?;
        split.round2_core = op.vmv_queries() - t0;
        let mut residual = 0.0;
        for (l, r) in [(&l1c, &r2), (&l1, &r2c), (&l1c, &r2c)] {
            let (v, q) = block_frobenius_sq(op, l, r, pairs, rng)?;
            residual += v;
            split.round2_residual += q;
        }

        let (fro, _) = frobenius_sq(op, pairs, rng)?;
        let m1r = u1.transpose() * &sk.m1;
        let m2r = u2.transpose() * &sk.m2;
        let (cp, cm) = if core.is_empty() {
            (vec![0.0; k], vec![0.0; k])
        } else {
            signed_costs(&m1r, &m2r, &core, k, &cfg.fit)?
        };
        plus.push(cp.iter().map(|c| fro - c - residual).collect());
        minus.push(cm.iter().map(|c| fro - c - residual).collect());
        fros.push(fro);
        trace.push(split);
    }
    let fro = median(&mut fros);
    let est = assemble(median_columns(&plus), median_columns(&minus), k, fro, eps, op.vmv_queries() - before);
    Ok((est, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{gen_rotated_diag, gen_wishart, SpectrumInstance, SymmetricOperator};
    use crate::rng;

    fn diag_op(head: &[f64], d: usize) -> SymmetricOperator {
        let mut v = head.to_vec();
        v.resize(d, 0.0);
        SymmetricOperator::diagonal(&v)
    }

    #[test]
    fn psd_low_rank_estimate_is_full_norm() {
        let op = gen_rotated_diag(&SpectrumInstance::new(
            [3.0, 1.0].into_iter().chain(std::iter::repeat_n(0.0, 22)).collect(),
            4,
        ))
        .unwrap();
        let mut r = rng::stream(1, 0);
        let est = estimate_akplus_sq(&op, 2, 0.1, 0.1, &SpectrumConfig::default(), &mut r).unwrap();
        assert!((est - 10.0).abs() <= 0.1 * 10.0, "{est}");
    }

    #[test]
    fn top_positive_part_of_diagonal() {
        let mut head = vec![5.0, -3.0];
        head.extend(std::iter::repeat_n(1.0, 8));
        let op = diag_op(&head, 32);
        let fro2 = op.dense().norm_squared();
        let mut r = rng::stream(2, 0);
        let est = estimate_akplus_sq(&op, 1, 0.1, 0.1, &SpectrumConfig::default(), &mut r).unwrap();
        assert!((est - 25.0).abs() <= 0.1 * fro2, "{est}");
        let neg = op.scaled(-1.0);
        let est = estimate_akplus_sq(&neg, 1, 0.1, 0.1, &SpectrumConfig::default(), &mut r).unwrap();
        assert!((est - 9.0).abs() <= 0.1 * fro2, "{est}");
    }

    #[test]
    fn signed_pair_from_diagonal() {
        let op = diag_op(&[5.0, -3.0, 1.0], 12);
        let mut r = rng::stream(3, 0);
        let est = top_eigs_signed(&op, 2, 0.1, &SpectrumConfig::default(), &mut r).unwrap();
        let tol = 0.1 * 35f64.sqrt();
        assert_eq!(est.values.len(), 2);
        assert!((est.values[0] - 5.0).abs() <= tol, "{:?}", est.values);
        assert!((est.values[1] + 3.0).abs() <= tol, "{:?}", est.values);
    }

    #[test]
    fn wishart_top_three_are_positive() {
        let op = gen_wishart(64, 9);
        let truth = op.eigenvalues();
        let fro = op.dense().norm();
        let mut r = rng::stream(4, 0);
        let est = top_eigs_signed(&op, 3, 0.2, &SpectrumConfig::default(), &mut r).unwrap();
        for (i, v) in est.values.iter().enumerate() {
            assert!(*v > 0.0);
            assert!((v - truth[63 - i]).abs() <= 0.2 * fro, "{v} vs {}", truth[63 - i]);
        }
    }

    #[test]
    fn zero_operator_gives_zeros() {
        let op = SymmetricOperator::zeros(10);
        let mut r = rng::stream(5, 0);
        let est = top_eigs_signed(&op, 3, 0.2, &SpectrumConfig::default(), &mut r).unwrap();
        assert_eq!(est.values, vec![0.0; 3]);
        let est = top_eigs_signed_adaptive(&op, 3, 0.2, &SpectrumConfig::default(), &mut r).unwrap();
        assert_eq!(est.values, vec![0.0; 3]);
    }

    #[test]
    fn magnitudes_are_sorted() {
        let op = gen_rotated_diag(&SpectrumInstance::new(
            vec![-4.0, -1.0, 0.5, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            6,
        ))
        .unwrap();
        let mut r = rng::stream(6, 0);
        let est = top_eigs_signed(&op, 3, 0.2, &SpectrumConfig::default(), &mut r).unwrap();
        assert!(est.values.windows(2).all(|w| w[0].abs() >= w[1].abs()));
        assert!(est.values[0] < 0.0);
    }

    #[test]
    fn split_adds_up_on_dense_instances() {
        let mut r = rng::stream(7, 0);
        for _ in 0..5 {
            let rank = 3;
            let m1 = rng::gaussian_matrix(&mut r, 9, rank, 1.0) * rng::gaussian_matrix(&mut r, rank, 5, 1.0);
            let m2 = rng::gaussian_matrix(&mut r, 7, 5, 1.0);
            let q = rng::gaussian_matrix(&mut r, 9, 7, 1.0);
            let l = rng::gaussian_matrix(&mut r, 5, 2, 1.0);
            let y = &l * l.transpose();
            let parts = pythagorean_split(&m1, &m2, &q, &y).unwrap();
            let direct = (&m1 * &y * m2.transpose() - &q).norm_squared();
            let sum: f64 = parts.iter().sum();
            assert!((sum - direct).abs() <= 1e-6 * direct, "{sum} vs {direct}");
        }
    }

    #[test]
    fn adaptive_round_two_is_small() {
        let op = gen_wishart(48, 2);
        let mut r = rng::stream(8, 0);
        let cfg = SpectrumConfig { c_r: 0.05, embed_rows: 0.02, ..SpectrumConfig::default() };
        let (_, trace) = top_eigs_signed_adaptive_traced(&op, 2, 0.3, &cfg, &mut r).unwrap();
        for t in trace {
            assert_eq!(t.round2_core, (t.rank1 * t.rank2) as u64);
            assert!(t.rank1 <= t.round1 as usize);
        }
    }
}
