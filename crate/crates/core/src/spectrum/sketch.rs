use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{contract, Result};
use crate::oracle::{haar_columns, VmvOracle};
use crate::rng;

const EMBED_STREAM: u64 = 0x656d_6265_64;

/// `rows x d` embedding with `E‖Sx‖² = ‖x‖²`.
///
/// Below `d` rows this is a Gaussian with entry variance `1/rows`. At
/// `rows = d` it is a Haar orthogonal matrix instead: a square Gaussian is
/// badly conditioned and would not embed anything, while an orthogonal
/// matrix is an exact isometry, which is what capping the row count at `d`
/// is meant to give.
pub fn affine_embedding(rows: usize, d: usize, seed: u64) -> Result<DMatrix<f64>> {
    if rows == 0 || rows > d {
        return Err(contract(format!("embedding rows {rows} must lie in 1..={d}")));
    }
    if rows == d {
        return Ok(haar_columns(d, d, seed).transpose());
    }
    let mut g = rng::stream(seed, EMBED_STREAM);
    Ok(rng::gaussian_matrix(&mut g, rows, d, 1.0 / (rows as f64).sqrt()))
}

/// Columns of the fit sketch `R`: `⌈c_r·k/ε⌉`, capped at `d`.
pub fn sketch_cols(k: usize, eps: f64, c_r: f64, d: usize) -> usize {
    ((c_r * k as f64 / eps).ceil() as usize).clamp(k.min(d), d)
}

/// Rows of the affine embeddings: `⌈c·m/ε²⌉`, capped at `d`.
pub fn embed_rows(m: usize, eps: f64, c: f64, d: usize) -> usize {
    ((c * m as f64 / (eps * eps)).ceil() as usize).clamp(m.min(d), d)
}

/// One draw of `(R, S1, S2)` and the products the estimators need.
#[derive(Debug, Clone)]
pub struct SpectrumSketch {
    pub r: DMatrix<f64>,
    pub s1: DMatrix<f64>,
    pub s2: DMatrix<f64>,
    /// `S1·A·R`.
    pub m1: DMatrix<f64>,
    /// `S2·A·R`.
    pub m2: DMatrix<f64>,
    /// `S1·A·S2ᵀ`. Empty for the adaptive variant, which never forms it.
    pub q: DMatrix<f64>,
    pub queries_used: u64,
}

impl SpectrumSketch {
    /// Draws the matrices without querying anything.
    pub fn draw<R: Rng + ?Sized>(d: usize, m: usize, rows: usize, rng: &mut R) -> Result<Self> {
        let r = rng::gaussian_matrix(rng, d, m, 1.0);
        let s1 = affine_embedding(rows, d, rng::child_seed(rng))?;
        let s2 = affine_embedding(rows, d, rng::child_seed(rng))?;
        Ok(Self {
            r,
            s1,
            s2,
            m1: DMatrix::zeros(0, 0),
            m2: DMatrix::zeros(0, 0),
            q: DMatrix::zeros(0, 0),
            queries_used: 0,
        })
    }

    /// Draws and queries `M1`, `M2` and `Q` (`2·rows·m + rows²` queries).
    pub fn build<R: Rng + ?Sized>(op: &dyn VmvOracle, m: usize, rows: usize, rng: &mut R) -> Result<Self> {
        let mut sk = Self::draw(op.dim(), m, rows, rng)?;
        sk.query_products(op)?;
        let before = op.vmv_queries();
        sk.q = op.sketch_block(&sk.s1.transpose(), &sk.s2.transpose())?;
        sk.queries_used += op.vmv_queries() - before;
        Ok(sk)
    }

    /// Queries `M1` and `M2` only.
    pub fn query_products(&mut self, op: &dyn VmvOracle) -> Result<()> {
        let before = op.vmv_queries();
        self.m1 = op.sketch_block(&self.s1.transpose(), &self.r)?;
        self.m2 = op.sketch_block(&self.s2.transpose(), &self.r)?;
        self.queries_used += op.vmv_queries() - before;
        Ok(())
    }
}

/// Estimate of `‖A‖_F²` and the queries it took.
///
/// Exact through the `d(d+1)/2` entries of `A` in the standard basis when
/// that is no more than `pairs` queries, otherwise the mean of `(xᵀAy)²`
/// over `pairs` independent Gaussian pairs, which is unbiased with relative
/// standard deviation at most `√(8/pairs)`.
pub fn frobenius_sq<R: Rng + ?Sized>(op: &dyn VmvOracle, pairs: usize, rng: &mut R) -> Result<(f64, u64)> {
    let d = op.dim();
    let before = op.vmv_queries();
    if d * (d + 1) / 2 <= pairs.max(1) {
        let s = op.sketch_gram(&DMatrix::identity(d, d))?;
        return Ok((s.norm_squared(), op.vmv_queries() - before));
    }
    let n = pairs.max(1);
    let x = rng::gaussian_matrix(rng, d, n, 1.0);
    let y = rng::gaussian_matrix(rng, d, n, 1.0);
    let mut sum = 0.0;
    for j in 0..n {
        let v = op.bilinear(&x.column(j).into_owned(), &y.column(j).into_owned())?;
        sum += v * v;
    }
    Ok((sum / n as f64, op.vmv_queries() - before))
}

/// `‖Lᵀ·A·R‖_F²` where `L`, `R` have orthonormal columns, either exactly
/// (`cols(L)·cols(R)` queries) or by `pairs` Gaussian probes, whichever is
/// cheaper. A block with no columns costs nothing.
pub fn block_frobenius_sq<R: Rng + ?Sized>(
    op: &dyn VmvOracle,
    l: &DMatrix<f64>,
    r: &DMatrix<f64>,
    pairs: usize,
    rng: &mut R,
) -> Result<(f64, u64)> {
    let (a, b) = (l.ncols(), r.ncols());
    if a == 0 || b == 0 {
        return Ok((0.0, 0));
    }
    let before = op.vmv_queries();
    if a * b <= pairs.max(1) {
        let block = op.sketch_block(l, r)?;
        return Ok((block.norm_squared(), op.vmv_queries() - before));
    }
    let n = pairs.max(1);
    let x = l * rng::gaussian_matrix(rng, a, n, 1.0);
    let y = r * rng::gaussian_matrix(rng, b, n, 1.0);
    let mut sum = 0.0;
    for j in 0..n {
        let v = op.bilinear(&x.column(j).into_owned(), &y.column(j).into_owned())?;
        sum += v * v;
    }
    Ok((sum / n as f64, op.vmv_queries() - before))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{gen_wishart, SymmetricOperator};
    use nalgebra::DVector;

    #[test]
    fn square_embedding_is_isometric() {
        let s = affine_embedding(16, 16, 3).unwrap();
        let x = DVector::from_fn(16, |i, _| (i as f64).sin());
        assert!(((&s * &x).norm_squared() / x.norm_squared() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_embedding_preserves_norms_on_average() {
        let x = DVector::from_fn(64, |i, _| 1.0 + i as f64);
        let mean: f64 =
            (0..200).map(|s| (affine_embedding(32, 64, s).unwrap() * &x).norm_squared()).sum::<f64>() / 200.0;
        assert!((mean / x.norm_squared() - 1.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn embedding_rejects_bad_sizes() {
        assert!(affine_embedding(0, 4, 0).is_err());
        assert!(affine_embedding(5, 4, 0).is_err());
    }

    #[test]
    fn stored_products_match_the_matrix() {
        let op = gen_wishart(20, 1);
        let mut r = rng::stream(2, 0);
        let sk = SpectrumSketch::build(&op, 4, 10, &mut r).unwrap();
        assert_eq!(sk.queries_used, (2 * 10 * 4 + 10 * 10) as u64);
        assert_eq!(op.vmv_queries(), sk.queries_used);
        let a = op.dense();
        let m1 = &sk.s1 * a * &sk.r;
        let q = &sk.s1 * a * sk.s2.transpose();
        assert!((&m1 - &sk.m1).amax() <= 1e-10 * m1.amax());
        assert!((&q - &sk.q).amax() <= 1e-10 * q.amax());
    }

    #[test]
    fn frobenius_exact_when_cheap() {
        let op = SymmetricOperator::diagonal(&[5.0, -3.0, 1.0]);
        let mut r = rng::stream(0, 0);
        let (v, q) = frobenius_sq(&op, 100, &mut r).unwrap();
        assert!((v - 35.0).abs() < 1e-12);
        assert_eq!(q, 6);
    }

    #[test]
    fn frobenius_pairs_are_unbiased() {
        let op = gen_wishart(40, 3);
        let truth = op.dense().norm_squared();
        let mut r = rng::stream(5, 0);
        let (v, q) = frobenius_sq(&op, 20_000, &mut r).unwrap();
        assert!(q == 820);
        assert!((v - truth).abs() < 1e-9 * truth);
        let (v, q) = frobenius_sq(&op, 500, &mut r).unwrap();
        assert_eq!(q, 500);
        assert!((v / truth - 1.0).abs() < 4.0 * (8.0f64 / 500.0).sqrt(), "{v} vs {truth}");
    }

    #[test]
    fn empty_block_is_free() {
        let op = gen_wishart(6, 3);
        let mut r = rng::stream(5, 0);
        let l = DMatrix::zeros(6, 0);
        let id = DMatrix::identity(6, 6);
        assert_eq!(block_frobenius_sq(&op, &l, &id, 10, &mut r).unwrap(), (0.0, 0));
        assert_eq!(op.vmv_queries(), 0);
    }
}
