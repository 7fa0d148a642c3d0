//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use psdprobe::rng;

/// `min_{c >= 0} ‖Σ c_j a_j b_jᵀ - B‖²` for at most two terms, by checking
/// every active set.
fn nnls_small(a: &[DVector<f64>], b: &[DVector<f64>], target: &DMatrix<f64>) -> f64 {
    let k = a.len();
    let g = |i: usize, j: usize| a[i].dot(&a[j]) * b[i].dot(&b[j]);
    let h: Vec<f64> = (0..k).map(|j| (a[j].transpose() * target * &b[j])[(0, 0)]).collect();
    let base = target.norm_squared();
    let value = |c: &[f64]| {
        let mut v = base;
        for i in 0..k {
            v -= 2.0 * h[i] * c[i];
            for j in 0..k {
                v += c[i] * c[j] * g(i, j);
            }
        }
        v
    };
    let mut best = base;
    for i in 0..k {
        if g(i, i) > 0.0 {
            let mut c = vec![0.0; k];
            c[i] = (h[i] / g(i, i)).max(0.0);
            best = best.min(value(&c));
        }
    }
    if k == 2 {
        let det = g(0, 0) * g(1, 1) - g(0, 1) * g(0, 1);
        if det.abs() > 1e-14 * g(0, 0) * g(1, 1) {
            let c0 = (h[0] * g(1, 1) - h[1] * g(0, 1)) / det;
            let c1 = (h[1] * g(0, 0) - h[0] * g(0, 1)) / det;
            if c0 >= 0.0 && c1 >= 0.0 {
                best = best.min(value(&[c0, c1]));
            }
        }
    }
    best.max(0.0)
}

/// Cost of the best `Y = U·diag(c)·Uᵀ` for the orthonormalized frame of `x`.
fn frame_cost(x: &[f64], m: usize, k: usize, m1: &DMatrix<f64>, m2: &DMatrix<f64>, target: &DMatrix<f64>) -> f64 {
    let xm = DMatrix::from_column_slice(m, k, x);
    let u = xm.qr().q();
    let a: Vec<DVector<f64>> = (0..k).map(|j| m1 * u.column(j)).collect();
    let b: Vec<DVector<f64>> = (0..k).map(|j| m2 * u.column(j)).collect();
    nnls_small(&a, &b, target)
}

/// Plain Nelder-Mead on `f` from `x0`.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, iters: usize) -> (f64, Vec<f64>) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    for _ in 0..iters {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        if (vals[n] - vals[0]).abs() <= 1e-15 * vals[0].abs().max(1e-300) {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
        } else {
            let xc = if fr < vals[n] { along(-0.5) } else { along(0.5) };
            let fc = f(&xc);
            if fc < vals[n].min(fr) {
                simplex[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    }
                    vals[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    (vals[best], simplex[best].clone())
}

/// Brute-force `min ‖M1·Y·M2ᵀ + Q‖²` over PSD rank-`≤k` `Y`, `k <= 2`.
///
/// Every one of `starts` random frames gets a short Nelder-Mead run with
/// the optimal nonnegative weights computed exactly at each evaluation;
/// the best `polish` results are then refined with restarted Nelder-Mead.
pub fn brute_force_fit(
    m1: &DMatrix<f64>,
    m2: &DMatrix<f64>,
    q: &DMatrix<f64>,
    k: usize,
    starts: usize,
    polish: usize,
    seed: u64,
) -> f64 {
    assert!(k <= 2 && k >= 1);
    let m = m1.ncols();
    let target = -q;
    let f = |x: &[f64]| frame_cost(x, m, k, m1, m2, &target);
    let mut g = rng::stream(seed, 77);
    let mut scored: Vec<(f64, Vec<f64>)> = (0..starts)
        .map(|_| {
            let x: Vec<f64> = (0..m * k).map(|_| rng::gaussian(&mut g)).collect();
            nelder_mead(&f, &x, 0.3, 12 * m * k)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = scored[0].0;
    for (_, x0) in scored.iter().take(polish) {
        let mut x = x0.clone();
        let mut step = 0.1;
        for _ in 0..8 {
            let (v, xn) = nelder_mead(&f, &x, step, 4000);
            best = best.min(v);
            x = xn;
            step *= 0.3;
        }
    }
    best
}

/// Random fit problem shaped like the sketches produce it: at least as many
/// rows as columns, at most 8 of either, `k <= 2`.
pub fn small_fit_instance(seed: u64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, usize) {
    use rand::Rng;
    let mut g = rng::stream(seed, 1);
    let k = 1 + (seed as usize % 2);
    let cols = g.random_range(k.max(2)..=6);
    let a = g.random_range(cols..=8);
    let b = g.random_range(cols..=8);
    let (m1, m2, q) = psdprobe::spectrum::random_fit_problem(&mut g, a, b, cols);
    (m1, m2, q, k)
}
