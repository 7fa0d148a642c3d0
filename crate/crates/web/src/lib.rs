//! Browser bindings for three small demos: the Chebyshev threshold
//! polynomial, an Oja trajectory on a diagonal matrix, and the sketch
//! statistic `γ` on PSD versus far inputs.
//!
//! Each demo is a plain function returning a serializable struct, so it can be
//! tested natively; the `wasm_bindgen` exports wrap them and hand JSON to the
//! page.

use psdprobe::kernels::ThresholdPolynomial;
use psdprobe::oracle::{Bulk, InstanceDescriptor, SymmetricOperator};
use psdprobe::rng;
use psdprobe::vmv_testers::{build_sketch, run_oja, sketch_size, OjaOutcome, SketchConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const DEMO_STREAM: u64 = 0x7765_62;

#[derive(Debug, Serialize)]
pub struct Curve {
    pub degree: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Largest `|p(x)|` over the polynomial's own check grid on `[0, r]`.
    pub grid_max: f64,
}

/// Samples the threshold polynomial at `points` evenly spaced points of
/// `[-alpha, r]`.
pub fn threshold_curve(r: f64, alpha: f64, delta: f64, points: usize) -> Result<Curve, String> {
    let poly = ThresholdPolynomial::new(r, alpha, delta).map_err(|e| e.to_string())?;
    let n = points.clamp(2, 10_000);
    let x: Vec<f64> = (0..n).map(|i| -alpha + (r + alpha) * i as f64 / (n - 1) as f64).collect();
    let y = x.iter().map(|&t| poly.evaluate(t)).collect();
    Ok(Curve { degree: poly.degree(), x, y, grid_max: poly.grid_max_abs() })
}

#[derive(Debug, Serialize)]
pub struct Trajectory {
    /// `f(x) = xᵀAx` for the normalized iterate after each step.
    pub f: Vec<f64>,
    pub outcome: &'static str,
    pub queries: u64,
}

/// Oja's iteration on `diag(-neg, 1, ..., 1)` of size `dim`, with step
/// `eta / ‖A‖₁`.
pub fn oja_trajectory(dim: usize, neg: f64, eta: f64, iters: usize, seed: u64) -> Result<Trajectory, String> {
    if !(2..=2000).contains(&dim) {
        return Err("dim must lie in 2..=2000".into());
    }
    if !(neg >= 0.0 && eta > 0.0 && iters > 0) {
        return Err("need neg >= 0, eta > 0 and iters > 0".into());
    }
    let mut values = vec![1.0; dim];
    values[0] = -neg;
    let op = SymmetricOperator::diagonal(&values);
    let l1: f64 = values.iter().map(|v| v.abs()).sum();
    let mut r = rng::stream(seed, DEMO_STREAM);
    let run = run_oja(&op, eta / l1, iters.min(100_000), l1, true, &mut r).map_err(|e| e.to_string())?;
    let outcome = match run.outcome {
        OjaOutcome::Witness(_) => "witness",
        OjaOutcome::Completed => "completed",
        OjaOutcome::Aborted => "aborted",
    };
    Ok(Trajectory { f: run.f_trace, outcome, queries: run.queries })
}

#[derive(Debug, Serialize)]
pub struct GammaSample {
    pub k: usize,
    pub c_psd: f64,
    pub psd: Vec<f64>,
    pub far: Vec<f64>,
}

/// `γ` over `trials` PSD inputs (flat bulk) and `trials` inputs that are
/// `eps`-far in `ℓ2`, using the default sketch constant.
pub fn gamma_samples(dim: usize, eps: f64, trials: usize, seed: u64) -> Result<GammaSample, String> {
    if !(4..=1024).contains(&dim) || !(eps > 0.0 && eps < 1.0) || !(1..=2000).contains(&trials) {
        return Err("need 4 <= dim <= 1024, 0 < eps < 1 and 1 <= trials <= 2000".into());
    }
    let cfg = SketchConfig::default();
    let k = sketch_size(eps, cfg.kappa).min(dim);
    let gammas = |far: bool| -> Result<Vec<f64>, String> {
        (0..trials as u64)
            .map(|i| {
                let s = seed.wrapping_add(i);
                let desc = if far {
                    InstanceDescriptor::Far { dim, p: 2.0, eps, bulk: Bulk::Flat, depth: 1.0, rotate: false, seed: s }
                } else {
                    InstanceDescriptor::Psd { dim, bulk: Bulk::Uniform, rotate: false, seed: s }
                };
                let op = desc.build().map_err(|e| e.to_string())?;
                let mut r = rng::stream(s, DEMO_STREAM);
                Ok(build_sketch(&op, k, &mut r).map_err(|e| e.to_string())?.gamma)
            })
            .collect()
    };
    Ok(GammaSample { k, c_psd: cfg.c_psd, psd: gammas(false)?, far: gammas(true)? })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = thresholdCurve)]
pub fn threshold_curve_js(r: f64, alpha: f64, delta: f64, points: usize) -> Result<String, JsError> {
    to_js(threshold_curve(r, alpha, delta, points))
}

#[wasm_bindgen(js_name = ojaTrajectory)]
pub fn oja_trajectory_js(dim: usize, neg: f64, eta: f64, iters: usize, seed: u32) -> Result<String, JsError> {
    to_js(oja_trajectory(dim, neg, eta, iters, seed as u64))
}

#[wasm_bindgen(js_name = gammaSamples)]
pub fn gamma_samples_js(dim: usize, eps: f64, trials: usize, seed: u32) -> Result<String, JsError> {
    to_js(gamma_samples(dim, eps, trials, seed as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_is_one_at_the_left_end_and_small_on_the_bulk() {
        let c = threshold_curve(1.0, 0.1, 0.05, 201).unwrap();
        assert!((c.y[0] - 1.0).abs() < 1e-6);
        assert!(c.grid_max <= 0.05 * (1.0 + 1e-6));
        let tail = c.x.iter().zip(&c.y).filter(|(x, _)| **x >= 0.0).map(|(_, y)| y.abs()).fold(0.0, f64::max);
        assert!(tail <= 0.06, "{tail}");
    }

    #[test]
    fn oja_finds_a_large_negative_direction() {
        let t = oja_trajectory(20, 10.0, 0.5, 2000, 3).unwrap();
        assert_eq!(t.outcome, "witness");
        assert!(*t.f.last().unwrap() < 0.0);
    }

    #[test]
    fn oja_never_goes_negative_on_psd() {
        let t = oja_trajectory(20, 0.0, 0.5, 500, 3).unwrap();
        assert_ne!(t.outcome, "witness");
        assert!(t.f.iter().all(|&f| f >= -1e-9));
    }

    #[test]
    fn gamma_separates_at_moderate_size() {
        let g = gamma_samples(256, 0.3, 20, 0).unwrap();
        let psd_max = g.psd.iter().cloned().fold(f64::MIN, f64::max);
        let far_min = g.far.iter().cloned().fold(f64::MAX, f64::min);
        assert!(psd_max < far_min, "{psd_max} vs {far_min}");
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(threshold_curve(1.0, -0.1, 0.05, 10).is_err());
        assert!(oja_trajectory(1, 1.0, 0.5, 10, 0).is_err());
        assert!(gamma_samples(64, 1.5, 10, 0).is_err());
    }
}
