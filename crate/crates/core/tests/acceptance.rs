//! Acceptance run over all ten criteria. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;

use psdprobe::harness::{
    records_csv, run_experiment, scaling_report, ExperimentConfig, ExperimentReport, Outcome, ScalingOptions,
    ScalingReport, TesterKind, TrialRecord, Truth,
};
use psdprobe::kernels::{hutchinson_trace, sphere_moments, sphere_quadform_variance_exact, ThresholdPolynomial};
use psdprobe::mv_testers::deflation_poly_certificate;
use psdprobe::oracle::{Bulk, InstanceDescriptor, SymmetricOperator};
use psdprobe::rng;
use psdprobe::spectrum::psd_rank_k_fit;

const ONE_SIDED: [TesterKind; 4] =
    [TesterKind::OjaL1, TesterKind::NonadaptiveL1, TesterKind::Krylov, TesterKind::NonadaptiveMv];

/// Everything the later criteria look back at.
#[derive(Default)]
struct Runs {
    /// Configs whose CSV output is checked for reproducibility.
    experiments: Vec<(ExperimentConfig, String)>,
    scaling: Vec<(TesterKind, f64, Vec<f64>, Vec<usize>, ScalingOptions, String)>,
    one_sided: Vec<TrialRecord>,
}

type Outcome2 = Result<(bool, String), String>;

fn experiment(runs: &mut Runs, cfg: ExperimentConfig) -> Result<ExperimentReport, String> {
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    let csv = records_csv(&report.records).map_err(|e| e.to_string())?;
    if ONE_SIDED.contains(&cfg.tester) {
        runs.one_sided.extend(report.records.iter().cloned());
    }
    runs.experiments.push((cfg, csv));
    Ok(report)
}

fn config(
    tester: TesterKind,
    instance: InstanceDescriptor,
    eps: f64,
    trials: usize,
    seed0: u64,
) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(tester, instance, eps, trials);
    cfg.seed0 = seed0;
    cfg.timing = false;
    if tester.native_p().is_none() {
        cfg.p = Some(1.0);
    }
    cfg
}

fn far(dim: usize, p: f64, eps: f64, bulk: Bulk) -> InstanceDescriptor {
    InstanceDescriptor::Far { dim, p, eps, bulk, depth: 1.0, rotate: true, seed: 0 }
}

fn one_sidedness(runs: &mut Runs) -> Outcome2 {
    let families = [
        InstanceDescriptor::Identity { dim: 64 },
        InstanceDescriptor::Wishart { dim: 64, shift: None, seed: 0 },
        InstanceDescriptor::Wishart { dim: 256, shift: None, seed: 0 },
        InstanceDescriptor::Psd { dim: 128, bulk: Bulk::Uniform, rotate: true, seed: 0 },
    ];
    let mut worst = Vec::new();
    let mut total = 0;
    for tester in ONE_SIDED {
        let mut rejections = 0;
        for (i, inst) in families.iter().enumerate() {
            let rep = experiment(runs, config(tester, inst.clone(), 0.1, 250, 1000 * i as u64))?;
            if rep.records.iter().any(|r| r.truth != Truth::Psd) {
                return Err(format!("{tester}: a PSD family produced a non-PSD label"));
            }
            rejections += rep.summary.psd.rejections;
            total += rep.records.len();
        }
        worst.push(format!("{tester} {rejections}"));
    }
    let pass = worst.iter().all(|s| s.ends_with(" 0"));
    Ok((pass, format!("rejections over {total} PSD trials: {}", worst.join(", "))))
}

fn completeness(runs: &mut Runs) -> Outcome2 {
    let mut parts = Vec::new();
    let mut pass = true;
    for tester in ONE_SIDED {
        let mut rates = Vec::new();
        for eps in [0.2, 0.1, 0.05] {
            let rep = experiment(runs, config(tester, far(256, 1.0, eps, Bulk::Flat), eps, 100, 30_000))?;
            if rep.summary.far.count != 100 {
                return Err(format!("{tester}: only {} of 100 instances labelled far", rep.summary.far.count));
            }
            let rate = rep.summary.far.reject_rate.unwrap_or(0.0);
            pass &= rate >= 0.9;
            rates.push(format!("{rate:.2}"));
        }
        parts.push(format!("{tester} {}", rates.join("/")));
    }
    Ok((pass, format!("reject rates at eps 0.2/0.1/0.05: {}", parts.join(", "))))
}

fn gamma_separation(runs: &mut Runs) -> Outcome2 {
    let mut parts = Vec::new();
    let mut pass = true;
    for eps in [0.3, 0.2] {
        let psd_families = [
            (InstanceDescriptor::Identity { dim: 512 }, 67),
            (InstanceDescriptor::Wishart { dim: 512, shift: None, seed: 0 }, 67),
            (InstanceDescriptor::Psd { dim: 512, bulk: Bulk::Uniform, rotate: true, seed: 0 }, 66),
        ];
        let far_families = [(far(512, 2.0, eps, Bulk::Flat), 100), (far(512, 2.0, eps, Bulk::Uniform), 100)];
        let mut records = Vec::new();
        for (i, (inst, n)) in psd_families.into_iter().chain(far_families).enumerate() {
            let cfg = config(TesterKind::BilinearSketch, inst, eps, n, 10_000 + 1000 * i as u64);
            records.extend(experiment(runs, cfg)?.records);
        }
        let side = |t: Truth| records.iter().filter(move |r| r.truth == t);
        let gammas = |t: Truth| side(t).filter_map(|r| r.statistic).collect::<Vec<_>>();
        let acc = |t: Truth| {
            let v: Vec<bool> = side(t).filter_map(TrialRecord::correct).collect();
            v.iter().filter(|&&c| c).count() as f64 / v.len().max(1) as f64
        };
        let (n_psd, n_far) = (side(Truth::Psd).count(), side(Truth::Far).count());
        if n_psd != 200 || n_far != 200 {
            return Err(format!("eps {eps}: {n_psd} PSD and {n_far} far labels, expected 200 each"));
        }
        let p99 = psdprobe::harness::quantile(&gammas(Truth::Psd), 0.99).unwrap();
        let p05 = psdprobe::harness::quantile(&gammas(Truth::Far), 0.05).unwrap();
        let (a_psd, a_far) = (acc(Truth::Psd), acc(Truth::Far));
        pass &= p99 < p05 && a_psd >= 0.9 && a_far >= 0.9;
        parts.push(format!("eps {eps}: psd p99 {p99:.3} < far p05 {p05:.3}, accuracy {a_psd:.3}/{a_far:.3}"));
    }
    Ok((pass, parts.join("; ")))
}

fn slope_in(rep: &ScalingReport, by_dim: bool, lo: f64, hi: f64) -> (bool, String) {
    let fits = if by_dim { &rep.slope_dim } else { &rep.slope_inv_eps };
    let saturated = rep.points.iter().any(|p| p.saturated);
    let ok = !fits.is_empty() && !saturated && fits.iter().all(|f| f.slope >= lo && f.slope <= hi);
    let slopes: Vec<String> = fits.iter().map(|f| format!("{:.3}", f.slope)).collect();
    let what = if by_dim { "vs d" } else { "vs 1/eps" };
    (ok, format!("{} {what} {} in [{lo}, {hi}]", rep.tester, slopes.join("/")))
}

fn scaling(runs: &mut Runs) -> Outcome2 {
    let eps = vec![0.2, 0.1, 0.05, 0.03, 0.02];
    let sweeps: [(TesterKind, f64, Vec<f64>, Vec<usize>, usize, bool, f64, f64); 4] = [
        (TesterKind::Krylov, 1.0, eps.clone(), vec![1024], 200, false, 0.25, 0.45),
        (TesterKind::OjaL1, 1.0, eps.clone(), vec![256], 60, false, 0.85, 1.3),
        (TesterKind::NonadaptiveL1, 1.0, eps, vec![1024], 60, false, 1.7, 2.3),
        (TesterKind::NonadaptiveMv, 2.0, vec![0.3], vec![128, 256, 512, 1024], 60, true, 0.35, 0.65),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (tester, p, eps, dims, trials, by_dim, lo, hi) in sweeps {
        let opts = ScalingOptions { trials, ..Default::default() };
        let rep = scaling_report(tester, p, &eps, &dims, &opts).map_err(|e| e.to_string())?;
        let (ok, text) = slope_in(&rep, by_dim, lo, hi);
        pass &= ok;
        parts.push(text);
        let json = serde_json::to_string(&rep).map_err(|e| e.to_string())?;
        runs.scaling.push((tester, p, eps, dims, opts, json));
    }
    Ok((pass, parts.join("; ")))
}

fn spectrum(runs: &mut Runs) -> Outcome2 {
    let mut pass = true;
    let mut parts = Vec::new();
    for k in 1..=3usize {
        for eps in [0.2, 0.1] {
            let inst = InstanceDescriptor::SignedTop { dim: 32, top: 4, bulk_scale: 0.1, seed: 0 };
            let mut cfg = config(TesterKind::Spectrum, inst, eps, 100, 20_000);
            cfg.constants.insert("k".into(), k as f64);
            let rep = experiment(runs, cfg)?;
            let rate = rep.summary.pass_rate.unwrap_or(0.0);
            pass &= rate >= 0.9;
            parts.push(format!("k {k} eps {eps}: {rate:.2}"));
        }
    }
    Ok((pass, format!("guarantee pass rates {}", parts.join(", "))))
}

fn unit_vector<R: Rng>(r: &mut R, d: usize) -> DVector<f64> {
    rng::unit_vector(r, d)
}

fn closed_forms() -> Outcome2 {
    let mut r = rng::stream(7, 7);
    let n = 1_000_000;
    let mut worst_moment = 0.0f64;
    for d in [2, 3, 5, 10] {
        let (a4, a22) = sphere_moments(d).map_err(|e| e.to_string())?;
        let (mut s4, mut s22) = (0.0, 0.0);
        for _ in 0..n {
            let u = unit_vector(&mut r, d);
            s4 += u[0].powi(4);
            s22 += u[0] * u[0] * u[1] * u[1];
        }
        worst_moment = worst_moment.max((s4 / n as f64 / a4 - 1.0).abs()).max((s22 / n as f64 / a22 - 1.0).abs());
    }
    let mut worst_var = 0.0f64;
    for i in 0..10 {
        let d = 3 + i % 6;
        let g = rng::gaussian_matrix(&mut r, d, d, 1.0);
        let m = (&g + g.transpose()) * 0.5;
        let exact = sphere_quadform_variance_exact(&m);
        let samples = 400_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..samples {
            let u = unit_vector(&mut r, d);
            let v = u.dot(&(&m * &u));
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / samples as f64;
        let var = s2 / samples as f64 - mean * mean;
        worst_var = worst_var.max((var / exact - 1.0).abs());
    }
    let g = rng::gaussian_matrix(&mut r, 20, 20, 1.0);
    let a = (&g + g.transpose()) * 0.5;
    let fro2 = a.norm_squared();
    let op = SymmetricOperator::from_dense(a, 0).map_err(|e| e.to_string())?;
    let samples = 400_000;
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let v = hutchinson_trace(&op, 1, &mut r).map_err(|e| e.to_string())?.value;
        s1 += v;
        s2 += v * v;
    }
    let mean = s1 / samples as f64;
    let hutch = ((s2 / samples as f64 - mean * mean) / (2.0 * fro2) - 1.0).abs();
    let pass = worst_moment < 0.02 && worst_var < 0.02 && hutch < 0.05;
    Ok((
        pass,
        format!(
            "worst relative errors: sphere moments {:.4}, quadform variance {:.4}, Hutchinson variance {:.4}",
            worst_moment, worst_var, hutch
        ),
    ))
}

fn certificates() -> Outcome2 {
    let mut checked = 0;
    let mut failures = Vec::new();
    for &r in &[0.5, 1.0, 10.0] {
        for &alpha in &[0.001, 0.01, 0.1, 1.0] {
            for &delta in &[0.3, 0.1, 0.01, 1e-4] {
                let q = ThresholdPolynomial::new(r, alpha, delta).map_err(|e| e.to_string())?;
                checked += 1;
                if (q.evaluate(-alpha) - 1.0).abs() > 1e-6 || q.grid_max_abs() > delta * (1.0 + 1e-6) {
                    failures.push(format!("threshold r {r} alpha {alpha} delta {delta}"));
                }
            }
        }
    }
    for &p in &[1.0, 2.0, 3.0] {
        for &eps in &[0.1, 0.05, 0.02] {
            for &d in &[50usize, 200] {
                for bulk in [Bulk::Flat, Bulk::Harmonic { a: 1.0 }, Bulk::Uniform] {
                    let mut spec = bulk.values(d - 1, 3);
                    spec.push(0.0);
                    let x = psdprobe::oracle::far_magnitude(&spec[..d - 1], p, eps);
                    spec[d - 1] = -x;
                    let norm = psdprobe::kernels::schatten_norm(&spec, p);
                    let spec: Vec<f64> = spec.iter().map(|v| v / norm).collect();
                    let t = (eps.powf(-p / (2.0 * p + 1.0))).ceil() as usize;
                    let (poly, mass) = deflation_poly_certificate(&spec, eps, p, t).map_err(|e| e.to_string())?;
                    checked += 1;
                    let q = &poly.q;
                    let grid_max = (0..10_000)
                        .map(|i| poly.evaluate(q.r() * i as f64 / 9_999.0).abs())
                        .fold(0.0, f64::max);
                    let at_min = poly.evaluate(poly.lambda_min);
                    if (at_min - 1.0).abs() > 1e-6 || grid_max > q.delta() * (1.0 + 1e-6) || mass > eps / 10.0 {
                        failures.push(format!("deflation p {p} eps {eps} d {d} {bulk:?}: mass {mass:.2e}"));
                    }
                }
            }
        }
    }
    Ok((failures.is_empty(), format!("{} of {checked} certificates failed {:?}", failures.len(), failures)))
}

fn fit_oracle() -> Outcome2 {
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    for seed in 0..50u64 {
        let (m1, m2, q, k) = common::small_fit_instance(seed);
        let fit = psd_rank_k_fit(&m1, &m2, &q, k).map_err(|e| e.to_string())?;
        let oracle = common::brute_force_fit(&m1, &m2, &q, k, 10_000, 5, seed);
        let rel = (fit.cost - oracle).abs() / oracle.max(1e-12);
        worst = worst.max(rel);
        if rel >= 1e-4 {
            failed.push(seed);
        }
    }
    Ok((failed.is_empty(), format!("50 instances, worst relative gap {worst:.2e}, failing seeds {failed:?}")))
}

fn witnesses(runs: &Runs) -> Outcome2 {
    let rejections: Vec<&TrialRecord> = runs.one_sided.iter().filter(|r| r.verdict == Outcome::Reject).collect();
    let valid = rejections.iter().filter(|r| r.witness_valid == Some(true)).count();
    Ok((valid == rejections.len(), format!("{valid} of {} one-sided rejections carry a valid witness", rejections.len())))
}

/// Reruns every recorded experiment and sweep in a three-thread pool and
/// compares the outputs byte for byte.
fn determinism(runs: &Runs) -> Outcome2 {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().map_err(|e| e.to_string())?;
    let mut mismatched = Vec::new();
    pool.install(|| -> Result<(), String> {
        for (cfg, csv) in &runs.experiments {
            let rep = run_experiment(cfg).map_err(|e| e.to_string())?;
            if &records_csv(&rep.records).map_err(|e| e.to_string())? != csv {
                mismatched.push(format!("{} on {:?}", cfg.tester, cfg.instance));
            }
        }
        for (tester, p, eps, dims, opts, json) in &runs.scaling {
            let rep = scaling_report(*tester, *p, eps, dims, opts).map_err(|e| e.to_string())?;
            if &serde_json::to_string(&rep).map_err(|e| e.to_string())? != json {
                mismatched.push(format!("{tester} sweep"));
            }
        }
        Ok(())
    })?;
    let total = runs.experiments.len() + runs.scaling.len();
    Ok((mismatched.is_empty(), format!("{} of {total} outputs reproduced {:?}", total - mismatched.len(), mismatched)))
}

fn main() {
    let mut runs = Runs::default();
    let mut results: Vec<(u8, &str, Outcome2, f64)> = Vec::new();
    let mut time = |id: u8, name: &'static str, f: &mut dyn FnMut() -> Outcome2| {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &out {
            Ok((true, d)) => ("PASS", d.clone()),
            Ok((false, d)) => ("FAIL", d.clone()),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        println!("criterion {id:>2} {name:<28} {tag}  {detail}  ({secs:.1} s)");
        results.push((id, name, out, secs));
    };
    time(1, "one-sidedness", &mut || one_sidedness(&mut runs));
    time(3, "completeness", &mut || completeness(&mut runs));
    time(4, "gamma separation", &mut || gamma_separation(&mut runs));
    time(5, "query scaling", &mut || scaling(&mut runs));
    time(6, "spectrum guarantee", &mut || spectrum(&mut runs));
    time(7, "closed-form oracles", &mut closed_forms);
    time(8, "chebyshev certificates", &mut certificates);
    time(9, "fit oracle equivalence", &mut fit_oracle);
    time(2, "witness validity", &mut || witnesses(&runs));
    time(10, "determinism", &mut || determinism(&runs));
    let failed: BTreeMap<u8, &str> =
        results.iter().filter(|r| !matches!(r.2, Ok((true, _)))).map(|r| (r.0, r.1)).collect();
    if failed.is_empty() {
        println!("all 10 criteria passed");
    } else {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
