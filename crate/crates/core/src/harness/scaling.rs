use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{TesterKind, TesterParams};
use super::run::{run_trials, TrialRecord, Truth};
use crate::error::{Error, Result};
use crate::oracle::{Bulk, InstanceDescriptor};

/// Settings of a scaling sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingOptions {
    /// Trials per probe of the bisection.
    pub trials: usize,
    /// Required success rate.
    pub target: f64,
    /// Bisection steps on `log κ`.
    pub steps: usize,
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    pub seed0: u64,
    /// Constants passed to the tester, on top of [`sweep_constants`].
    pub constants: BTreeMap<String, f64>,
    /// Bulk of the instances, instead of the tester's default.
    pub bulk: Option<Bulk>,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            trials: 40,
            target: 0.9,
            steps: 7,
            kappa_lo: 1.0 / 64.0,
            kappa_hi: 4.0,
            seed0: 0,
            constants: BTreeMap::new(),
            bulk: None,
        }
    }
}

/// Default bulk of the scaling family: harmonic for Krylov, on which a
/// flat spectrum would be trivially easy, flat otherwise.
pub fn default_bulk(tester: TesterKind) -> Bulk {
    match tester {
        TesterKind::Krylov => Bulk::Harmonic { a: 1.0 },
        _ => Bulk::Flat,
    }
}

/// Repetitions every sweep runs the one-sided testers with.
pub const SWEEP_REPS: f64 = 3.0;

/// Constants every sweep starts from. With a fixed number of repetitions
/// `r` each run only needs success `1 - 0.1^(1/r)`, near its median for
/// `r = 3`. At the 0.9 quantile of a single run the spread of small
/// sketches (a `χ²_m` with few degrees of freedom) would dominate the
/// budget at large `ε` and flatten the fitted slope, while the repetitions
/// themselves only multiply the budget by a constant.
pub fn sweep_constants(tester: TesterKind) -> BTreeMap<String, f64> {
    let key = match tester {
        TesterKind::OjaL1 | TesterKind::AdaptiveL2 => "amplification",
        TesterKind::NonadaptiveL1 | TesterKind::Krylov | TesterKind::NonadaptiveMv => "reps",
        _ => return BTreeMap::new(),
    };
    [(key.to_string(), SWEEP_REPS)].into_iter().collect()
}

/// The far family a tester's scaling is measured on, and for two-sided
/// testers the PSD bulk alone. Spectra stay diagonal, which leaves every
/// tester's outcome distribution unchanged.
pub fn scaling_family(
    tester: TesterKind,
    bulk: Bulk,
    p: f64,
    eps: f64,
    dim: usize,
) -> (InstanceDescriptor, Option<InstanceDescriptor>) {
    let far = InstanceDescriptor::Far { dim, p, eps, bulk, depth: 1.0, rotate: false, seed: 0 };
    let psd = (!tester.is_one_sided()).then_some(InstanceDescriptor::Psd { dim, bulk, rotate: false, seed: 0 });
    (far, psd)
}

/// Outcome of one `(ε, d)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub eps: f64,
    pub dim: usize,
    /// Smallest size constant found to reach the target.
    pub kappa: f64,
    /// Mean queries per trial at that constant.
    pub queries: f64,
    pub success: f64,
    /// The target was not reached even at the largest constant tried.
    pub saturated: bool,
}

/// Least-squares line `log y = slope·log x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// `d` for fits against `1/ε`, `ε` for fits against `d`.
    pub fixed: f64,
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub tester: TesterKind,
    pub p: f64,
    pub points: Vec<ScalingPoint>,
    /// Queries against `1/ε`, one fit per dimension.
    pub slope_inv_eps: Vec<SlopeFit>,
    /// Queries against `d`, one fit per accuracy.
    pub slope_dim: Vec<SlopeFit>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn success(records: &[TrialRecord]) -> f64 {
    let labelled: Vec<bool> = records.iter().filter_map(TrialRecord::correct).collect();
    if labelled.is_empty() {
        return 0.0;
    }
    labelled.iter().filter(|&&c| c).count() as f64 / labelled.len() as f64
}

fn mean_queries(records: &[TrialRecord], truth: Truth) -> f64 {
    let q: Vec<u64> =
        records.iter().filter(|r| r.truth == truth).map(|r| r.queries_mv + r.queries_vmv).collect();
    q.iter().sum::<u64>() as f64 / q.len().max(1) as f64
}

/// Success rate (worst side) and far-side mean queries at constant `kappa`.
fn probe(
    tester: TesterKind,
    p: f64,
    eps: f64,
    dim: usize,
    kappa: f64,
    opts: &ScalingOptions,
) -> Result<(f64, f64)> {
    let mut constants = sweep_constants(tester);
    constants.extend(opts.constants.clone());
    constants.insert(tester.size_constant().to_string(), kappa);
    let params = TesterParams::new(tester, eps, p, &constants)?;
    let (far, psd) = scaling_family(tester, opts.bulk.unwrap_or(default_bulk(tester)), p, eps, dim);
    let far_records = run_trials(&params, &far, opts.seed0, opts.trials, false)?;
    let mut rate = success(&far_records);
    if let Some(psd) = psd {
        rate = rate.min(success(&run_trials(&params, &psd, opts.seed0, opts.trials, false)?));
    }
    Ok((rate, mean_queries(&far_records, Truth::Far)))
}

/// Per `(ε, d)`, bisects the tester's size constant on a log scale for the
/// smallest value whose success rate reaches the target, then fits log-log
/// slopes of the resulting query counts.
pub fn scaling_report(
    tester: TesterKind,
    p: f64,
    eps_list: &[f64],
    d_list: &[usize],
    opts: &ScalingOptions,
) -> Result<ScalingReport> {
    if eps_list.is_empty() || d_list.is_empty() {
        return Err(Error::Config("scaling needs at least one eps and one dimension".into()));
    }
    if tester.is_spectrum() {
        return Err(Error::Config("scaling sweeps apply to the PSD testers only".into()));
    }
    if let Some(n) = tester.native_p() {
        if n != p {
            return Err(Error::Config(format!("{tester} is a p = {n} tester")));
        }
    }
    if !(opts.kappa_lo > 0.0 && opts.kappa_hi > opts.kappa_lo) || opts.trials == 0 {
        return Err(Error::Config("need 0 < kappa_lo < kappa_hi and at least one trial".into()));
    }
    let mut points = Vec::new();
    for &dim in d_list {
        for &eps in eps_list {
            if !(eps > 0.0 && eps < 1.0) || dim < 2 {
                return Err(Error::Config(format!("bad scaling cell eps = {eps}, d = {dim}")));
            }
            let (mut hi, mut lo) = (opts.kappa_hi, opts.kappa_lo);
            let (mut best_rate, mut best_q) = probe(tester, p, eps, dim, hi, opts)?;
            let saturated = best_rate < opts.target;
            if !saturated {
                let (rate_lo, q_lo) = probe(tester, p, eps, dim, lo, opts)?;
                if rate_lo >= opts.target {
                    hi = lo;
                    best_rate = rate_lo;
                    best_q = q_lo;
                } else {
                    for _ in 0..opts.steps {
                        let mid = (lo * hi).sqrt();
                        let (rate, q) = probe(tester, p, eps, dim, mid, opts)?;
                        if rate >= opts.target {
                            hi = mid;
                            best_rate = rate;
                            best_q = q;
                        } else {
                            lo = mid;
                        }
                    }
                }
            }
            points.push(ScalingPoint { eps, dim, kappa: hi, queries: best_q, success: best_rate, saturated });
        }
    }
    let mut slope_inv_eps = Vec::new();
    for &dim in d_list {
        let cell: Vec<&ScalingPoint> = points.iter().filter(|p| p.dim == dim).collect();
        let xs: Vec<f64> = cell.iter().map(|p| 1.0 / p.eps).collect();
        let ys: Vec<f64> = cell.iter().map(|p| p.queries).collect();
        if let Some((slope, intercept)) = loglog_fit(&xs, &ys) {
            slope_inv_eps.push(SlopeFit { fixed: dim as f64, slope, intercept, points: xs.len() });
        }
    }
    let mut slope_dim = Vec::new();
    for &eps in eps_list {
        let cell: Vec<&ScalingPoint> = points.iter().filter(|p| p.eps == eps).collect();
        let xs: Vec<f64> = cell.iter().map(|p| p.dim as f64).collect();
        let ys: Vec<f64> = cell.iter().map(|p| p.queries).collect();
        if let Some((slope, intercept)) = loglog_fit(&xs, &ys) {
            slope_dim.push(SlopeFit { fixed: eps, slope, intercept, points: xs.len() });
        }
    }
    Ok(ScalingReport { tester, p, points, slope_inv_eps, slope_dim })
}

impl ScalingReport {
    /// Plain-text table.
    pub fn table(&self) -> String {
        let mut out = format!("tester {} p {}\n{:>8} {:>6} {:>10} {:>12} {:>8}\n", self.tester, self.p, "eps", "d", "kappa", "queries", "success");
        for pt in &self.points {
            out += &format!(
                "{:>8} {:>6} {:>10.4} {:>12.1} {:>8.3}{}\n",
                pt.eps,
                pt.dim,
                pt.kappa,
                pt.queries,
                pt.success,
                if pt.saturated { " (saturated)" } else { "" }
            );
        }
        for f in &self.slope_inv_eps {
            out += &format!("slope vs 1/eps at d = {}: {:.3}\n", f.fixed, f.slope);
        }
        for f in &self.slope_dim {
            out += &format!("slope vs d at eps = {}: {:.3}\n", f.fixed, f.slope);
        }
        out
    }
}
