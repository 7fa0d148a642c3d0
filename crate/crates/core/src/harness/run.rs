use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, TesterKind, TesterParams};
use crate::error::{contract, Error, Result};
use crate::kernels::schatten_norm;
use crate::mv_testers::{krylov_tester, nonadaptive_mv_tester};
use crate::oracle::{InstanceDescriptor, SymmetricOperator};
use crate::rng;
use crate::spectrum::{check_signed_guarantee, top_eigs_signed, top_eigs_signed_adaptive, EigenEstimate};
use crate::vmv_testers::{adaptive_l2_tester, bilinear_sketch_tester, nonadaptive_l1_tester, oja_l1_tester};
use crate::Verdict;

/// Substream of the trial seed that the tester draws from, apart from the
/// instance generator.
const TESTER_STREAM: u64 = 0x7465_7374;

/// Exact label of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    Psd,
    Far,
    /// Inside the promise gap: neither PSD nor far enough.
    Gap,
    /// Spectrum estimation trials have no PSD label.
    #[serde(rename = "na")]
    NotApplicable,
}

/// `psd` if `λ_min >= -1e-10·max|λ|`, `far` if `λ_min <= -ε‖A‖_p` up to a
/// relative `1e-9`, `gap` otherwise.
pub fn label_truth(eigenvalues: &[f64], eps: f64, p: f64) -> Truth {
    let lmin = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if lmin >= -1e-10 * scale {
        Truth::Psd
    } else if lmin <= -eps * schatten_norm(eigenvalues, p) * (1.0 - 1e-9) {
        Truth::Far
    } else {
        Truth::Gap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accept,
    Reject,
    /// Spectrum trial meeting the signed-eigenvalue guarantee.
    Pass,
    Fail,
}

/// One row of the trial table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub truth: Truth,
    pub verdict: Outcome,
    pub queries_mv: u64,
    pub queries_vmv: u64,
    /// `γ` for the sketch testers; the largest error over `‖A‖_F` for
    /// spectrum trials.
    pub statistic: Option<f64>,
    pub witness_valid: Option<bool>,
    pub wall_time_ms: Option<f64>,
}

impl TrialRecord {
    pub fn rejected(&self) -> bool {
        self.verdict == Outcome::Reject
    }

    /// Correct answer for the label; `None` inside the gap.
    pub fn correct(&self) -> Option<bool> {
        match (self.truth, self.verdict) {
            (Truth::Psd, v) => Some(v == Outcome::Accept),
            (Truth::Far, v) => Some(v == Outcome::Reject),
            (Truth::NotApplicable, v) => Some(v == Outcome::Pass),
            (Truth::Gap, _) => None,
        }
    }
}

pub enum TesterOutput {
    Verdict(Verdict),
    Spectrum(EigenEstimate),
}

/// Runs a resolved tester once on `op`.
pub fn run_tester<R: rand::Rng + ?Sized>(params: &TesterParams, op: &SymmetricOperator, rng: &mut R) -> Result<TesterOutput> {
    let eps = params.eps;
    let v = match params.kind {
        TesterKind::OjaL1 => oja_l1_tester(op, eps, &params.oja(), rng)?,
        TesterKind::BilinearSketch => bilinear_sketch_tester(op, eps, &params.sketch(), rng)?,
        TesterKind::AdaptiveL2 => adaptive_l2_tester(op, eps, &params.l2(), rng)?,
        TesterKind::NonadaptiveL1 => {
            nonadaptive_l1_tester(op, eps, params.get("kappa_nonadaptive"), params.reps(), rng)?
        }
        TesterKind::Krylov => krylov_tester(op, eps, params.p, None, &params.krylov(), rng)?,
        TesterKind::NonadaptiveMv => {
            nonadaptive_mv_tester(op, eps, params.p, params.get("kappa_mv"), params.reps(), rng)?
        }
        TesterKind::Spectrum => {
            return Ok(TesterOutput::Spectrum(top_eigs_signed(op, params.spectrum_k(), eps, &params.spectrum(), rng)?))
        }
        TesterKind::SpectrumAdaptive => {
            return Ok(TesterOutput::Spectrum(top_eigs_signed_adaptive(
                op,
                params.spectrum_k(),
                eps,
                &params.spectrum(),
                rng,
            )?))
        }
    };
    Ok(TesterOutput::Verdict(v))
}

/// Builds the instance for `seed`, labels it exactly, runs the tester and
/// checks the reported query count against the oracle counters.
pub fn run_trial(params: &TesterParams, instance: &InstanceDescriptor, seed: u64, timing: bool) -> Result<TrialRecord> {
    let op = instance.with_seed(seed).build()?;
    let eigenvalues = op.eigenvalues();
    let truth = if params.kind.is_spectrum() {
        Truth::NotApplicable
    } else {
        label_truth(&eigenvalues, params.eps, params.p)
    };
    let mut rng = rng::stream(seed, TESTER_STREAM);
    let before = op.counts();
    let start = Instant::now();
    let out = run_tester(params, &op, &mut rng)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let spent = op.counts() - before;
    let mut rec = TrialRecord {
        seed,
        truth,
        verdict: Outcome::Accept,
        queries_mv: spent.mv,
        queries_vmv: spent.vmv,
        statistic: None,
        witness_valid: None,
        wall_time_ms: timing.then_some(elapsed),
    };
    match out {
        TesterOutput::Verdict(v) => {
            let (reported, other) = if params.kind.uses_mv() { (spent.mv, spent.vmv) } else { (spent.vmv, spent.mv) };
            if v.queries_used != reported || other != 0 {
                return Err(contract(format!(
                    "{}: reported {} queries, counters show mv {} vmv {}",
                    params.kind, v.queries_used, spent.mv, spent.vmv
                )));
            }
            rec.verdict = if v.is_psd { Outcome::Accept } else { Outcome::Reject };
            rec.statistic = v.statistic;
            rec.witness_valid = v.witness.as_ref().map(|w| op.quad_form_uncounted(w) < 0.0);
        }
        TesterOutput::Spectrum(est) => {
            if est.queries != spent.vmv || spent.mv != 0 {
                return Err(contract(format!(
                    "{}: reported {} queries, counters show mv {} vmv {}",
                    params.kind, est.queries, spent.mv, spent.vmv
                )));
            }
            let check = check_signed_guarantee(&eigenvalues, &est.values, params.eps);
            rec.verdict = if check.passed() { Outcome::Pass } else { Outcome::Fail };
            rec.statistic = Some(check.max_error);
        }
    }
    Ok(rec)
}

/// Runs `f(i)` for `i < n`, in parallel when the feature is on. Results come
/// back in index order either way.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Trials `seed0 .. seed0 + trials` of one tester on one family.
pub fn run_trials(
    params: &TesterParams,
    instance: &InstanceDescriptor,
    seed0: u64,
    trials: usize,
    timing: bool,
) -> Result<Vec<TrialRecord>> {
    map_indexed(trials, |i| run_trial(params, instance, seed0 + i as u64, timing)).into_iter().collect()
}

/// Reject counts on one side of the promise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideSummary {
    pub count: usize,
    pub rejections: usize,
    pub reject_rate: Option<f64>,
}

impl SideSummary {
    fn of<'a>(records: impl Iterator<Item = &'a TrialRecord>) -> Self {
        let (mut count, mut rejections) = (0, 0);
        for r in records {
            count += 1;
            rejections += usize::from(r.rejected());
        }
        let reject_rate = (count > 0).then(|| rejections as f64 / count as f64);
        Self { count, rejections, reject_rate }
    }
}

/// Linear-interpolation quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p05: f64,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
}

/// Quantile `q` of `values` by linear interpolation between order
/// statistics.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (pos - lo as f64) * (v[hi] - v[lo]))
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        Some(Self {
            p05: quantile(values, 0.05)?,
            p50: quantile(values, 0.5)?,
            p95: quantile(values, 0.95)?,
            p99: quantile(values, 0.99)?,
        })
    }
}

/// Aggregates of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tester: TesterKind,
    pub eps: f64,
    pub p: f64,
    pub trials: usize,
    pub psd: SideSummary,
    pub far: SideSummary,
    /// Trials in the promise gap, left out of every rate.
    pub gap_excluded: usize,
    /// Fraction of labelled trials answered correctly.
    pub accuracy: Option<f64>,
    pub mean_queries: f64,
    pub max_queries: u64,
    pub statistic_psd: Option<Quantiles>,
    pub statistic_far: Option<Quantiles>,
    /// Spectrum trials: fraction meeting the guarantee.
    pub pass_rate: Option<f64>,
    pub witnesses_checked: usize,
    pub witnesses_invalid: usize,
}

pub fn summarize(params: &TesterParams, records: &[TrialRecord]) -> Summary {
    let queries = |r: &TrialRecord| r.queries_mv + r.queries_vmv;
    let labelled: Vec<bool> = records.iter().filter_map(TrialRecord::correct).collect();
    let stats = |t: Truth| -> Vec<f64> { records.iter().filter(|r| r.truth == t).filter_map(|r| r.statistic).collect() };
    let spectrum = params.kind.is_spectrum();
    Summary {
        tester: params.kind,
        eps: params.eps,
        p: params.p,
        trials: records.len(),
        psd: SideSummary::of(records.iter().filter(|r| r.truth == Truth::Psd)),
        far: SideSummary::of(records.iter().filter(|r| r.truth == Truth::Far)),
        gap_excluded: records.iter().filter(|r| r.truth == Truth::Gap).count(),
        accuracy: (!labelled.is_empty())
            .then(|| labelled.iter().filter(|&&c| c).count() as f64 / labelled.len() as f64),
        mean_queries: if records.is_empty() {
            0.0
        } else {
            records.iter().map(queries).sum::<u64>() as f64 / records.len() as f64
        },
        max_queries: records.iter().map(queries).max().unwrap_or(0),
        statistic_psd: Quantiles::of(&stats(Truth::Psd)),
        statistic_far: Quantiles::of(&stats(Truth::Far)),
        pass_rate: spectrum.then(|| {
            records.iter().filter(|r| r.verdict == Outcome::Pass).count() as f64 / records.len().max(1) as f64
        }),
        witnesses_checked: records.iter().filter(|r| r.witness_valid.is_some()).count(),
        witnesses_invalid: records.iter().filter(|r| r.witness_valid == Some(false)).count(),
    }
}

/// Records and summary of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub summary: Summary,
    pub records: Vec<TrialRecord>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let params = cfg.params()?;
    let records = run_trials(&params, &cfg.instance, cfg.seed0, cfg.trials, cfg.timing)?;
    Ok(ExperimentReport { config: cfg.clone(), summary: summarize(&params, &records), records })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::Config(format!("unknown format '{s}', expected csv or json"))),
        }
    }
}

/// The trial table as CSV text, header first.
pub fn records_csv(records: &[TrialRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub const CSV_HEADER: [&str; 8] =
    ["seed", "truth", "verdict", "queries_mv", "queries_vmv", "statistic", "witness_valid", "wall_time_ms"];

/// Writes `trials.csv` or `trials.json` plus `summary.json` into `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let trials = match format {
        Format::Csv => {
            let path = dir.join("trials.csv");
            std::fs::write(&path, records_csv(&report.records)?)?;
            path
        }
        Format::Json => {
            let path = dir.join("trials.json");
            std::fs::write(&path, serde_json::to_string_pretty(&report.records)?)?;
            path
        }
    };
    let summary = dir.join("summary.json");
    let body = serde_json::json!({ "config": report.config, "summary": report.summary });
    std::fs::write(&summary, serde_json::to_string_pretty(&body)? + "\n")?;
    Ok(vec![trials, summary])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Bulk;

    #[test]
    fn labels() {
        assert_eq!(label_truth(&[0.0, 1.0], 0.1, 1.0), Truth::Psd);
        assert_eq!(label_truth(&[-0.1, 0.9], 0.1, 1.0), Truth::Far);
        assert_eq!(label_truth(&[-0.05, 0.95], 0.1, 1.0), Truth::Gap);
        assert_eq!(label_truth(&[-1e-14, 1.0], 0.1, 1.0), Truth::Psd);
    }

    #[test]
    fn quantiles_interpolate() {
        let v: Vec<f64> = (0..=100).map(f64::from).collect();
        assert_eq!(quantile(&v, 0.05), Some(5.0));
        assert_eq!(quantile(&[1.0, 2.0], 0.5), Some(1.5));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn identity_is_never_rejected_and_csv_has_header() {
        let mut cfg = ExperimentConfig::new(TesterKind::OjaL1, InstanceDescriptor::Identity { dim: 12 }, 0.2, 7);
        cfg.timing = false;
        let rep = run_experiment(&cfg).unwrap();
        assert_eq!(rep.summary.psd.count, 7);
        assert_eq!(rep.summary.psd.rejections, 0);
        let csv = records_csv(&rep.records).unwrap();
        assert_eq!(csv.lines().count(), 8);
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER.join(","));
        let row = csv.lines().nth(1).unwrap();
        assert!(row.starts_with("0,psd,accept,0,") && row.ends_with(",,,"), "{row}");
        assert_eq!(records_csv(&[]).unwrap().trim_end(), CSV_HEADER.join(","));
    }

    #[test]
    fn far_rejections_carry_valid_witnesses() {
        let far = InstanceDescriptor::Far { dim: 40, p: 1.0, eps: 0.2, bulk: Bulk::Flat, depth: 1.0, rotate: true, seed: 0 };
        for tester in [TesterKind::NonadaptiveL1, TesterKind::Krylov, TesterKind::NonadaptiveMv, TesterKind::OjaL1] {
            let mut cfg = ExperimentConfig::new(tester, far.clone(), 0.2, 5);
            cfg.p = Some(1.0);
            let rep = run_experiment(&cfg).unwrap();
            assert_eq!(rep.summary.far.count, 5);
            assert!(rep.records.iter().filter(|r| r.rejected()).all(|r| r.witness_valid == Some(true)), "{tester}");
            assert!(rep.records.iter().all(|r| r.wall_time_ms.is_some()));
        }
    }

    #[test]
    fn spectrum_trials_pass_on_separated_instances() {
        let inst = InstanceDescriptor::SignedTop { dim: 16, top: 2, bulk_scale: 0.05, seed: 0 };
        let mut cfg = ExperimentConfig::new(TesterKind::Spectrum, inst, 0.2, 3);
        cfg.constants.insert("k".into(), 2.0);
        let rep = run_experiment(&cfg).unwrap();
        assert_eq!(rep.summary.pass_rate, Some(1.0));
        assert!(rep.records.iter().all(|r| r.truth == Truth::NotApplicable));
    }

    #[test]
    fn outputs_are_written() {
        let dir = std::env::temp_dir().join(format!("psdprobe-run-{}", std::process::id()));
        let mut cfg = ExperimentConfig::new(TesterKind::BilinearSketch, InstanceDescriptor::Identity { dim: 10 }, 0.3, 3);
        cfg.timing = false;
        let rep = run_experiment(&cfg).unwrap();
        for format in [Format::Csv, Format::Json] {
            let paths = write_report(&rep, &dir, format).unwrap();
            assert!(paths.iter().all(|p| p.exists()));
        }
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["summary"]["trials"], 3);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
