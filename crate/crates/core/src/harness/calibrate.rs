use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{TesterKind, TesterParams};
use super::run::{quantile, run_trials, TrialRecord, Truth};
use crate::error::{Error, Result};
use crate::oracle::{Bulk, InstanceDescriptor};

/// Calibration suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Threshold on `γ` between PSD and far sketches.
    CPsd,
    KappaSketch,
    KappaOja,
    KappaKrylov,
    KappaNonadaptive,
    KappaMv,
    /// Row constant of the spectrum estimator's embeddings.
    EmbedRows,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Self::CPsd,
        Self::KappaSketch,
        Self::KappaOja,
        Self::KappaKrylov,
        Self::KappaNonadaptive,
        Self::KappaMv,
        Self::EmbedRows,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::CPsd => "c_psd",
            Self::KappaSketch => "kappa_sketch",
            Self::KappaOja => "kappa_oja",
            Self::KappaKrylov => "kappa_krylov",
            Self::KappaNonadaptive => "kappa_nonadaptive",
            Self::KappaMv => "kappa_mv",
            Self::EmbedRows => "embed_rows",
        }
    }

    fn tester(self) -> TesterKind {
        match self {
            Self::CPsd | Self::KappaSketch => TesterKind::BilinearSketch,
            Self::KappaOja => TesterKind::OjaL1,
            Self::KappaKrylov => TesterKind::Krylov,
            Self::KappaNonadaptive => TesterKind::NonadaptiveL1,
            Self::KappaMv => TesterKind::NonadaptiveMv,
            Self::EmbedRows => TesterKind::Spectrum,
        }
    }

    fn default_dims(self) -> Vec<usize> {
        match self {
            Self::CPsd | Self::KappaSketch => vec![512],
            Self::EmbedRows => vec![32],
            _ => vec![256],
        }
    }

    fn default_eps(self) -> Vec<f64> {
        match self {
            Self::CPsd | Self::KappaSketch => vec![0.3, 0.2],
            Self::EmbedRows => vec![0.2, 0.1],
            _ => vec![0.2, 0.1, 0.05],
        }
    }

    /// Candidate values, smallest first.
    fn grid(self) -> Vec<f64> {
        match self {
            Self::CPsd => vec![],
            Self::KappaSketch => vec![0.5, 1.0, 2.0, 4.0, 8.0],
            Self::KappaOja => vec![0.125, 0.25, 0.5, 1.0, 2.0, 4.0],
            Self::KappaKrylov | Self::KappaNonadaptive | Self::KappaMv => vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
            Self::EmbedRows => vec![0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 40.0],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| {
            let known: Vec<&str> = Self::ALL.iter().map(|s| s.name()).collect();
            Error::Config(format!("unknown suite '{s}' (known: {})", known.join(", ")))
        })
    }
}

impl std::fmt::Display for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Trials per instance family and cell.
    pub trials: usize,
    pub seed0: u64,
    /// Dimensions, or the suite's defaults when empty.
    pub dims: Vec<usize>,
    /// Accuracies, or the suite's defaults when empty.
    pub eps: Vec<f64>,
    /// Success rate a grid value must reach in every cell.
    pub target: f64,
    /// Constants held fixed while the suite's own constant varies.
    pub constants: BTreeMap<String, f64>,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self { trials: 100, seed0: 0, dims: vec![], eps: vec![], target: 0.9, constants: BTreeMap::new() }
    }
}

/// Measurements in one `(ε, d)` cell at one candidate value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCell {
    pub eps: f64,
    pub dim: usize,
    /// Candidate value; for `c_psd`, the threshold finally chosen.
    pub value: f64,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub suite: Suite,
    pub tester: TesterKind,
    /// Calibrated constants, ready to pass as overrides.
    pub constants: BTreeMap<String, f64>,
    pub separated: bool,
    pub cells: Vec<CalibrationCell>,
}

impl CalibrationReport {
    /// `Err(NonSeparation)` when the suite found no working value.
    pub fn ensure_separated(&self) -> Result<()> {
        if self.separated {
            Ok(())
        } else {
            Err(Error::NonSeparation(format!("suite {} found no separating value", self.suite)))
        }
    }
}

/// PSD and far families of a cell. One-sided testers only see the far side.
fn families(suite: Suite, eps: f64, dim: usize) -> (Vec<InstanceDescriptor>, Vec<InstanceDescriptor>) {
    let far = |p: f64, bulk: Bulk| InstanceDescriptor::Far { dim, p, eps, bulk, depth: 1.0, rotate: true, seed: 0 };
    match suite {
        Suite::CPsd | Suite::KappaSketch => (
            vec![
                InstanceDescriptor::Identity { dim },
                InstanceDescriptor::Wishart { dim, shift: None, seed: 0 },
                InstanceDescriptor::Psd { dim, bulk: Bulk::Uniform, rotate: true, seed: 0 },
            ],
            vec![far(2.0, Bulk::Flat), far(2.0, Bulk::Uniform)],
        ),
        Suite::KappaOja | Suite::KappaKrylov | Suite::KappaNonadaptive | Suite::KappaMv => {
            (vec![], vec![far(1.0, Bulk::Flat), far(1.0, Bulk::Harmonic { a: 1.0 })])
        }
        Suite::EmbedRows => (
            vec![],
            (1..=3)
                .map(|top| InstanceDescriptor::SignedTop { dim, top, bulk_scale: 0.1, seed: 0 })
                .collect(),
        ),
    }
}

fn params_for(suite: Suite, eps: f64, fixed: &BTreeMap<String, f64>, value: Option<f64>) -> Result<TesterParams> {
    let tester = suite.tester();
    let mut constants = fixed.clone();
    if let Some(v) = value {
        constants.insert(suite.name().to_string(), v);
    }
    TesterParams::new(tester, eps, tester.native_p().unwrap_or(1.0), &constants)
}

fn rate(records: &[TrialRecord]) -> f64 {
    let c: Vec<bool> = records.iter().filter_map(TrialRecord::correct).collect();
    c.iter().filter(|&&x| x).count() as f64 / c.len().max(1) as f64
}

/// Records per side over every family of the cell. The spectrum families
/// each get their own `k`, the number of signed top eigenvalues.
fn cell_records(
    suite: Suite,
    params: &TesterParams,
    eps: f64,
    dim: usize,
    opts: &CalibrationOptions,
) -> Result<(Vec<TrialRecord>, Vec<TrialRecord>)> {
    let (psd, far) = families(suite, eps, dim);
    let mut sides = (Vec::new(), Vec::new());
    for inst in &psd {
        sides.0.extend(run_trials(params, inst, opts.seed0, opts.trials, false)?);
    }
    for inst in &far {
        let params = match inst {
            InstanceDescriptor::SignedTop { top, .. } => params.with("k", *top as f64)?,
            _ => params.clone(),
        };
        sides.1.extend(run_trials(&params, inst, opts.seed0, opts.trials, false)?);
    }
    Ok(sides)
}

fn cells_of(suite: Suite, opts: &CalibrationOptions) -> Result<Vec<(f64, usize)>> {
    let dims = if opts.dims.is_empty() { suite.default_dims() } else { opts.dims.clone() };
    let eps = if opts.eps.is_empty() { suite.default_eps() } else { opts.eps.clone() };
    if opts.trials == 0 {
        return Err(Error::Config("calibration needs at least one trial".into()));
    }
    let mut out = Vec::new();
    for &d in &dims {
        for &e in &eps {
            if !(e > 0.0 && e < 1.0) || d < 4 {
                return Err(Error::Config(format!("bad calibration cell eps = {e}, d = {d}")));
            }
            out.push((e, d));
        }
    }
    Ok(out)
}

/// Threshold between the PSD and far distributions of `γ`: the midpoint
/// of the gap between the largest PSD 99th percentile and the smallest far
/// 5th percentile over all cells.
fn calibrate_c_psd(opts: &CalibrationOptions) -> Result<CalibrationReport> {
    let suite = Suite::CPsd;
    let mut cells = Vec::new();
    let (mut psd_hi, mut far_lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for (eps, dim) in cells_of(suite, opts)? {
        let params = params_for(suite, eps, &opts.constants, None)?;
        let (psd, far) = cell_records(suite, &params, eps, dim, opts)?;
        let gamma = |rs: &[TrialRecord], t: Truth| -> Vec<f64> {
            rs.iter().filter(|r| r.truth == t).filter_map(|r| r.statistic).collect()
        };
        let p99 = quantile(&gamma(&psd, Truth::Psd), 0.99).unwrap_or(f64::NEG_INFINITY);
        let p05 = quantile(&gamma(&far, Truth::Far), 0.05).unwrap_or(f64::INFINITY);
        psd_hi = psd_hi.max(p99);
        far_lo = far_lo.min(p05);
        let mut metrics = BTreeMap::new();
        metrics.insert("psd_p99".into(), p99);
        metrics.insert("far_p05".into(), p05);
        cells.push(CalibrationCell { eps, dim, value: 0.0, metrics });
    }
    let separated = psd_hi < far_lo;
    let c = if separated { 0.5 * (psd_hi + far_lo) } else { psd_hi };
    for cell in &mut cells {
        cell.value = c;
    }
    let mut constants = BTreeMap::new();
    constants.insert("c_psd".into(), c);
    Ok(CalibrationReport { suite, tester: suite.tester(), constants, separated, cells })
}

/// Smallest grid value whose success rate reaches the target on both sides
/// of every cell.
fn calibrate_grid(suite: Suite, opts: &CalibrationOptions) -> Result<CalibrationReport> {
    let grid_cells = cells_of(suite, opts)?;
    let mut cells = Vec::new();
    let mut chosen = None;
    for value in suite.grid() {
        let mut ok = true;
        for &(eps, dim) in &grid_cells {
            let params = params_for(suite, eps, &opts.constants, Some(value))?;
            let (psd, far) = cell_records(suite, &params, eps, dim, opts)?;
            let mut metrics = BTreeMap::new();
            let far_rate = rate(&far);
            metrics.insert("far_success".into(), far_rate);
            ok &= far_rate >= opts.target;
            if !psd.is_empty() {
                let psd_rate = rate(&psd);
                metrics.insert("psd_success".into(), psd_rate);
                ok &= psd_rate >= opts.target;
            }
            let all: Vec<&TrialRecord> = psd.iter().chain(&far).collect();
            let q: u64 = all.iter().map(|r| r.queries_mv + r.queries_vmv).sum();
            metrics.insert("mean_queries".into(), q as f64 / all.len().max(1) as f64);
            cells.push(CalibrationCell { eps, dim, value, metrics });
        }
        if ok {
            chosen = Some(value);
            break;
        }
    }
    let mut constants = BTreeMap::new();
    if let Some(v) = chosen {
        constants.insert(suite.name().to_string(), v);
    }
    Ok(CalibrationReport { suite, tester: suite.tester(), constants, separated: chosen.is_some(), cells })
}

/// Runs a calibration suite. The report says whether separation was found;
/// callers that need it use [`CalibrationReport::ensure_separated`].
pub fn calibrate(suite: Suite, opts: &CalibrationOptions) -> Result<CalibrationReport> {
    if !(opts.target > 0.0 && opts.target <= 1.0) {
        return Err(Error::Config("target must lie in (0, 1]".into()));
    }
    params_for(suite, 0.5, &opts.constants, None)?;
    match suite {
        Suite::CPsd => calibrate_c_psd(opts),
        _ => calibrate_grid(suite, opts),
    }
}
