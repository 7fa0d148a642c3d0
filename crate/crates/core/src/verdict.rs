use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    OneSided,
    TwoSided,
}

/// Outcome of one tester run.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub is_psd: bool,
    /// `w` with `wᵀAw < 0`. Always present when a one-sided tester rejects.
    pub witness: Option<DVector<f64>>,
    pub queries_used: u64,
    pub mode: Mode,
    /// Decision statistic, e.g. `γ` for the bilinear sketch tester.
    pub statistic: Option<f64>,
}

impl Verdict {
    pub(crate) fn accept(mode: Mode, queries_used: u64) -> Self {
        Self { is_psd: true, witness: None, queries_used, mode, statistic: None }
    }

    pub(crate) fn reject(mode: Mode, witness: Option<DVector<f64>>, queries_used: u64) -> Self {
        Self { is_psd: false, witness, queries_used, mode, statistic: None }
    }
}
