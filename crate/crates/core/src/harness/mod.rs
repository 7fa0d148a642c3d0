//! Experiment runner: seeded trials with exact ground truth, calibration of
//! the testers' constants and query-scaling sweeps.

mod calibrate;
mod config;
mod run;
mod scaling;

pub use calibrate::{calibrate, CalibrationCell, CalibrationOptions, CalibrationReport, Suite};
pub use config::{ExperimentConfig, TesterKind, TesterParams, DEFAULT_KAPPA_MV, DEFAULT_KAPPA_NONADAPTIVE};
pub use run::{
    label_truth, map_indexed, quantile, records_csv, run_experiment, run_tester, run_trial, run_trials, summarize,
    write_report, ExperimentReport, Format, Outcome, Quantiles, SideSummary, Summary, TesterOutput, TrialRecord,
    Truth, CSV_HEADER,
};
pub use scaling::{
    default_bulk, loglog_fit, scaling_family, sweep_constants, scaling_report, ScalingOptions, ScalingPoint, ScalingReport, SlopeFit,
};
