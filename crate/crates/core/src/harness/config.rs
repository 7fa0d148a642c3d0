use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mv_testers::{KrylovConfig, KrylovMode};
use crate::oracle::InstanceDescriptor;
use crate::spectrum::SpectrumConfig;
use crate::vmv_testers::{L2Config, OjaConfig, SketchConfig};

/// Testers the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TesterKind {
    OjaL1,
    BilinearSketch,
    AdaptiveL2,
    NonadaptiveL1,
    Krylov,
    NonadaptiveMv,
    Spectrum,
    SpectrumAdaptive,
}

impl TesterKind {
    pub const ALL: [TesterKind; 8] = [
        Self::OjaL1,
        Self::BilinearSketch,
        Self::AdaptiveL2,
        Self::NonadaptiveL1,
        Self::Krylov,
        Self::NonadaptiveMv,
        Self::Spectrum,
        Self::SpectrumAdaptive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::OjaL1 => "oja_l1",
            Self::BilinearSketch => "bilinear_sketch",
            Self::AdaptiveL2 => "adaptive_l2",
            Self::NonadaptiveL1 => "nonadaptive_l1",
            Self::Krylov => "krylov",
            Self::NonadaptiveMv => "nonadaptive_mv",
            Self::Spectrum => "spectrum",
            Self::SpectrumAdaptive => "spectrum_adaptive",
        }
    }

    /// Schatten norm the tester's promise is stated in, if it is fixed.
    pub fn native_p(self) -> Option<f64> {
        match self {
            Self::OjaL1 | Self::NonadaptiveL1 => Some(1.0),
            Self::BilinearSketch | Self::AdaptiveL2 => Some(2.0),
            Self::Krylov | Self::NonadaptiveMv => None,
            Self::Spectrum | Self::SpectrumAdaptive => Some(2.0),
        }
    }

    pub fn is_one_sided(self) -> bool {
        matches!(self, Self::OjaL1 | Self::NonadaptiveL1 | Self::Krylov | Self::NonadaptiveMv)
    }

    pub fn is_spectrum(self) -> bool {
        matches!(self, Self::Spectrum | Self::SpectrumAdaptive)
    }

    pub fn uses_mv(self) -> bool {
        matches!(self, Self::Krylov | Self::NonadaptiveMv)
    }

    /// Constant names the tester accepts, with their defaults.
    pub fn default_constants(self) -> BTreeMap<&'static str, f64> {
        let list: Vec<(&'static str, f64)> = match self {
            Self::OjaL1 => vec![
                ("kappa_oja", OjaConfig::DEFAULT_KAPPA_N),
                ("eta", OjaConfig::DEFAULT_ETA),
                ("reduce", OjaConfig::DEFAULT_REDUCE),
                ("scales", OjaConfig::DEFAULT_SCALES as f64),
                ("amplification", OjaConfig::DEFAULT_AMPLIFICATION as f64),
            ],
            Self::BilinearSketch => {
                vec![("kappa_sketch", SketchConfig::DEFAULT_KAPPA), ("c_psd", SketchConfig::DEFAULT_C_PSD)]
            }
            Self::AdaptiveL2 => {
                let d = L2Config::default();
                vec![
                    ("kappa_sketch", d.sketch.kappa),
                    ("c_psd", d.sketch.c_psd),
                    ("gap", d.gap),
                    ("probes", d.probes as f64),
                    ("amplification", d.amplification as f64),
                ]
            }
            Self::NonadaptiveL1 => vec![("kappa_nonadaptive", DEFAULT_KAPPA_NONADAPTIVE), ("reps", 1.0)],
            Self::Krylov => vec![("kappa_krylov", KrylovConfig::DEFAULT_KAPPA), ("reps", 1.0), ("odd_power", 0.0)],
            Self::NonadaptiveMv => vec![("kappa_mv", DEFAULT_KAPPA_MV), ("reps", 1.0)],
            Self::Spectrum | Self::SpectrumAdaptive => vec![
                ("k", 3.0),
                ("c_r", SpectrumConfig::DEFAULT_C_R),
                ("embed_rows", SpectrumConfig::DEFAULT_EMBED_ROWS),
                ("reps_factor", SpectrumConfig::DEFAULT_REPS_FACTOR),
                ("pairs_c", SpectrumConfig::DEFAULT_PAIRS_C),
            ],
        };
        list.into_iter().collect()
    }

    /// Name of the constant that scales the tester's query budget.
    pub fn size_constant(self) -> &'static str {
        match self {
            Self::OjaL1 => "kappa_oja",
            Self::BilinearSketch | Self::AdaptiveL2 => "kappa_sketch",
            Self::NonadaptiveL1 => "kappa_nonadaptive",
            Self::Krylov => "kappa_krylov",
            Self::NonadaptiveMv => "kappa_mv",
            Self::Spectrum | Self::SpectrumAdaptive => "embed_rows",
        }
    }
}

/// Default `κ'` of the non-adaptive vmv tester, `m = ⌈κ'/ε⌉`.
pub const DEFAULT_KAPPA_NONADAPTIVE: f64 = 2.0;
/// Default `κ` of the non-adaptive mv tester, `m = ⌈κ·d^(1-1/p)/ε⌉`.
pub const DEFAULT_KAPPA_MV: f64 = 2.0;

impl FromStr for TesterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown tester '{s}'")))
    }
}

impl std::fmt::Display for TesterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn default_trials() -> usize {
    100
}

fn default_true() -> bool {
    true
}

/// One experiment: a tester, an instance family and a seed range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub tester: TesterKind,
    /// Trial `i` builds `instance` with seed `seed0 + i`.
    pub instance: InstanceDescriptor,
    pub eps: f64,
    /// Schatten norm of the promise. Fixed for most testers; required for
    /// `krylov` and `nonadaptive_mv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed0: u64,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    /// Record wall-clock times. Off, the column is left empty so that
    /// reruns produce identical files.
    #[serde(default = "default_true")]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(tester: TesterKind, instance: InstanceDescriptor, eps: f64, trials: usize) -> Self {
        Self {
            tester,
            instance,
            eps,
            p: None,
            trials,
            seed0: 0,
            constants: BTreeMap::new(),
            output_path: None,
            timing: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Norm used for the promise and the ground truth.
    pub fn norm_p(&self) -> Result<f64> {
        match (self.tester.native_p(), self.p) {
            (Some(n), Some(p)) if n != p => Err(Error::Config(format!(
                "{} is a p = {n} tester, but the config asks for p = {p}",
                self.tester
            ))),
            (Some(n), _) => Ok(n),
            (None, Some(p)) => Ok(p),
            (None, None) => Err(Error::Config(format!("{} needs p", self.tester))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::Config("eps must lie in (0, 1)".into()));
        }
        let p = self.norm_p()?;
        if !(p >= 1.0) {
            return Err(Error::Config("p must be at least 1".into()));
        }
        self.instance.validate()?;
        self.params().map(|_| ())
    }

    /// Resolved tester parameters: defaults overridden by `constants`.
    pub fn params(&self) -> Result<TesterParams> {
        TesterParams::new(self.tester, self.eps, self.norm_p()?, &self.constants)
    }
}

/// A tester with every constant resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct TesterParams {
    pub kind: TesterKind,
    pub eps: f64,
    pub p: f64,
    pub constants: BTreeMap<String, f64>,
}

impl TesterParams {
    pub fn new(kind: TesterKind, eps: f64, p: f64, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let defaults = kind.default_constants();
        let mut constants: BTreeMap<String, f64> = defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (key, value) in overrides {
            if !defaults.contains_key(key.as_str()) {
                let known: Vec<&str> = defaults.keys().copied().collect();
                return Err(Error::Config(format!("{kind} has no constant '{key}' (known: {})", known.join(", "))));
            }
            let zero_ok = key == "odd_power";
            if !value.is_finite() || *value < 0.0 || (*value == 0.0 && !zero_ok) {
                return Err(Error::Config(format!("constant {key} must be positive, got {value}")));
            }
            constants.insert(key.clone(), *value);
        }
        for key in ["scales", "amplification", "probes", "reps", "k"] {
            if let Some(v) = constants.get(key) {
                if v.fract() != 0.0 || *v < 1.0 {
                    return Err(Error::Config(format!("constant {key} must be a positive integer")));
                }
            }
        }
        Ok(Self { kind, eps, p, constants })
    }

    pub fn get(&self, key: &str) -> f64 {
        self.constants[key]
    }

    fn count(&self, key: &str) -> usize {
        self.get(key) as usize
    }

    pub fn with(&self, key: &str, value: f64) -> Result<Self> {
        let mut overrides = self.constants.clone();
        overrides.insert(key.to_string(), value);
        Self::new(self.kind, self.eps, self.p, &overrides)
    }

    pub fn oja(&self) -> OjaConfig {
        OjaConfig {
            eta: self.get("eta"),
            eta_scales: self.count("scales"),
            amplification: self.count("amplification"),
            reduce: self.get("reduce"),
            ..OjaConfig::with_kappa(self.eps, self.get("kappa_oja"))
        }
    }

    pub fn sketch(&self) -> SketchConfig {
        SketchConfig { kappa: self.get("kappa_sketch"), c_psd: self.get("c_psd") }
    }

    pub fn l2(&self) -> L2Config {
        L2Config {
            sketch: self.sketch(),
            gap: self.get("gap"),
            probes: self.count("probes"),
            amplification: self.count("amplification"),
        }
    }

    pub fn krylov(&self) -> KrylovConfig {
        KrylovConfig {
            kappa: self.get("kappa_krylov"),
            reps: self.count("reps"),
            mode: if self.get("odd_power") > 0.0 { KrylovMode::OddPower } else { KrylovMode::LogD },
        }
    }

    pub fn reps(&self) -> usize {
        self.count("reps")
    }

    pub fn spectrum(&self) -> SpectrumConfig {
        SpectrumConfig {
            c_r: self.get("c_r"),
            embed_rows: self.get("embed_rows"),
            reps_factor: self.get("reps_factor"),
            pairs_c: self.get("pairs_c"),
            ..SpectrumConfig::default()
        }
    }

    pub fn spectrum_k(&self) -> usize {
        self.count("k")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Bulk;

    fn far() -> InstanceDescriptor {
        InstanceDescriptor::Far { dim: 16, p: 1.0, eps: 0.2, bulk: Bulk::Flat, depth: 1.0, rotate: true, seed: 0 }
    }

    #[test]
    fn names_round_trip() {
        for t in TesterKind::ALL {
            assert_eq!(t.name().parse::<TesterKind>().unwrap(), t);
            assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{}\"", t.name()));
            assert!(t.default_constants().contains_key(t.size_constant()));
        }
        assert!("nope".parse::<TesterKind>().is_err());
    }

    #[test]
    fn config_parses_with_defaults() {
        let text = r#"{"tester":"oja_l1","instance":{"kind":"identity","dim":8},"eps":0.1}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.trials, 100);
        assert!(cfg.timing);
        assert_eq!(cfg.norm_p().unwrap(), 1.0);
        assert_eq!(cfg.params().unwrap().oja().amplification, OjaConfig::DEFAULT_AMPLIFICATION);
    }

    #[test]
    fn config_errors_are_config_errors() {
        let bad = [
            r#"{"tester":"oja_l1","instance":{"kind":"identity","dim":8},"eps":1.5}"#,
            r#"{"tester":"oja_l1","instance":{"kind":"identity","dim":8},"eps":0.1,"trials":0}"#,
            r#"{"tester":"oja_l1","instance":{"kind":"identity","dim":8},"eps":0.1,"p":2}"#,
            r#"{"tester":"krylov","instance":{"kind":"identity","dim":8},"eps":0.1}"#,
            r#"{"tester":"krylov","instance":{"kind":"identity","dim":8},"eps":0.1,"p":1,"constants":{"c_psd":1}}"#,
            r#"{"tester":"krylov","instance":{"kind":"identity","dim":8},"eps":0.1,"p":1,"constants":{"reps":1.5}}"#,
            r#"{"tester":"oja_l1","instance":{"kind":"identity","dim":8},"eps":0.1,"constants":{"eta":-1}}"#,
            r#"{"tester":"oja_l1","instance":{"kind":"identity","dim":0},"eps":0.1}"#,
            r#"{"tester":"oja_l1","instance":{"kind":"identity","dim":8},"eps":0.1,"extra":1}"#,
            r#"not json"#,
        ];
        for text in bad {
            assert!(matches!(ExperimentConfig::from_json(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn overrides_reach_tester_configs() {
        let mut cfg = ExperimentConfig::new(TesterKind::Krylov, far(), 0.2, 5);
        cfg.p = Some(3.0);
        cfg.constants.insert("odd_power".into(), 1.0);
        cfg.constants.insert("kappa_krylov".into(), 0.5);
        let k = cfg.params().unwrap().krylov();
        assert_eq!(k.mode, KrylovMode::OddPower);
        assert_eq!(k.kappa, 0.5);
        let p = cfg.params().unwrap().with("reps", 4.0).unwrap();
        assert_eq!(p.krylov().reps, 4);
    }
}
