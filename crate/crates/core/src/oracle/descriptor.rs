use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gen_rotated_diag, gen_spiked_sym, gen_wishart, SpectrumInstance, SymmetricOperator};
use crate::error::{Error, Result};
use crate::kernels::schatten_norm;
use crate::rng;

const BULK_STREAM: u64 = 0x6275_6c6b;

/// Nonnegative bulk spectra for the synthetic families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Bulk {
    /// All ones.
    Flat,
    /// `1/i^a` for `i = 1, 2, ...`.
    Harmonic { a: f64 },
    /// I.i.d. uniform on `[0, 1)`.
    Uniform,
}

/// `flat`, `uniform`, `harmonic` (`a = 1`) or `harmonic:<a>`.
impl std::str::FromStr for Bulk {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "flat" => Ok(Bulk::Flat),
            None if s == "uniform" => Ok(Bulk::Uniform),
            None if s == "harmonic" => Ok(Bulk::Harmonic { a: 1.0 }),
            Some(("harmonic", a)) => match a.parse::<f64>() {
                Ok(a) if a.is_finite() && a >= 0.0 => Ok(Bulk::Harmonic { a }),
                _ => Err(Error::Config(format!("bad harmonic exponent '{a}'"))),
            },
            _ => Err(Error::Config(format!("unknown bulk '{s}'"))),
        }
    }
}

impl Bulk {
    pub fn values(&self, n: usize, seed: u64) -> Vec<f64> {
        match self {
            Bulk::Flat => vec![1.0; n],
            Bulk::Harmonic { a } => (1..=n).map(|i| (i as f64).powf(-a)).collect(),
            Bulk::Uniform => {
                let mut g = rng::stream(seed, BULK_STREAM);
                (0..n).map(|_| g.random::<f64>()).collect()
            }
        }
    }
}

/// Size of the negative eigenvalue `x` with `x = t·‖(bulk, -x)‖_p`,
/// for `0 < t < 1`.
pub fn far_magnitude(bulk: &[f64], p: f64, t: f64) -> f64 {
    if p.is_infinite() {
        return t * bulk.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    }
    let tp = t.powf(p);
    (tp * bulk.iter().map(|b| b.abs().powf(p)).sum::<f64>() / (1.0 - tp)).powf(1.0 / p)
}

fn default_true() -> bool {
    true
}

fn default_depth() -> f64 {
    1.0
}

/// JSON description of a generated instance.
///
/// For `spiked`, `dim` is the size `d` of the Gaussian block; the operator
/// itself is `2d x 2d`. `shift` on a Wishart instance gives `W + shift·I`.
///
/// `far` puts one negative eigenvalue `-x` next to `dim - 1` bulk values,
/// with `x = depth·eps·‖A‖_p`. Depth 1 sits exactly on the far side of the
/// promise boundary; a depth below 1 lands in the promise gap. `signed_top`
/// has `top` eigenvalues of magnitude in `[1, 5)` with random signs over a
/// bulk uniform in `[-bulk_scale, bulk_scale)`.
///
/// With `rotate = false` the spectral families stay diagonal. Every tester
/// draws rotation-invariant Gaussian randomness, so this changes no outcome
/// distribution and skips the `O(d³)` rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceDescriptor {
    RotatedDiag {
        dim: usize,
        eigenvalues: Vec<f64>,
        seed: u64,
    },
    Wishart {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shift: Option<f64>,
        seed: u64,
    },
    Spiked {
        dim: usize,
        s: f64,
        shift: f64,
        seed: u64,
    },
    Identity {
        dim: usize,
    },
    Psd {
        dim: usize,
        bulk: Bulk,
        #[serde(default = "default_true")]
        rotate: bool,
        #[serde(default)]
        seed: u64,
    },
    Far {
        dim: usize,
        p: f64,
        eps: f64,
        bulk: Bulk,
        #[serde(default = "default_depth")]
        depth: f64,
        #[serde(default = "default_true")]
        rotate: bool,
        #[serde(default)]
        seed: u64,
    },
    SignedTop {
        dim: usize,
        top: usize,
        bulk_scale: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl InstanceDescriptor {
    pub fn seed(&self) -> u64 {
        match self {
            Self::RotatedDiag { seed, .. }
            | Self::Wishart { seed, .. }
            | Self::Spiked { seed, .. }
            | Self::Psd { seed, .. }
            | Self::Far { seed, .. }
            | Self::SignedTop { seed, .. } => *seed,
            Self::Identity { .. } => 0,
        }
    }

    pub fn with_seed(&self, new_seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::RotatedDiag { seed, .. }
            | Self::Wishart { seed, .. }
            | Self::Spiked { seed, .. }
            | Self::Psd { seed, .. }
            | Self::Far { seed, .. }
            | Self::SignedTop { seed, .. } => *seed = new_seed,
            Self::Identity { .. } => {}
        }
        out
    }

    /// Dimension of the built operator.
    pub fn operator_dim(&self) -> usize {
        match self {
            Self::Spiked { dim, .. } => 2 * dim,
            Self::RotatedDiag { dim, .. }
            | Self::Wishart { dim, .. }
            | Self::Identity { dim }
            | Self::Psd { dim, .. }
            | Self::Far { dim, .. }
            | Self::SignedTop { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        match self {
            Self::RotatedDiag { dim, eigenvalues, .. } => {
                if *dim == 0 || eigenvalues.len() != *dim {
                    return bad("rotated_diag needs dim >= 1 and exactly dim eigenvalues");
                }
                if eigenvalues.iter().any(|l| !l.is_finite()) {
                    return bad("eigenvalues must be finite");
                }
            }
            Self::Wishart { dim, shift, .. } => {
                if *dim == 0 || shift.is_some_and(|s| !s.is_finite()) {
                    return bad("wishart needs dim >= 1 and a finite shift");
                }
            }
            Self::Spiked { dim, s, shift, .. } => {
                if *dim == 0 || !(*s >= 0.0) || !shift.is_finite() {
                    return bad("spiked needs dim >= 1, s >= 0 and a finite shift");
                }
            }
            Self::Identity { dim } | Self::Psd { dim, .. } => {
                if *dim == 0 {
                    return bad("dim must be at least 1");
                }
            }
            Self::Far { dim, p, eps, depth, .. } => {
                if *dim < 2 || !(*p >= 1.0) || !(*eps > 0.0 && *eps < 1.0) || !(*depth > 0.0 && depth * eps < 1.0) {
                    return bad("far needs dim >= 2, p >= 1, eps in (0, 1) and 0 < depth·eps < 1");
                }
            }
            Self::SignedTop { dim, top, bulk_scale, .. } => {
                if *top > *dim || *dim == 0 || !(*bulk_scale >= 0.0) {
                    return bad("signed_top needs 1 <= top <= dim and bulk_scale >= 0");
                }
            }
        }
        if let Self::Psd { bulk: Bulk::Harmonic { a }, .. } | Self::Far { bulk: Bulk::Harmonic { a }, .. } = self {
            if !a.is_finite() || *a < 0.0 {
                return bad("harmonic exponent must be finite and nonnegative");
            }
        }
        Ok(())
    }

    /// The prescribed eigenvalues, for the spectral families.
    pub fn eigenvalues(&self) -> Option<Vec<f64>> {
        match self {
            Self::RotatedDiag { eigenvalues, .. } => Some(eigenvalues.clone()),
            Self::Identity { dim } => Some(vec![1.0; *dim]),
            Self::Psd { dim, bulk, seed, .. } => Some(bulk.values(*dim, *seed)),
            Self::Far { dim, p, eps, bulk, depth, seed, .. } => {
                let mut v = bulk.values(dim - 1, *seed);
                let x = far_magnitude(&v, *p, depth * eps);
                v.insert(0, -x);
                Some(v)
            }
            Self::SignedTop { dim, top, bulk_scale, seed } => {
                let mut g = rng::stream(*seed, BULK_STREAM);
                let mut v: Vec<f64> = (0..*top)
                    .map(|_| {
                        let m = g.random_range(1.0..5.0);
                        if g.random_bool(0.5) { m } else { -m }
                    })
                    .collect();
                v.extend((*top..*dim).map(|_| bulk_scale * g.random_range(-1.0..1.0)));
                Some(v)
            }
            _ => None,
        }
    }

    pub fn build(&self) -> Result<SymmetricOperator> {
        self.validate()?;
        let rotate = match self {
            Self::Psd { rotate, .. } | Self::Far { rotate, .. } => *rotate,
            _ => true,
        };
        Ok(match self {
            Self::Wishart { dim, shift, seed } => {
                let w = gen_wishart(*dim, *seed);
                match shift {
                    Some(t) => w.shifted(*t),
                    None => w,
                }
            }
            Self::Spiked { dim, s, shift, seed } => gen_spiked_sym(*dim, *s, *shift, *seed),
            Self::Identity { dim } => SymmetricOperator::identity(*dim),
            _ => {
                let ev = self.eigenvalues().expect("spectral family");
                if rotate {
                    gen_rotated_diag(&SpectrumInstance::new(ev, self.seed()))?
                } else {
                    SymmetricOperator::diagonal(&ev)
                }
            }
        })
    }

    /// `‖A‖_p` of the prescribed spectrum, if there is one.
    pub fn schatten(&self, p: f64) -> Option<f64> {
        self.eigenvalues().map(|v| schatten_norm(&v, p))
    }
}
