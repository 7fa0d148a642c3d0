use crate::error::{contract, Result};
use crate::kernels::{schatten_norm, ThresholdPolynomial};

/// `p(x) = q(x)·Π (λᵢ - x)/(λᵢ - λ_min)` over the deflated eigenvalues
/// `λᵢ > T^(-1/p)`.
///
/// `q` is small on `[0, T^(-1/p)]` and one at `λ_min`; every factor is one
/// at `λ_min` and lies in `[0, 1]` for `x` between `λ_min` and `λᵢ`, so `p`
/// keeps `q`'s bounds there while vanishing on the large eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflatedPolynomial {
    pub q: ThresholdPolynomial,
    pub roots: Vec<f64>,
    pub lambda_min: f64,
}

impl DeflatedPolynomial {
    pub fn evaluate(&self, x: f64) -> f64 {
        self.roots
            .iter()
            .fold(self.q.evaluate(x), |acc, &l| acc * (l - x) / (l - self.lambda_min))
    }

    pub fn degree(&self) -> usize {
        self.q.degree() + self.roots.len()
    }
}

/// Builds the degree certificate for a known spectrum with `‖λ‖_p <= 1`
/// and `min λ <= -eps`, and returns it with the positive mass
/// `Σ_{λᵢ > 0} p(λᵢ)²·λᵢ`, which the construction keeps below `eps/10`.
///
/// `q` suppresses `[0, T^(-1/p)]` to `δ = sqrt((eps/10)/d^(1-1/p))`.
pub fn deflation_poly_certificate(spectrum: &[f64], eps: f64, p: f64, t: usize) -> Result<(DeflatedPolynomial, f64)> {
    if spectrum.is_empty() || t == 0 || !(p >= 1.0) {
        return Err(contract("need a non-empty spectrum, T >= 1 and p >= 1"));
    }
    if schatten_norm(spectrum, p) > 1.0 + 1e-12 {
        return Err(contract("spectrum must have Schatten norm at most 1"));
    }
    let lambda_min = spectrum.iter().copied().fold(f64::INFINITY, f64::min);
    // Same relative slack as the truth labels, so a spectrum built to sit
    // exactly on the boundary is accepted despite rounding.
    if lambda_min > -eps * (1.0 - 1e-9) {
        return Err(contract("spectrum must be eps-far from PSD"));
    }
    let d = spectrum.len() as f64;
    let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let threshold = (t as f64).powf(-inv_p);
    let delta = ((eps / 10.0) / d.powf(1.0 - inv_p)).sqrt();
    let q = ThresholdPolynomial::new(threshold, -lambda_min, delta)?;
    let roots: Vec<f64> = spectrum.iter().copied().filter(|&l| l > threshold).collect();
    if roots.len() > t {
        return Err(contract(format!("{} eigenvalues exceed T^(-1/p) but T = {t}", roots.len())));
    }
    let poly = DeflatedPolynomial { q, roots, lambda_min };
    let mass = spectrum.iter().filter(|&&l| l > 0.0).map(|&l| poly.evaluate(l).powi(2) * l).sum();
    Ok((poly, mass))
}
