use crate::error::{contract, Result};

const GRID: usize = 10_000;
const MONOMIAL_MAX_DEGREE: usize = 30;

/// Shifted and scaled Chebyshev polynomial that is small on `[0, r]` and
/// equals one at `-alpha`.
///
/// With `t(x) = 2x/r - 1` mapping `[0, r]` onto `[-1, 1]`,
/// `q(x) = T_n(t(x)) / T_n(t(-alpha))`. Since `|T_n| <= 1` on `[-1, 1]` and
/// `T_n` grows like `cosh(n·acosh|t|)` outside it, the degree is the least `n`
/// with `cosh(n·acosh(1 + 2·alpha/r)) >= 1/delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPolynomial {
    degree: usize,
    alpha: f64,
    r: f64,
    delta: f64,
}

impl ThresholdPolynomial {
    /// Builds the polynomial and checks both invariants on a uniform grid of
    /// `[0, r]`.
    pub fn new(r: f64, alpha: f64, delta: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(contract("r must be positive"));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(contract("alpha must be positive"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(contract("delta must lie in (0, 1)"));
        }
        let a0 = (1.0 + 2.0 * alpha / r).acosh();
        let mut degree = ((1.0 / delta).acosh() / a0).ceil().max(1.0) as usize;
        while degree > 1 && sech((degree - 1) as f64 * a0) <= delta {
            degree -= 1;
        }
        loop {
            let poly = Self { degree, alpha, r, delta };
            if poly.grid_max_abs() <= delta * (1.0 + 1e-6) && (poly.evaluate(-alpha) - 1.0).abs() <= 1e-6 {
                return Ok(poly);
            }
            degree += 1;
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Degree guaranteed by the bound `T_n(1 + g) >= 2^(n·sqrt(g) - 1)`:
    /// the smallest `n` with `2^(n·sqrt(g) - 1) >= 1/delta` for `g = 2·alpha/r`.
    pub fn growth_bound_degree(&self) -> usize {
        let g = 2.0 * self.alpha / self.r;
        (((1.0 / self.delta).log2() + 1.0) / g.sqrt()).ceil() as usize
    }

    /// `q(x)`, by the three-term recurrence inside `[0, r]` and by the
    /// hyperbolic form outside (computed in log space so high degrees cannot
    /// overflow).
    pub fn evaluate(&self, x: f64) -> f64 {
        let n = self.degree as f64;
        let t = 2.0 * x / self.r - 1.0;
        let a0 = (1.0 + 2.0 * self.alpha / self.r).acosh();
        // T_n(t(-alpha)) = (-1)^n cosh(n·a0)
        let denom_sign = if self.degree % 2 == 0 { 1.0 } else { -1.0 };
        if t.abs() <= 1.0 {
            return denom_sign * chebyshev_t(self.degree, t) * sech(n * a0);
        }
        let a = t.abs().acosh();
        let num_sign = if t < 0.0 && self.degree % 2 == 1 { -1.0 } else { 1.0 };
        let ratio = (n * (a - a0)).exp() * (1.0 + (-2.0 * n * a).exp()) / (1.0 + (-2.0 * n * a0).exp());
        num_sign * denom_sign * ratio
    }

    /// Largest `|q|` over the `10^4`-point uniform grid of `[0, r]`.
    pub fn grid_max_abs(&self) -> f64 {
        (0..GRID)
            .map(|i| self.evaluate(self.r * i as f64 / (GRID - 1) as f64).abs())
            .fold(0.0, f64::max)
    }

    /// Coefficients of `q` in the monomial basis, lowest power first. Only
    /// offered up to degree 30; beyond that the expansion loses all accuracy.
    pub fn monomial_coefficients(&self) -> Option<Vec<f64>> {
        if self.degree > MONOMIAL_MAX_DEGREE {
            return None;
        }
        // T_k in powers of t
        let mut prev = vec![1.0];
        let mut cur = vec![0.0, 1.0];
        let tn = if self.degree == 0 {
            prev
        } else {
            for _ in 1..self.degree {
                let mut next = vec![0.0; cur.len() + 1];
                for (i, c) in cur.iter().enumerate() {
                    next[i + 1] += 2.0 * c;
                }
                for (i, c) in prev.iter().enumerate() {
                    next[i] -= c;
                }
                prev = cur;
                cur = next;
            }
            cur
        };
        // substitute t = s·x - 1 with s = 2/r
        let s = 2.0 / self.r;
        let mut out = vec![0.0; tn.len()];
        let mut power = vec![1.0];
        for c in &tn {
            for (i, p) in power.iter().enumerate() {
                out[i] += c * p;
            }
            let mut next = vec![0.0; power.len() + 1];
            for (i, p) in power.iter().enumerate() {
                next[i + 1] += s * p;
                next[i] -= p;
            }
            power = next;
        }
        let norm = self.evaluate_raw_denominator();
        Some(out.into_iter().map(|c| c / norm).collect())
    }

    fn evaluate_raw_denominator(&self) -> f64 {
        let a0 = (1.0 + 2.0 * self.alpha / self.r).acosh();
        let sign = if self.degree % 2 == 0 { 1.0 } else { -1.0 };
        sign * (self.degree as f64 * a0).cosh()
    }
}

fn chebyshev_t(n: usize, t: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => t,
        _ => {
            let (mut a, mut b) = (1.0, t);
            for _ in 1..n {
                let c = 2.0 * t * b - a;
                a = b;
                b = c;
            }
            b
        }
    }
}

fn sech(y: f64) -> f64 {
    let e = (-y.abs()).exp();
    2.0 * e / (1.0 + e * e)
}
