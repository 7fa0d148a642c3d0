use serde::{Deserialize, Serialize};

/// Outcome of checking estimates against the exact spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeCheck {
    /// A one-to-one assignment of estimates to the well-separated true
    /// eigenvalues within `ε‖A‖_F` exists.
    pub matched: bool,
    /// Every assigned estimate has the sign of its eigenvalue.
    pub signs_ok: bool,
    /// Number of true eigenvalues the guarantee covers.
    pub covered: usize,
    /// Largest `|λ̃ - λ|` over the assignment, in units of `‖A‖_F`.
    pub max_error: f64,
}

impl GuaranteeCheck {
    pub fn passed(&self) -> bool {
        self.matched && self.signs_ok
    }
}

/// Checks the permutation guarantee for `k = estimates.len()`: every true
/// eigenvalue among the `k` largest in magnitude with
/// `|λᵢ| >= |λ_k| + 2ε‖A‖_F` needs its own estimate within `ε‖A‖_F`.
pub fn check_signed_guarantee(eigenvalues: &[f64], estimates: &[f64], eps: f64) -> GuaranteeCheck {
    let k = estimates.len();
    let fro = eigenvalues.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut by_mag = eigenvalues.to_vec();
    by_mag.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let kth = by_mag.get(k.saturating_sub(1)).map_or(0.0, |v| v.abs());
    let tol = eps * fro;
    let covered: Vec<f64> =
        by_mag.iter().take(k).copied().filter(|v| v.abs() >= kth + 2.0 * tol && k > 0).collect();

    // Augmenting-path bipartite matching on the "within tolerance" graph.
    let adj: Vec<Vec<usize>> = covered
        .iter()
        .map(|&l| (0..k).filter(|&j| (estimates[j] - l).abs() <= tol).collect())
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; k];
    fn augment(i: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &j in &adj[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|o| augment(o, adj, seen, owner)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    let matched = (0..covered.len()).all(|i| augment(i, &adj, &mut vec![false; k], &mut owner));

    let mut signs_ok = true;
    let mut max_error: f64 = 0.0;
    for (j, o) in owner.iter().enumerate() {
        if let Some(i) = *o {
            let (l, e) = (covered[i], estimates[j]);
            signs_ok &= l.signum() == e.signum();
            if fro > 0.0 {
                max_error = max_error.max((e - l).abs() / fro);
            }
        }
    }
    GuaranteeCheck { matched, signs_ok, covered: covered.len(), max_error }
}
