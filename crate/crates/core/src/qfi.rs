//! Quantum Fisher information and the QFI-density entanglement witness.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sparse::{inner, SparseOperator, C64};
use crate::state::StateVector;

/// Pairs with `p_n + p_m` below this are skipped in the mixed-state sum.
pub const MIXED_SKIP: f64 = 1e-14;

/// Slack used by [`witness_bound`] so that `f = m + 1e-15` is not read as `f > m`.
pub const WITNESS_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QfiResult {
    /// Fisher information `F`.
    pub value: f64,
    /// Density `f = F / N`.
    pub density: f64,
    pub observable: String,
}

impl QfiResult {
    fn new(value: f64, n_sites: usize, observable: &str) -> Self {
        QfiResult {
            value,
            density: value / n_sites as f64,
            observable: observable.to_string(),
        }
    }

    /// Number of particles the density certifies as entangled.
    pub fn entanglement_depth(&self) -> i64 {
        witness_bound(self.density) + 1
    }
}

/// `F = 4 (<O^2> - <O>^2)` for a pure state.
pub fn qfi_pure(state: &StateVector, op: &SparseOperator, observable: &str) -> Result<QfiResult> {
    let n = state.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(n));
    }
    if op.dim() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: state.dim(),
        });
    }
    Ok(QfiResult::new(
        4.0 * state.variance(op),
        state.basis().n_sites(),
        observable,
    ))
}

/// `F = 2 sum_{n,m} (p_n - p_m)^2 / (p_n + p_m) |<n|O|m>|^2` for
/// `rho = sum_n p_n |n><n|`.
pub fn qfi_mixed(
    probabilities: &[f64],
    eigenvectors: &[StateVector],
    op: &SparseOperator,
    observable: &str,
) -> Result<QfiResult> {
    if probabilities.len() != eigenvectors.len() || eigenvectors.is_empty() {
        return Err(Error::InvalidProbabilities(format!(
            "{} weights for {} eigenvectors",
            probabilities.len(),
            eigenvectors.len()
        )));
    }
    if let Some(p) = probabilities.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidProbabilities(format!("negative or non-finite weight {p}")));
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidProbabilities(format!("weights sum to {total}")));
    }
    let images: Vec<Vec<C64>> = eigenvectors.iter().map(|v| op.apply(v.amplitudes())).collect();
    let mut f = 0.0;
    for (n, (pn, vn)) in probabilities.iter().zip(eigenvectors).enumerate() {
        for (m, pm) in probabilities.iter().enumerate() {
            let s = pn + pm;
            if s < MIXED_SKIP || n == m {
                continue;
            }
            let elem = inner(vn.amplitudes(), &images[m]);
            f += 2.0 * (pn - pm).powi(2) / s * elem.norm_sqr();
        }
    }
    Ok(QfiResult::new(f, eigenvectors[0].basis().n_sites(), observable))
}

/// Largest integer `m` with `f > m`: a QFI density above `m` certifies that
/// at least `m + 1` particles are entangled. Returns `-1` for `f <= 0`.
pub fn witness_bound(f: f64) -> i64 {
    let shifted = f - WITNESS_SLACK;
    if shifted <= 0.0 {
        return -1;
    }
    shifted.ceil() as i64 - 1
}
