//! Threshold-based sketch selection and the enumeration that picks the
//! threshold.
//!
//! Slot positions are 0-based indices into the `η` history.

use crate::error::{FlycomError, Result};

/// Slots whose denoising factor does not exceed the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionDecision {
    pub threshold: f64,
    /// Ascending positions in the history.
    pub selected: Vec<usize>,
    pub m_tilde: usize,
}

pub fn select(eta: &[f64], threshold: f64) -> SelectionDecision {
    let selected: Vec<usize> = (0..eta.len()).filter(|&i| eta[i] <= threshold).collect();
    SelectionDecision {
        threshold,
        m_tilde: selected.len(),
        selected,
    }
}

/// `(1/M̃) (1 + r σ² η_th / (2 Tr(X^T X)))²`.
pub fn threshold_objective(
    threshold: f64,
    m_tilde: usize,
    r: usize,
    sigma2: f64,
    global_trace: f64,
) -> f64 {
    let inflation = 1.0 + r as f64 * sigma2 * threshold / (2.0 * global_trace);
    inflation * inflation / m_tilde as f64
}

/// Outcome of the threshold enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub objective: f64,
    pub m_tilde: usize,
    /// No candidate kept `M̃ M ≥ r`; every sketch is used instead.
    pub fallback: bool,
}

impl ThresholdChoice {
    pub fn decision(&self, eta: &[f64]) -> SelectionDecision {
        select(eta, self.threshold)
    }
}

fn validate(eta: &[f64], r: usize, m: usize, sigma2: f64, global_trace: f64) -> Result<()> {
    if eta.is_empty() {
        return Err(FlycomError::EmptyHistory);
    }
    if eta.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(FlycomError::InvalidArgument(
            "denoising factors must be positive and finite".into(),
        ));
    }
    if !(global_trace > 0.0) {
        return Err(FlycomError::InvalidArgument(format!(
            "global trace must be positive, got {global_trace}"
        )));
    }
    if !(sigma2 >= 0.0) || r == 0 || m == 0 {
        return Err(FlycomError::InvalidArgument(
            "need sigma2 >= 0, r >= 1 and M >= 1".into(),
        ));
    }
    Ok(())
}

/// Minimize the selection objective over thresholds `η_th ∈ {η_ℓ}`.
///
/// Sorting once turns the enumeration into a prefix scan: candidate `η_(n)`
/// keeps every slot with `η ≤ η_(n)`. Candidates with `M̃ M < r` are
/// infeasible for detection and skipped. Objective ties go to the larger `M̃`.
pub fn optimize_threshold(
    eta: &[f64],
    r: usize,
    m: usize,
    sigma2: f64,
    global_trace: f64,
) -> Result<ThresholdChoice> {
    validate(eta, r, m, sigma2, global_trace)?;
    let mut sorted = eta.to_vec();
    sorted.sort_by(f64::total_cmp);
    let t = sorted.len();
    let mut best: Option<ThresholdChoice> = None;
    for n in 0..t {
        // only the last of a run of equal values counts all ties
        if n + 1 < t && sorted[n + 1] == sorted[n] {
            continue;
        }
        let m_tilde = n + 1;
        if m_tilde * m < r {
            continue;
        }
        let objective = threshold_objective(sorted[n], m_tilde, r, sigma2, global_trace);
        if best.as_ref().is_none_or(|b| objective <= b.objective) {
            best = Some(ThresholdChoice {
                threshold: sorted[n],
                objective,
                m_tilde,
                fallback: false,
            });
        }
    }
    Ok(best.unwrap_or_else(|| {
        let threshold = sorted[t - 1];
        ThresholdChoice {
            threshold,
            objective: threshold_objective(threshold, t, r, sigma2, global_trace),
            m_tilde: t,
            fallback: true,
        }
    }))
}
