//! Error metric, its decomposition, perturbation diagnostics and the
//! expected, probabilistic and selection error bounds.
//!
//! Bounds are evaluated with ground-truth singular values; they are
//! diagnostics for synthetic runs, not runtime estimators.

use nalgebra::DMatrix;
use statrs::function::erf::erf;

use crate::error::{FlycomError, Result};
use crate::linalg::sym_eigen_desc;
use crate::selection::threshold_objective;
use crate::stats::linear_fit;
use crate::tensor::GroundTruth;

/// `d(Ũ, X) = ‖(I − Ũ Ũ^T) X‖_F²`.
pub fn dtd_error(u: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<f64> {
    if u.nrows() != x.nrows() {
        return Err(FlycomError::DimensionMismatch(format!(
            "basis has {} rows, data has {}",
            u.nrows(),
            x.nrows()
        )));
    }
    let resid = x - u * (u.transpose() * x);
    Ok(resid.norm_squared())
}

fn principal_spread(truth: &GroundTruth) -> f64 {
    let head = &truth.singular_values[..truth.principal_dim];
    let hi = head.iter().copied().fold(f64::MIN, f64::max);
    let lo = head.iter().copied().fold(f64::MAX, f64::min);
    hi - lo
}

/// `(Σ_{i≤r} Σ_{j>r} (σ_i² − σ_j²) ⟨ũ_i, u_j⟩², Σ_{j>r} σ_j²)`.
///
/// Requires `σ_1 = … = σ_r`.
pub fn error_decomposition(u: &DMatrix<f64>, truth: &GroundTruth) -> Result<(f64, f64)> {
    let r = truth.principal_dim;
    let spread = principal_spread(truth);
    if spread > 1e-12 * truth.singular_values[0].abs().max(1.0) {
        return Err(FlycomError::UnequalPrincipalValues(spread));
    }
    if u.nrows() != truth.left_basis.nrows() {
        return Err(FlycomError::DimensionMismatch(
            "basis and ground truth disagree".into(),
        ));
    }
    let overlap = u.transpose() * &truth.left_basis;
    let sq: Vec<f64> = truth.singular_values.iter().map(|s| s * s).collect();
    let mut sketch = 0.0;
    for i in 0..u.ncols().min(r) {
        for j in r..sq.len() {
            sketch += (sq[i] - sq[j]) * overlap[(i, j)].powi(2);
        }
    }
    Ok((sketch, truth.residual_energy()))
}

/// Ground-truth spectrum and noise history feeding the bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub singular_values: Vec<f64>,
    pub r: usize,
    /// Number of observations `t` (after selection, `t'`).
    pub t: usize,
    pub m: usize,
    pub sigma2: f64,
    pub eta_history: Vec<f64>,
    /// `λ_j = σ_j² + (σ²/(2t)) Σ_ℓ η_ℓ`, descending.
    pub lambda: Vec<f64>,
}

impl BoundInputs {
    pub fn new(
        singular_values: &[f64],
        r: usize,
        m: usize,
        sigma2: f64,
        eta_history: &[f64],
    ) -> Result<Self> {
        let t = eta_history.len();
        if t == 0 {
            return Err(FlycomError::EmptyHistory);
        }
        let shift = sigma2 / (2.0 * t as f64) * eta_history.iter().sum::<f64>();
        Self::with_shift(singular_values, r, m, sigma2, eta_history.to_vec(), shift)
    }

    /// Same inputs from `Tr(A_ℓ^H A_ℓ)`: `λ_j = σ_j² + (σ²/(2tM)) Σ_ℓ Tr(A_ℓ^H A_ℓ)`.
    pub fn from_gram_traces(
        singular_values: &[f64],
        r: usize,
        m: usize,
        sigma2: f64,
        traces: &[f64],
    ) -> Result<Self> {
        let t = traces.len();
        if t == 0 {
            return Err(FlycomError::EmptyHistory);
        }
        let shift = sigma2 / (2.0 * (t * m) as f64) * traces.iter().sum::<f64>();
        let eta = traces.iter().map(|tr| tr / m as f64).collect();
        Self::with_shift(singular_values, r, m, sigma2, eta, shift)
    }

    fn with_shift(
        singular_values: &[f64],
        r: usize,
        m: usize,
        sigma2: f64,
        eta_history: Vec<f64>,
        shift: f64,
    ) -> Result<Self> {
        if r == 0 || r >= singular_values.len() || m == 0 {
            return Err(FlycomError::InvalidArgument(format!(
                "need 1 <= r < I and M >= 1 (r={r}, I={}, M={m})",
                singular_values.len()
            )));
        }
        if !(sigma2 >= 0.0) || !(shift >= 0.0) {
            return Err(FlycomError::InvalidArgument(
                "noise terms must be nonnegative".into(),
            ));
        }
        Ok(Self {
            lambda: singular_values.iter().map(|s| s * s + shift).collect(),
            singular_values: singular_values.to_vec(),
            r,
            t: eta_history.len(),
            m,
            sigma2,
            eta_history,
        })
    }

    pub fn trace_lambda(&self) -> f64 {
        self.lambda.iter().sum()
    }

    pub fn residual(&self) -> f64 {
        self.singular_values[self.r..].iter().map(|s| s * s).sum()
    }

    /// `Σ_{i≤r} Σ_{j>r} (λ_j² + λ_j Tr Λ) / (σ_i² − σ_j²)`.
    fn perturbation_sum(&self) -> Result<f64> {
        let r = self.r;
        let gap = self.singular_values[r - 1].powi(2) - self.singular_values[r].powi(2);
        if !(gap > 0.0) {
            return Err(FlycomError::ZeroEigenGap);
        }
        let tr = self.trace_lambda();
        let mut sum = 0.0;
        for i in 0..r {
            let si = self.singular_values[i].powi(2);
            for j in r..self.lambda.len() {
                let lj = self.lambda[j];
                let denom = si - self.singular_values[j].powi(2);
                if !(denom > 0.0) {
                    return Err(FlycomError::ZeroEigenGap);
                }
                sum += (lj * lj + lj * tr) / denom;
            }
        }
        Ok(sum)
    }

    /// First term of the expected-error bound, `(4/tM) × Σ…`.
    pub fn expected_excess(&self) -> Result<f64> {
        Ok(4.0 / (self.t * self.m) as f64 * self.perturbation_sum()?)
    }
}

/// Perturbation diagnostics `δ_ij`, `i ≤ r < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaReport {
    /// `r×(I−r)`; column `c` is `j = r + c`.
    pub matrix: DMatrix<f64>,
    /// Eigenvalues `λ̃` of `Φ Φ^T / (tM)`, descending.
    pub sample_eigenvalues: Vec<f64>,
    /// Fraction of entries with `δ_ij ≤ 2`.
    pub fraction_ok: f64,
    /// Mean over finite entries.
    pub mean: f64,
    /// Entries with a vanishing denominator, reported as `+∞`.
    pub undefined: usize,
}

impl DeltaReport {
    pub fn compliant(&self) -> bool {
        self.fraction_ok == 1.0
    }
}

pub fn delta_from_eigenvalues(sample: &[f64], inputs: &BoundInputs) -> Result<DeltaReport> {
    let n = inputs.lambda.len();
    if sample.len() != n {
        return Err(FlycomError::DimensionMismatch(format!(
            "{} sample eigenvalues for dimension {n}",
            sample.len()
        )));
    }
    let r = inputs.r;
    let sq: Vec<f64> = inputs.singular_values.iter().map(|s| s * s).collect();
    let mut matrix = DMatrix::zeros(r, n - r);
    let mut ok = 0usize;
    let mut undefined = 0usize;
    let mut finite_sum = 0.0;
    let mut finite_count = 0usize;
    for i in 0..r {
        for j in r..n {
            let num = (2.0 * (sample[i] - inputs.lambda[i]).abs()).min(sq[i] - sq[j]);
            let den = (sample[i] - inputs.lambda[j]).abs();
            let delta = if den > 0.0 {
                num / den
            } else {
                undefined += 1;
                f64::INFINITY
            };
            if delta <= 2.0 {
                ok += 1;
            }
            if delta.is_finite() {
                finite_sum += delta;
                finite_count += 1;
            }
            matrix[(i, j - r)] = delta;
        }
    }
    Ok(DeltaReport {
        matrix,
        sample_eigenvalues: sample.to_vec(),
        fraction_ok: ok as f64 / (r * (n - r)) as f64,
        mean: if finite_count > 0 {
            finite_sum / finite_count as f64
        } else {
            f64::NAN
        },
        undefined,
    })
}

/// `δ_ij` from the whitened observation.
pub fn delta_diagnostics(phi: &DMatrix<f64>, inputs: &BoundInputs) -> Result<DeltaReport> {
    let cols = phi.ncols();
    if cols == 0 {
        return Err(FlycomError::InvalidArgument("empty observation".into()));
    }
    let (vals, _) = sym_eigen_desc(&(phi * phi.transpose() / cols as f64))?;
    delta_from_eigenvalues(&vals, inputs)
}

/// Expected-error bound, valid in the region `δ_ij ≤ 2`.
pub fn expected_error_bound(inputs: &BoundInputs) -> Result<f64> {
    Ok(inputs.expected_excess()? + inputs.residual())
}

/// High-probability bound with slack `ε`, and the probability floor
/// `[1 − exp(−ε²/(2κ⁸))] erf(κ/√2)^{tM(I−r)}`.
pub fn high_probability_bound(
    inputs: &BoundInputs,
    epsilon: f64,
    kappa: f64,
) -> Result<(f64, f64)> {
    if !(epsilon >= 0.0) || !(kappa >= 1.0) {
        return Err(FlycomError::InvalidArgument(format!(
            "need epsilon >= 0 and kappa >= 1 (epsilon={epsilon}, kappa={kappa})"
        )));
    }
    let bound = (1.0 + epsilon) * inputs.expected_excess()? + inputs.residual();
    let tail = -(-epsilon * epsilon / (2.0 * kappa.powi(8))).exp_m1();
    let exponent = (inputs.t * inputs.m * (inputs.lambda.len() - inputs.r)) as f64;
    let coverage = erf(kappa / std::f64::consts::SQRT_2).ln() * exponent;
    let floor = (tail * coverage.exp()).clamp(0.0, 1.0);
    Ok((bound, floor))
}

/// Selection bound `c × (1/M̃)(1 + r σ² η_th / (2 Tr(X^T X)))²`, used for ranking.
pub fn selection_bound(
    threshold: f64,
    m_tilde: usize,
    r: usize,
    sigma2: f64,
    global_trace: f64,
    c: f64,
) -> Result<f64> {
    if m_tilde == 0 {
        return Err(FlycomError::InvalidArgument("M̃ must be at least 1".into()));
    }
    if !(global_trace > 0.0) {
        return Err(FlycomError::InvalidArgument(
            "global trace must be positive".into(),
        ));
    }
    Ok(c * threshold_objective(threshold, m_tilde, r, sigma2, global_trace))
}

/// Log-log slope of `error − residual` against `t`. Points within 2% of
/// the residual floor are dropped.
pub fn scaling_fit(curve: &[(f64, f64)], residual: f64) -> Result<f64> {
    if curve.len() < 5 {
        return Err(FlycomError::InvalidArgument(format!(
            "need at least 5 points, got {}",
            curve.len()
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .iter()
        .filter(|(t, e)| *t > 0.0 && e - residual > 0.02 * residual && e - residual > 0.0)
        .map(|(t, e)| (t.ln(), (e - residual).ln()))
        .unzip();
    if xs.len() < 2 {
        return Err(FlycomError::InvalidArgument(
            "fewer than 2 points above the residual floor".into(),
        ));
    }
    Ok(linear_fit(&xs, &ys)?.0)
}

/// Every diagnostic of one estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub total_error: f64,
    pub sketch_term: f64,
    pub residual_term: f64,
    pub deltas: DeltaReport,
    pub theorem1_bound: f64,
    /// `(bound, probability floor)` for the requested `(ε, κ)`.
    pub high_probability: Option<(f64, f64)>,
}

impl ErrorReport {
    pub fn evaluate(
        basis: &DMatrix<f64>,
        x: &DMatrix<f64>,
        truth: &GroundTruth,
        sample_eigenvalues: &[f64],
        inputs: &BoundInputs,
        high_probability_params: Option<(f64, f64)>,
    ) -> Result<Self> {
        let total_error = dtd_error(basis, x)?;
        let (sketch_term, residual_term) = error_decomposition(basis, truth)?;
        Ok(Self {
            total_error,
            sketch_term,
            residual_term,
            deltas: delta_from_eigenvalues(sample_eigenvalues, inputs)?,
            theorem1_bound: expected_error_bound(inputs)?,
            high_probability: high_probability_params
                .map(|(e, k)| high_probability_bound(inputs, e, k))
                .transpose()?,
        })
    }

    /// `|d − (sketch + residual)|`.
    pub fn decomposition_gap(&self) -> f64 {
        (self.total_error - self.sketch_term - self.residual_term).abs()
    }
}
