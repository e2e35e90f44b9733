//! Server-side subspace detection: accumulate received symbols, whiten the
//! right covariance, and take the ML estimate of the principal eigenspace.

use nalgebra::DMatrix;

use crate::channel::{ReceiveBeamformer, ReceivedSymbol};
use crate::error::{FlycomError, Result};
use crate::linalg::{sym_eigen_desc, CMatrix};

/// Horizontal concatenation `Ŷ = [Ỹ_1, …, Ỹ_t]` in the given order.
pub fn accumulate(symbols: &[ReceivedSymbol]) -> Result<DMatrix<f64>> {
    let refs: Vec<&ReceivedSymbol> = symbols.iter().collect();
    accumulate_refs(&refs)
}

fn accumulate_refs(symbols: &[&ReceivedSymbol]) -> Result<DMatrix<f64>> {
    let first = symbols
        .first()
        .ok_or_else(|| FlycomError::InvalidArgument("no symbols to accumulate".into()))?;
    let (rows, m) = first.y_real.shape();
    let mut out = DMatrix::zeros(rows, m * symbols.len());
    for (n, s) in symbols.iter().enumerate() {
        if s.y_real.shape() != (rows, m) {
            return Err(FlycomError::DimensionMismatch(format!(
                "symbol of slot {} is {}x{}, expected {rows}x{m}",
                s.slot,
                s.y_real.nrows(),
                s.y_real.ncols()
            )));
        }
        out.columns_mut(n * m, m).copy_from(&s.y_real);
    }
    Ok(out)
}

/// Real part of `A_ℓ A_ℓ^H` for one slot.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseGram {
    /// `A A^H = η I_M`.
    Isotropic(f64),
    /// `Re(A A^H)`, `M×M`.
    General(DMatrix<f64>),
}

impl NoiseGram {
    pub fn from_beamformer(bf: &ReceiveBeamformer) -> Self {
        NoiseGram::Isotropic(bf.eta)
    }

    pub fn from_matrix(a: &CMatrix) -> Self {
        NoiseGram::General((a * a.adjoint()).map(|z| z.re))
    }

    /// `Tr(A^H A)`.
    pub fn trace(&self, m: usize) -> f64 {
        match self {
            NoiseGram::Isotropic(eta) => eta * m as f64,
            NoiseGram::General(g) => g.trace(),
        }
    }
}

/// What the server knows when whitening: noise level, the fed-back global
/// trace, and one noise Gram per received slot (in slot order).
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningContext {
    pub sigma2: f64,
    /// `Tr(X^T X) = Σ_k Tr(X_k^T X_k)`.
    pub global_trace: f64,
    pub rows: usize,
    pub m: usize,
    pub noise: Vec<NoiseGram>,
}

impl WhiteningContext {
    pub fn new(sigma2: f64, global_trace: f64, rows: usize, m: usize) -> Result<Self> {
        if !(sigma2 >= 0.0 && global_trace >= 0.0) || rows == 0 || m == 0 {
            return Err(FlycomError::InvalidArgument(
                "whitening context needs sigma2 >= 0, trace >= 0 and positive shapes".into(),
            ));
        }
        Ok(Self {
            sigma2,
            global_trace,
            rows,
            m,
            noise: Vec::new(),
        })
    }

    /// Context whose slots all use isotropic beamformers with the given `η`.
    pub fn with_eta(
        sigma2: f64,
        global_trace: f64,
        rows: usize,
        m: usize,
        eta: &[f64],
    ) -> Result<Self> {
        let mut ctx = Self::new(sigma2, global_trace, rows, m)?;
        for &e in eta {
            ctx.push(NoiseGram::Isotropic(e))?;
        }
        Ok(ctx)
    }

    pub fn push(&mut self, gram: NoiseGram) -> Result<()> {
        match &gram {
            NoiseGram::Isotropic(eta) if !(*eta > 0.0 && eta.is_finite()) => {
                return Err(FlycomError::InvalidArgument(format!(
                    "eta must be positive, got {eta}"
                )));
            }
            NoiseGram::General(g) if g.shape() != (self.m, self.m) => {
                return Err(FlycomError::DimensionMismatch(format!(
                    "noise Gram is {}x{}, expected {m}x{m}",
                    g.nrows(),
                    g.ncols(),
                    m = self.m
                )));
            }
            _ => {}
        }
        self.noise.push(gram);
        Ok(())
    }

    /// `η_ℓ` per slot; for general Grams, `Tr(A A^H)/M`.
    pub fn eta_history(&self) -> Vec<f64> {
        self.noise
            .iter()
            .map(|g| g.trace(self.m) / self.m as f64)
            .collect()
    }
}

/// One `M×M` diagonal block of the right covariance.
#[derive(Debug, Clone, PartialEq)]
pub enum DBlock {
    Scaled(f64),
    Full(DMatrix<f64>),
}

/// Block-diagonal right covariance `D`, one block per included slot.
#[derive(Debug, Clone, PartialEq)]
pub struct RightCovariance {
    pub m: usize,
    pub blocks: Vec<DBlock>,
}

impl RightCovariance {
    pub fn identity(m: usize, slots: usize) -> Self {
        Self {
            m,
            blocks: vec![DBlock::Scaled(1.0); slots],
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.m;
        let mut out = DMatrix::zeros(m * self.blocks.len(), m * self.blocks.len());
        for (n, b) in self.blocks.iter().enumerate() {
            let mut view = out.view_mut((n * m, n * m), (m, m));
            match b {
                DBlock::Scaled(s) => view.fill_diagonal(*s),
                DBlock::Full(g) => view.copy_from(g),
            }
        }
        out
    }
}

/// Right covariance of the accumulated observation over the `included`
/// slots (indices into the context's history).
///
/// Block `ℓ` is `(Tr(X^T X) I_M + ½ I σ² Re(A_ℓ A_ℓ^H)) / Z` with
/// `Z = Tr(X^T X) + (I σ² / (2 t' M)) Σ_ℓ Tr(A_ℓ^H A_ℓ)`, so `Tr(D) = t' M`.
pub fn right_covariance_d(ctx: &WhiteningContext, included: &[usize]) -> Result<RightCovariance> {
    if included.is_empty() {
        return Err(FlycomError::InvalidArgument("no slots included".into()));
    }
    if let Some(&bad) = included.iter().find(|&&i| i >= ctx.noise.len()) {
        return Err(FlycomError::InvalidArgument(format!(
            "slot index {bad} beyond history of length {}",
            ctx.noise.len()
        )));
    }
    let m = ctx.m;
    let half_noise = 0.5 * ctx.rows as f64 * ctx.sigma2;
    let gram_sum: f64 = included.iter().map(|&i| ctx.noise[i].trace(m)).sum();
    let z = ctx.global_trace + half_noise * gram_sum / (included.len() * m) as f64;
    if !(z > 0.0 && z.is_finite()) {
        return Err(FlycomError::NotPositiveDefinite);
    }
    let blocks = included
        .iter()
        .map(|&i| match &ctx.noise[i] {
            NoiseGram::Isotropic(eta) => DBlock::Scaled((ctx.global_trace + half_noise * eta) / z),
            NoiseGram::General(g) => {
                let mut b = g * half_noise;
                for d in 0..m {
                    b[(d, d)] += ctx.global_trace;
                }
                DBlock::Full(b / z)
            }
        })
        .collect();
    Ok(RightCovariance { m, blocks })
}

fn inv_sqrt_spd(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen_desc(b)?;
    let floor = vals[0].abs() * 1e-14;
    if vals.iter().any(|&v| !(v > floor)) {
        return Err(FlycomError::NotPositiveDefinite);
    }
    let mut scaled = vecs.clone();
    for (j, v) in vals.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / v.sqrt());
    }
    Ok(scaled * vecs.transpose())
}

/// `Φ = Ŷ D^{-1/2}`.
pub fn whiten(y_hat: &DMatrix<f64>, d: &RightCovariance) -> Result<DMatrix<f64>> {
    let m = d.m;
    if y_hat.ncols() != m * d.blocks.len() {
        return Err(FlycomError::DimensionMismatch(format!(
            "observation has {} columns, D covers {}",
            y_hat.ncols(),
            m * d.blocks.len()
        )));
    }
    let mut phi = y_hat.clone();
    for (n, b) in d.blocks.iter().enumerate() {
        match b {
            DBlock::Scaled(s) => {
                if !(*s > 0.0 && s.is_finite()) {
                    return Err(FlycomError::NotPositiveDefinite);
                }
                if *s != 1.0 {
                    phi.columns_mut(n * m, m).scale_mut(1.0 / s.sqrt());
                }
            }
            DBlock::Full(g) => {
                let w = inv_sqrt_spd(g)?;
                let block = y_hat.columns(n * m, m) * w;
                phi.columns_mut(n * m, m).copy_from(&block);
            }
        }
    }
    Ok(phi)
}

/// Whitened observation `Φ_t` built from the included slots.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveObservation {
    /// Slot of the last received symbol.
    pub slot: u64,
    /// `I×(t'M)`.
    pub phi: DMatrix<f64>,
    pub included_slots: Vec<u64>,
}

/// Accumulate and whiten the symbols at positions `included` (ascending
/// indices into `symbols`, which is parallel to the context's history).
pub fn effective_observation(
    symbols: &[ReceivedSymbol],
    ctx: &WhiteningContext,
    included: &[usize],
) -> Result<EffectiveObservation> {
    if symbols.len() != ctx.noise.len() {
        return Err(FlycomError::DimensionMismatch(format!(
            "{} symbols but {} noise records",
            symbols.len(),
            ctx.noise.len()
        )));
    }
    if included.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FlycomError::InvalidArgument(
            "included slots must be strictly ascending".into(),
        ));
    }
    let chosen: Vec<&ReceivedSymbol> = included
        .iter()
        .map(|&i| {
            symbols
                .get(i)
                .ok_or_else(|| FlycomError::InvalidArgument(format!("slot index {i} out of range")))
        })
        .collect::<Result<_>>()?;
    let y_hat = accumulate_refs(&chosen)?;
    if y_hat.nrows() != ctx.rows || chosen[0].y_real.ncols() != ctx.m {
        return Err(FlycomError::DimensionMismatch(
            "symbol shape disagrees with the whitening context".into(),
        ));
    }
    let d = right_covariance_d(ctx, included)?;
    Ok(EffectiveObservation {
        slot: symbols.last().map_or(0, |s| s.slot),
        phi: whiten(&y_hat, &d)?,
        included_slots: chosen.iter().map(|s| s.slot).collect(),
    })
}

/// ML estimate of the `r`-dimensional principal eigenspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceEstimate {
    /// `Ũ`, `I×r`.
    pub basis: DMatrix<f64>,
    pub rank: usize,
    pub slot: u64,
    /// `γ_1 ≥ … ≥ γ_I` of `Φ Φ^T`.
    pub eigenvalues: Vec<f64>,
    /// All eigenvectors `Q` of `Φ Φ^T`, the full-basis estimate `Ũ_X`.
    pub full_basis: DMatrix<f64>,
}

/// Top-`r` eigenvectors of `Φ Φ^T`.
pub fn ml_subspace(obs: &EffectiveObservation, r: usize) -> Result<SubspaceEstimate> {
    let (rows, cols) = obs.phi.shape();
    if r == 0 || r > rows {
        return Err(FlycomError::RankExceedsDimension { rank: r, dim: rows });
    }
    if cols < r {
        return Err(FlycomError::InsufficientSketches {
            available: cols,
            required: r,
        });
    }
    let gram = &obs.phi * obs.phi.transpose();
    let (eigenvalues, full_basis) = sym_eigen_desc(&gram)?;
    Ok(SubspaceEstimate {
        basis: full_basis.columns(0, r).into_owned(),
        rank: r,
        slot: obs.slot,
        eigenvalues,
        full_basis,
    })
}

/// Accumulate, whiten and extract using every received symbol.
pub fn detect(
    symbols: &[ReceivedSymbol],
    ctx: &WhiteningContext,
    r: usize,
) -> Result<SubspaceEstimate> {
    let all: Vec<usize> = (0..symbols.len()).collect();
    detect_subset(symbols, ctx, &all, r)
}

/// Accumulate, whiten and extract using the symbols at positions `included`.
pub fn detect_subset(
    symbols: &[ReceivedSymbol],
    ctx: &WhiteningContext,
    included: &[usize],
    r: usize,
) -> Result<SubspaceEstimate> {
    ml_subspace(&effective_observation(symbols, ctx, included)?, r)
}

/// Negative log-likelihood kernel `Tr(Φ^T U Λ^{-1} U^T Φ)` for a full
/// orthogonal basis `U` and per-column variances `λ`.
pub fn ml_objective(phi: &DMatrix<f64>, basis: &DMatrix<f64>, lambda: &[f64]) -> Result<f64> {
    if basis.ncols() != lambda.len() || basis.nrows() != phi.nrows() {
        return Err(FlycomError::DimensionMismatch(
            "basis, variances and observation disagree".into(),
        ));
    }
    if lambda.iter().any(|&l| !(l > 0.0)) {
        return Err(FlycomError::InvalidArgument(
            "variances must be positive".into(),
        ));
    }
    let proj = basis.transpose() * phi;
    Ok(proj
        .row_iter()
        .zip(lambda)
        .map(|(row, l)| row.norm_squared() / l)
        .sum())
}

/// `Σ_i γ_i / λ_i`, the minimum of [`ml_objective`] over orthogonal bases.
pub fn ml_objective_lower_bound(eigenvalues: &[f64], lambda: &[f64]) -> f64 {
    eigenvalues.iter().zip(lambda).map(|(g, l)| g / l).sum()
}
