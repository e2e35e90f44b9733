//! One-shot benchmark schemes: devices compute local principal
//! eigenspaces by full eigendecomposition and upload them once through the
//! same AirComp stack.

use nalgebra::DMatrix;

use crate::channel::{aircomp_round, establish_link, FadingModel};
use crate::detector::SubspaceEstimate;
use crate::error::{FlycomError, Result};
use crate::linalg::sym_eigen_desc;
use crate::rng::{derive_seed, Stream};
use crate::sketch::LocalSketch;
use crate::tensor::principal_eigenspace;

/// Top-`r` eigenvectors of `X_k X_k^T` for one device.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalEigenspace {
    pub device: usize,
    /// `Û_k`, `I×r`.
    pub basis: DMatrix<f64>,
}

pub fn local_eigenspaces(locals: &[DMatrix<f64>], r: usize) -> Result<Vec<LocalEigenspace>> {
    locals
        .iter()
        .enumerate()
        .map(|(device, x)| {
            Ok(LocalEigenspace {
                device,
                basis: principal_eigenspace(&(x * x.transpose()), r)?,
            })
        })
        .collect()
}

/// Fading link used for the uploads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub model: FadingModel,
    pub sigma2: f64,
    pub power: f64,
    pub seed: u64,
}

/// How the payload reaches the server. `None` is an ideal, noiseless sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelContext {
    pub link: Option<LinkParams>,
}

impl ChannelContext {
    pub fn ideal() -> Self {
        Self { link: None }
    }
}

/// Slots needed to upload `cols` columns of height `rows` in `M`-wide symbols.
pub fn one_shot_cost(rows: usize, cols: usize, m: usize) -> usize {
    cols.div_ceil(m) * rows
}

/// Per-upload link statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UploadAudit {
    pub blocks: usize,
    pub max_power_ratio: f64,
    pub max_equality_gap: f64,
}

/// Over-the-air sum of equally shaped device payloads, sent `m` columns at a
/// time with a fresh channel per block. The last block is zero-padded.
pub fn aggregate_payloads(
    payloads: &[DMatrix<f64>],
    ctx: &ChannelContext,
    m: usize,
) -> Result<(DMatrix<f64>, UploadAudit)> {
    let first = payloads
        .first()
        .ok_or_else(|| FlycomError::InvalidArgument("no payloads".into()))?;
    let (rows, cols) = first.shape();
    if payloads.iter().any(|p| p.shape() != (rows, cols)) {
        return Err(FlycomError::DimensionMismatch(
            "payloads differ in shape".into(),
        ));
    }
    match ctx.link {
        None => {
            let mut sum = DMatrix::zeros(rows, cols);
            for p in payloads {
                sum += p;
            }
            Ok((sum, UploadAudit::default()))
        }
        Some(link) => aggregate_over_link(payloads, &link, m, rows, cols),
    }
}

fn aggregate_over_link(
    payloads: &[DMatrix<f64>],
    link: &LinkParams,
    m: usize,
    rows: usize,
    cols: usize,
) -> Result<(DMatrix<f64>, UploadAudit)> {
    if m == 0 || m > link.model.tx_antennas {
        return Err(FlycomError::InvalidArgument(format!(
            "symbol width must be in 1..={}, got {m}",
            link.model.tx_antennas
        )));
    }
    let channel_seed = derive_seed(link.seed, Stream::PayloadChannel, 0, 0);
    let noise_seed = derive_seed(link.seed, Stream::PayloadNoise, 0, 0);
    let blocks = cols.div_ceil(m);
    let mut sum = DMatrix::zeros(rows, cols);
    let mut audit = UploadAudit {
        blocks,
        ..UploadAudit::default()
    };
    for b in 0..blocks {
        let start = b * m;
        let width = m.min(cols - start);
        let sketches: Vec<LocalSketch> = payloads
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let mut entries = DMatrix::zeros(rows, m);
                entries
                    .columns_mut(0, width)
                    .copy_from(&p.columns(start, width));
                LocalSketch {
                    slot: b as u64,
                    device: k as u64,
                    entries,
                }
            })
            .collect();
        let traces: Vec<f64> = sketches.iter().map(|s| s.entries.norm_squared()).collect();
        if traces.iter().all(|&c| c == 0.0) {
            // nothing to send in this block
            continue;
        }
        let slot_link = establish_link(
            channel_seed,
            b as u64,
            payloads.len(),
            &link.model,
            m,
            &traces,
            link.power,
            rows,
        )?;
        audit.max_power_ratio = audit.max_power_ratio.max(slot_link.audit.max_ratio());
        audit.max_equality_gap = audit.max_equality_gap.max(slot_link.audit.equality_gap());
        let sym = aircomp_round(
            &sketches,
            &slot_link.channels,
            &slot_link.beamformer,
            link.sigma2,
            noise_seed,
        )?;
        sum.columns_mut(start, width)
            .copy_from(&sym.y_real.columns(0, width));
    }
    Ok((sum, audit))
}

fn top_r_estimate(sym: &DMatrix<f64>, r: usize, slot: u64) -> Result<SubspaceEstimate> {
    let (eigenvalues, full_basis) = sym_eigen_desc(sym)?;
    Ok(SubspaceEstimate {
        basis: full_basis.columns(0, r).into_owned(),
        rank: r,
        slot,
        eigenvalues,
        full_basis,
    })
}

fn check_locals(locals: &[LocalEigenspace], r: usize) -> Result<usize> {
    let first = locals
        .first()
        .ok_or_else(|| FlycomError::InvalidArgument("no local eigenspaces".into()))?;
    let rows = first.basis.nrows();
    if r == 0 || r > rows {
        return Err(FlycomError::RankExceedsDimension { rank: r, dim: rows });
    }
    if locals.iter().any(|l| l.basis.shape() != (rows, r)) {
        return Err(FlycomError::DimensionMismatch(format!(
            "local eigenspaces must all be {rows}x{r}"
        )));
    }
    Ok(rows)
}

/// Baseline estimate together with its upload accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutcome {
    pub estimate: SubspaceEstimate,
    pub audit: UploadAudit,
    pub symbol_slots: usize,
}

/// Centroid of local projectors: `S_r((1/K) Σ_k Û_k Û_k^T)`, with the sum
/// received over the air. `m` is the symbol width.
pub fn centroid_svd_dtd(
    locals: &[LocalEigenspace],
    ctx: &ChannelContext,
    r: usize,
    m: usize,
) -> Result<BaselineOutcome> {
    let rows = check_locals(locals, r)?;
    let payloads: Vec<DMatrix<f64>> = locals
        .iter()
        .map(|l| &l.basis * l.basis.transpose())
        .collect();
    let (sum, audit) = aggregate_payloads(&payloads, ctx, m)?;
    let p = (&sum + sum.transpose()) / (2.0 * locals.len() as f64);
    let symbol_slots = one_shot_cost(rows, rows, m);
    Ok(BaselineOutcome {
        estimate: top_r_estimate(&p, r, symbol_slots as u64)?,
        audit,
        symbol_slots,
    })
}

/// Orthogonal Procrustes rotation `J = argmin_J ‖Û J − ref‖_F`, the polar
/// factor of `Û^T ref`.
pub fn procrustes(local: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if local.shape() != reference.shape() {
        return Err(FlycomError::DimensionMismatch(
            "local basis and reference differ in shape".into(),
        ));
    }
    let svd = (local.transpose() * reference).svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => Ok(u * v_t),
        _ => Err(FlycomError::NonFinite),
    }
}

/// Aligned average: `P = (1/K) Σ_k Û_k J_k` received over the air, estimate
/// `S_r(P P^T)`.
pub fn alignment_svd_dtd(
    locals: &[LocalEigenspace],
    ctx: &ChannelContext,
    r: usize,
    m: usize,
    reference: &DMatrix<f64>,
) -> Result<BaselineOutcome> {
    let rows = check_locals(locals, r)?;
    if reference.shape() != (rows, r) {
        return Err(FlycomError::DimensionMismatch(format!(
            "reference must be {rows}x{r}"
        )));
    }
    let payloads = locals
        .iter()
        .map(|l| Ok(&l.basis * procrustes(&l.basis, reference)?))
        .collect::<Result<Vec<_>>>()?;
    let (sum, audit) = aggregate_payloads(&payloads, ctx, m)?;
    let p = sum / locals.len() as f64;
    let symbol_slots = one_shot_cost(rows, r, m);
    Ok(BaselineOutcome {
        estimate: top_r_estimate(&(&p * p.transpose()), r, symbol_slots as u64)?,
        audit,
        symbol_slots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{
        gaussian_matrix, orthonormal_columns, orthonormality_defect, projector_distance,
    };
    use crate::rng::substream;
    use crate::tensor::{partition_columns, synth_unfolding};

    fn setup(k: usize) -> (Vec<LocalEigenspace>, DMatrix<f64>) {
        let (x, _) = synth_unfolding(30, 300, 4, 2.0, 3).unwrap();
        let part = partition_columns(&x, k, 3).unwrap();
        (local_eigenspaces(&part.locals, 4).unwrap(), x)
    }

    fn link(sigma2: f64) -> ChannelContext {
        ChannelContext {
            link: Some(LinkParams {
                model: FadingModel::default(),
                sigma2,
                power: 1.0,
                seed: 9,
            }),
        }
    }

    #[test]
    fn cost_accounting() {
        assert_eq!(one_shot_cost(100, 100, 2), 5000);
        assert_eq!(one_shot_cost(100, 2, 2), 100);
        assert_eq!(one_shot_cost(100, 12, 1), 1200);
        assert_eq!(one_shot_cost(100, 13, 2), 700);
    }

    #[test]
    fn single_device_centroid_is_local_estimate() {
        let (locals, _) = setup(1);
        let out = centroid_svd_dtd(&locals, &ChannelContext::ideal(), 4, 2).unwrap();
        assert!(projector_distance(&out.estimate.basis, &locals[0].basis) < 1e-8);
    }

    #[test]
    fn identical_devices_centroid() {
        let (locals, _) = setup(1);
        let copies: Vec<_> = (0..5)
            .map(|d| LocalEigenspace {
                device: d,
                basis: locals[0].basis.clone(),
            })
            .collect();
        let out = centroid_svd_dtd(&copies, &ChannelContext::ideal(), 4, 2).unwrap();
        assert!(projector_distance(&out.estimate.basis, &locals[0].basis) < 1e-8);
    }

    fn direct_centroid(locals: &[LocalEigenspace], r: usize) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(locals[0].basis.nrows(), locals[0].basis.nrows());
        for l in locals {
            p += &l.basis * l.basis.transpose();
        }
        principal_eigenspace(&(p / locals.len() as f64), r).unwrap()
    }

    #[test]
    fn noiseless_fading_centroid_matches_direct() {
        let (locals, _) = setup(20);
        let out = centroid_svd_dtd(&locals, &link(0.0), 4, 2).unwrap();
        let direct = direct_centroid(&locals, 4);
        assert!(projector_distance(&out.estimate.basis, &direct) < 1e-8);
        assert!(out.audit.max_power_ratio <= 1.0 + 1e-8);
        assert!(out.audit.max_equality_gap < 1e-8);
        assert_eq!(out.audit.blocks, 15);
        assert!(orthonormality_defect(&out.estimate.basis) < 1e-10);
    }

    #[test]
    fn centroid_ignores_local_rotations() {
        let (locals, _) = setup(6);
        let mut rng = substream(4, Stream::Trial, 0, 0);
        let rotated: Vec<_> = locals
            .iter()
            .map(|l| LocalEigenspace {
                device: l.device,
                basis: &l.basis * orthonormal_columns(gaussian_matrix(&mut rng, 4, 4)),
            })
            .collect();
        let a = centroid_svd_dtd(&locals, &ChannelContext::ideal(), 4, 2).unwrap();
        let b = centroid_svd_dtd(&rotated, &ChannelContext::ideal(), 4, 2).unwrap();
        assert!(projector_distance(&a.estimate.basis, &b.estimate.basis) < 1e-10);
    }

    #[test]
    fn procrustes_undoes_rotation() {
        let mut rng = substream(5, Stream::Trial, 0, 0);
        let u = orthonormal_columns(gaussian_matrix(&mut rng, 12, 3));
        let q = orthonormal_columns(gaussian_matrix(&mut rng, 3, 3));
        let j = procrustes(&(&u * &q), &u).unwrap();
        assert!((&u * &q * j - &u).amax() < 1e-12);
        let id = procrustes(&u, &u).unwrap();
        assert!((id - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn alignment_trivial_cases() {
        let (locals, _) = setup(1);
        let reference = locals[0].basis.clone();
        let same: Vec<_> = (0..3)
            .map(|d| LocalEigenspace {
                device: d,
                basis: reference.clone(),
            })
            .collect();
        let out = alignment_svd_dtd(&same, &ChannelContext::ideal(), 4, 2, &reference).unwrap();
        assert!(projector_distance(&out.estimate.basis, &reference) < 1e-8);
        let mut rng = substream(6, Stream::Trial, 0, 0);
        let q = orthonormal_columns(gaussian_matrix(&mut rng, 4, 4));
        let pair = vec![
            same[0].clone(),
            LocalEigenspace {
                device: 1,
                basis: &reference * q,
            },
        ];
        let out = alignment_svd_dtd(&pair, &ChannelContext::ideal(), 4, 2, &reference).unwrap();
        assert!(projector_distance(&out.estimate.basis, &reference) < 1e-8);
        assert_eq!(out.symbol_slots, 60);
    }

    #[test]
    fn noiseless_fading_alignment_matches_direct() {
        let (locals, _) = setup(20);
        let reference = direct_centroid(&locals, 4);
        let out = alignment_svd_dtd(&locals, &link(0.0), 4, 2, &reference).unwrap();
        let mut p = DMatrix::zeros(30, 4);
        for l in &locals {
            p += &l.basis * procrustes(&l.basis, &reference).unwrap();
        }
        let direct = principal_eigenspace(&(&p * p.transpose()), 4).unwrap();
        assert!(projector_distance(&out.estimate.basis, &direct) < 1e-8);
    }

    #[test]
    fn noisy_upload_stays_orthonormal() {
        let (locals, _) = setup(20);
        let out = centroid_svd_dtd(&locals, &link(0.1), 4, 2).unwrap();
        assert!(orthonormality_defect(&out.estimate.basis) < 1e-10);
    }
}
