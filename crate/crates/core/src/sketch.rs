//! Device-side streaming sketches: per-slot Gaussian dimension-reduction
//! maps and local sketches `S_{t,k} = X_k Ω_{t,k}`.
//!
//! Devices only multiply; nothing here factorizes a matrix.

use nalgebra::DMatrix;

use crate::error::{FlycomError, Result};
use crate::linalg::gaussian_matrix;
use crate::rng::{substream, Stream};

/// Address of a DRM block: the run's root seed plus slot and device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedLineage {
    pub root: u64,
    pub slot: u64,
    pub device: u64,
}

/// `J_k×M` matrix of i.i.d. N(0,1) entries for one device and slot.
#[derive(Debug, Clone, PartialEq)]
pub struct DrmBlock {
    pub lineage: SeedLineage,
    pub entries: DMatrix<f64>,
}

impl DrmBlock {
    pub fn slot(&self) -> u64 {
        self.lineage.slot
    }

    pub fn device(&self) -> u64 {
        self.lineage.device
    }
}

/// Regenerate the DRM block of device `device` at slot `slot`.
pub fn gen_drm(
    root_seed: u64,
    slot: u64,
    device: u64,
    rows: usize,
    cols: usize,
) -> Result<DrmBlock> {
    if rows == 0 || cols == 0 {
        return Err(FlycomError::InvalidArgument(format!(
            "DRM block must be nonempty, got {rows}x{cols}"
        )));
    }
    let mut rng = substream(root_seed, Stream::Drm, slot, device);
    Ok(DrmBlock {
        lineage: SeedLineage {
            root: root_seed,
            slot,
            device,
        },
        entries: gaussian_matrix(&mut rng, rows, cols),
    })
}

/// Stacked global DRM `F_t = [Ω_{t,1}; …; Ω_{t,K}]` for the given per-device
/// row counts.
pub fn stacked_drm(
    root_seed: u64,
    slot: u64,
    row_counts: &[usize],
    cols: usize,
) -> Result<DMatrix<f64>> {
    let total: usize = row_counts.iter().sum();
    let mut out = DMatrix::zeros(total, cols);
    let mut offset = 0;
    for (k, &rows) in row_counts.iter().enumerate() {
        let block = gen_drm(root_seed, slot, k as u64, rows, cols)?;
        out.rows_mut(offset, rows).copy_from(&block.entries);
        offset += rows;
    }
    Ok(out)
}

/// `I×M` sketch uploaded by one device in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSketch {
    pub slot: u64,
    pub device: u64,
    pub entries: DMatrix<f64>,
}

pub fn local_sketch(local: &DMatrix<f64>, drm: &DrmBlock) -> Result<LocalSketch> {
    if local.ncols() != drm.entries.nrows() {
        return Err(FlycomError::DimensionMismatch(format!(
            "local data has {} columns but the DRM has {} rows",
            local.ncols(),
            drm.entries.nrows()
        )));
    }
    Ok(LocalSketch {
        slot: drm.slot(),
        device: drm.device(),
        entries: local * &drm.entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{partition_columns, synth_unfolding};

    #[test]
    fn regeneration_is_bitwise_identical() {
        let a = gen_drm(42, 3, 7, 75, 4).unwrap();
        let b = gen_drm(42, 3, 7, 75, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.entries.shape(), (75, 4));
        assert_ne!(a.entries, gen_drm(42, 4, 7, 75, 4).unwrap().entries);
    }

    #[test]
    fn empty_block_rejected() {
        assert!(gen_drm(0, 0, 0, 0, 2).is_err());
        assert!(gen_drm(0, 0, 0, 3, 0).is_err());
    }

    #[test]
    fn entry_moments_within_five_sigma() {
        let block = gen_drm(1, 1, 1, 200, 100).unwrap();
        let n = block.entries.len() as f64;
        let mean = block.entries.sum() / n;
        let var = block
            .entries
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        assert!(mean.abs() < 5.0 / n.sqrt());
        // var of the sample variance of N(0,1) is 2/(n-1)
        assert!((var - 1.0).abs() < 5.0 * (2.0 / (n - 1.0)).sqrt());
    }

    #[test]
    fn stacked_drm_column_covariance_is_identity() {
        // sample-covariance oracle over 10^4 draws of F_t (K=20 devices)
        let rows = vec![1usize; 20];
        let m = 4;
        let draws = 10_000;
        let mut acc = DMatrix::<f64>::zeros(m, m);
        for t in 0..draws {
            let f = stacked_drm(9, t, &rows, m).unwrap();
            acc += f.transpose() * &f;
        }
        acc /= (draws as usize * rows.len()) as f64;
        let dev = (acc - DMatrix::<f64>::identity(m, m)).amax();
        // entrywise standard error is about sqrt(2 / 2e5)
        assert!(dev < 5.0 * (2.0 / 2.0e5_f64).sqrt(), "dev {dev}");
    }

    #[test]
    fn identity_and_zero_data() {
        let drm = gen_drm(5, 1, 0, 6, 3).unwrap();
        let s = local_sketch(&DMatrix::identity(6, 6), &drm).unwrap();
        assert_eq!(s.entries, drm.entries);
        let z = local_sketch(&DMatrix::zeros(4, 6), &drm).unwrap();
        assert!(z.entries.iter().all(|&v| v == 0.0));
        assert!(local_sketch(&DMatrix::zeros(4, 5), &drm).is_err());
    }

    #[test]
    fn sketch_matches_naive_product() {
        let (x, _) = synth_unfolding(100, 1500, 12, 2.0, 2).unwrap();
        let part = partition_columns(&x, 20, 2).unwrap();
        let local = &part.locals[3];
        let drm = gen_drm(2, 1, 3, local.ncols(), 2).unwrap();
        let s = local_sketch(local, &drm).unwrap();
        for i in 0..local.nrows() {
            for j in 0..2 {
                let mut acc = 0.0;
                for c in 0..local.ncols() {
                    acc += local[(i, c)] * drm.entries[(c, j)];
                }
                assert!((acc - s.entries[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn summed_sketches_equal_global_sketch() {
        let (x, _) = synth_unfolding(30, 200, 3, 1.0, 4).unwrap();
        let part = partition_columns(&x, 7, 4).unwrap();
        let m = 3;
        let mut sum = DMatrix::zeros(30, m);
        for (k, local) in part.locals.iter().enumerate() {
            let drm = gen_drm(11, 5, k as u64, local.ncols(), m).unwrap();
            sum += local_sketch(local, &drm).unwrap().entries;
        }
        let f = stacked_drm(11, 5, &part.column_counts(), m).unwrap();
        let global = part.concatenated() * f;
        assert!((sum - global).amax() < 1e-10);
    }
}
