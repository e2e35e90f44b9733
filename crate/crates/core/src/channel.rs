//! MIMO multiple-access channel and over-the-air aggregation.
//!
//! Conventions:
//! - complex channels use the conjugate transpose everywhere (`H H^H`);
//! - the receive beamformer is `A_t = √η_t · U_A` with row-orthonormal `U_A`,
//!   so `Tr(A_t^H A_t) = η_t M` and `A_t A_t^H = η_t I_M`;
//! - noise entries are CN(0, σ²); only the in-phase part of the received
//!   symbol is kept.

use nalgebra::DMatrix;
use rand_distr::{Distribution, Gamma};

use crate::error::{FlycomError, Result};
use crate::linalg::{
    complex_gaussian_matrix, herm_eigen_desc, hermitian_condition, CMatrix, Complex64,
};
use crate::rng::{substream, Stream};
use crate::sketch::LocalSketch;

/// Effective channels whose Gram condition number exceeds this are resampled.
pub const MAX_CONDITION: f64 = 1e10;

/// Antenna counts and shadowing law of the fading channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingModel {
    pub rx_antennas: usize,
    pub tx_antennas: usize,
    pub gamma_shape: f64,
    pub gamma_scale: f64,
}

impl Default for FadingModel {
    fn default() -> Self {
        Self {
            rx_antennas: 16,
            tx_antennas: 4,
            gamma_shape: 1.2,
            gamma_scale: 0.83,
        }
    }
}

impl FadingModel {
    fn validate(&self) -> Result<()> {
        if self.tx_antennas == 0 || self.rx_antennas < self.tx_antennas {
            return Err(FlycomError::InvalidArgument(format!(
                "need N_r >= N_t >= 1 (N_r={}, N_t={})",
                self.rx_antennas, self.tx_antennas
            )));
        }
        if !(self.gamma_shape > 0.0 && self.gamma_scale > 0.0) {
            return Err(FlycomError::InvalidArgument(
                "shadowing Gamma parameters must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `H_{t,k} = √β Ĥ` for one device in one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub slot: u64,
    pub device: u64,
    /// `N_r×N_t`.
    pub h: CMatrix,
    pub shadow_beta: f64,
}

fn draw_channel(
    seed: u64,
    slot: u64,
    device: u64,
    attempt: u64,
    model: &FadingModel,
) -> Result<ChannelRealization> {
    model.validate()?;
    let mut rng = substream(seed, Stream::Channel, slot, device | (attempt << 32));
    let gamma = Gamma::new(model.gamma_shape, model.gamma_scale)
        .map_err(|e| FlycomError::InvalidArgument(e.to_string()))?;
    let beta = gamma.sample(&mut rng);
    let h = complex_gaussian_matrix(&mut rng, model.rx_antennas, model.tx_antennas, 1.0)
        * Complex64::new(beta.sqrt(), 0.0);
    Ok(ChannelRealization {
        slot,
        device,
        h,
        shadow_beta: beta,
    })
}

/// Rayleigh channel with Gamma shadowing, deterministic per `(seed, slot, device)`.
pub fn sample_channel(
    seed: u64,
    slot: u64,
    device: u64,
    model: &FadingModel,
) -> Result<ChannelRealization> {
    draw_channel(seed, slot, device, 0, model)
}

/// Receive beamformer `A_t = √η_t · U_A`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiveBeamformer {
    pub slot: u64,
    pub eta: f64,
    /// `M×N_r`, orthonormal rows.
    pub unitary: CMatrix,
}

impl ReceiveBeamformer {
    /// `A_t`.
    pub fn matrix(&self) -> CMatrix {
        &self.unitary * Complex64::new(self.eta.sqrt(), 0.0)
    }

    /// Beamformer with `A A^H = gram_scale · I_M`, bypassing channel-aware
    /// design. Used for validation runs with a fixed receiver.
    pub fn pinned(slot: u64, rx_antennas: usize, m: usize, gram_scale: f64) -> Self {
        let unitary = CMatrix::from_fn(m, rx_antennas, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Self {
            slot,
            eta: gram_scale,
            unitary,
        }
    }

    pub fn streams(&self) -> usize {
        self.unitary.nrows()
    }

    /// `Tr(A^H A)`.
    pub fn gram_trace(&self) -> f64 {
        self.eta * self.unitary.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }
}

/// Top-`m` eigenvectors (as rows) of `(1/K) Σ_k λ_k U_k U_k^H`, where
/// `U_k` spans the column space of `H_k` and `λ_k` is the `N_t`-th
/// eigenvalue of `H_k H_k^H`.
pub fn receive_unitary(channels: &[ChannelRealization], m: usize) -> Result<CMatrix> {
    let first = channels
        .first()
        .ok_or_else(|| FlycomError::InvalidArgument("no channels".into()))?;
    let (n_r, n_t) = first.h.shape();
    if m == 0 || m > n_t {
        return Err(FlycomError::InvalidArgument(format!(
            "beamformer dimension must satisfy 1 <= M <= N_t (M={m}, N_t={n_t})"
        )));
    }
    let mut weighted = CMatrix::zeros(n_r, n_r);
    for ch in channels {
        if ch.h.shape() != (n_r, n_t) {
            return Err(FlycomError::DimensionMismatch(
                "channels differ in antenna counts".into(),
            ));
        }
        // eigenpairs of H H^H restricted to its column space, via H^H H
        let (mu, v) = herm_eigen_desc(&(ch.h.adjoint() * &ch.h))?;
        let smallest = mu[n_t - 1];
        if !(smallest > 1e-12 * mu[0].max(f64::MIN_POSITIVE)) {
            return Err(FlycomError::RankDeficient(format!(
                "channel of device {} in slot {} is rank deficient",
                ch.device, ch.slot
            )));
        }
        let mut basis = &ch.h * v;
        for (j, m) in mu.iter().enumerate() {
            basis.column_mut(j).scale_mut(1.0 / m.sqrt());
        }
        weighted += (&basis * basis.adjoint()) * Complex64::new(smallest, 0.0);
    }
    weighted /= Complex64::new(channels.len() as f64, 0.0);
    let (_, q) = herm_eigen_desc(&weighted)?;
    Ok(q.columns(0, m).adjoint())
}

fn effective_gram(a: &CMatrix, h: &CMatrix) -> Result<CMatrix> {
    if a.ncols() != h.nrows() {
        return Err(FlycomError::DimensionMismatch(format!(
            "beamformer has {} columns, channel has {} rows",
            a.ncols(),
            h.nrows()
        )));
    }
    if a.nrows() > h.ncols() {
        return Err(FlycomError::RankDeficient(format!(
            "{} streams exceed {} transmit antennas",
            a.nrows(),
            h.ncols()
        )));
    }
    let ah = a * h;
    Ok(&ah * ah.adjoint())
}

fn checked_inverse(gram: &CMatrix) -> Result<CMatrix> {
    let cond = hermitian_condition(gram)?;
    if !(cond <= MAX_CONDITION) {
        return Err(FlycomError::IllConditioned(cond));
    }
    gram.clone()
        .try_inverse()
        .ok_or(FlycomError::IllConditioned(f64::INFINITY))
}

/// `Tr((U_A H H^H U_A^H)^{-1})` for one device.
pub fn inverse_gain_trace(u_a: &CMatrix, h: &CMatrix) -> Result<f64> {
    Ok(checked_inverse(&effective_gram(u_a, h)?)?.trace().re)
}

/// Per-device terms `(c_k / (I P)) Tr((U_A H_k H_k^H U_A^H)^{-1})`.
fn power_terms(
    u_a: &CMatrix,
    channels: &[ChannelRealization],
    local_traces: &[f64],
    power: f64,
    symbol_len: usize,
) -> Result<Vec<f64>> {
    if channels.len() != local_traces.len() {
        return Err(FlycomError::DimensionMismatch(format!(
            "{} channels but {} local traces",
            channels.len(),
            local_traces.len()
        )));
    }
    if !(power > 0.0) {
        return Err(FlycomError::InvalidArgument(format!(
            "power budget must be positive, got {power}"
        )));
    }
    if local_traces.iter().any(|&c| !(c >= 0.0)) {
        return Err(FlycomError::InvalidArgument(
            "local traces must be nonnegative".into(),
        ));
    }
    let budget = symbol_len as f64 * power;
    channels
        .iter()
        .zip(local_traces)
        .map(|(ch, &c)| Ok(c / budget * inverse_gain_trace(u_a, &ch.h)?))
        .collect()
}

/// Denoising factor sized to the weakest device.
pub fn denoising_factor(
    u_a: &CMatrix,
    channels: &[ChannelRealization],
    local_traces: &[f64],
    power: f64,
    symbol_len: usize,
) -> Result<f64> {
    let terms = power_terms(u_a, channels, local_traces, power, symbol_len)?;
    let eta = terms.iter().copied().fold(0.0, f64::max);
    if !(eta > 0.0) {
        return Err(FlycomError::InvalidArgument(
            "all local traces are zero".into(),
        ));
    }
    Ok(eta)
}

/// Zero-forcing precoder `B = (A H)^H (A H H^H A^H)^{-1}`, `N_t×M`.
pub fn zf_beamformer(a: &CMatrix, h: &CMatrix) -> Result<CMatrix> {
    let inv = checked_inverse(&effective_gram(a, h)?)?;
    Ok((a * h).adjoint() * inv)
}

/// Expected transmit energy of every device relative to the budget `I P`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAudit {
    /// `Tr((A H H^H A^H)^{-1}) Tr(X_k^T X_k) / (I P)` per device.
    pub ratios: Vec<f64>,
    /// Device attaining the maximum.
    pub weakest: usize,
}

impl PowerAudit {
    pub fn max_ratio(&self) -> f64 {
        self.ratios[self.weakest]
    }

    /// `|ratio_weakest − 1|`.
    pub fn equality_gap(&self) -> f64 {
        (self.max_ratio() - 1.0).abs()
    }
}

pub fn power_audit(
    beamformer: &ReceiveBeamformer,
    channels: &[ChannelRealization],
    local_traces: &[f64],
    power: f64,
    symbol_len: usize,
) -> Result<PowerAudit> {
    let terms = power_terms(
        &beamformer.matrix(),
        channels,
        local_traces,
        power,
        symbol_len,
    )?;
    let weakest = (0..terms.len())
        .max_by(|&a, &b| terms[a].total_cmp(&terms[b]))
        .ok_or_else(|| FlycomError::InvalidArgument("no devices".into()))?;
    Ok(PowerAudit {
        ratios: terms,
        weakest,
    })
}

/// In-phase part of the aggregated symbol received in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedSymbol {
    pub slot: u64,
    /// `Ỹ_t`, `I×M`.
    pub y_real: DMatrix<f64>,
    pub eta_used: f64,
    pub selected: bool,
}

fn add_receiver_noise(y: &mut CMatrix, a: &CMatrix, sigma2: f64, noise_seed: u64, slot: u64) {
    if sigma2 > 0.0 {
        let mut rng = substream(noise_seed, Stream::Noise, slot, 0);
        let z = complex_gaussian_matrix(&mut rng, a.ncols(), y.ncols(), sigma2);
        *y += a * z;
    }
}

/// One AirComp slot: every device precodes its sketch with ZF, the server
/// receives `Y = A Σ_k H_k B_k S_k^T + A Z` and keeps `Re{Y^T}`.
pub fn aircomp_round(
    sketches: &[LocalSketch],
    channels: &[ChannelRealization],
    beamformer: &ReceiveBeamformer,
    sigma2: f64,
    noise_seed: u64,
) -> Result<ReceivedSymbol> {
    if sketches.len() != channels.len() || sketches.is_empty() {
        return Err(FlycomError::DimensionMismatch(format!(
            "{} sketches but {} channels",
            sketches.len(),
            channels.len()
        )));
    }
    if !(sigma2 >= 0.0) {
        return Err(FlycomError::InvalidArgument(format!(
            "noise variance must be nonnegative, got {sigma2}"
        )));
    }
    let (rows, m) = sketches[0].entries.shape();
    if m != beamformer.streams() {
        return Err(FlycomError::DimensionMismatch(format!(
            "sketch width {m} differs from beamformer dimension {}",
            beamformer.streams()
        )));
    }
    let slot = beamformer.slot;
    let a = beamformer.matrix();
    let mut y = CMatrix::zeros(m, rows);
    for (s, ch) in sketches.iter().zip(channels) {
        if s.entries.shape() != (rows, m) {
            return Err(FlycomError::DimensionMismatch(
                "sketches differ in shape".into(),
            ));
        }
        if s.slot != slot {
            return Err(FlycomError::InvalidArgument(format!(
                "sketch from slot {} sent in slot {slot}",
                s.slot
            )));
        }
        let b = zf_beamformer(&a, &ch.h)?;
        let transmitted = b * s.entries.transpose().map(|v| Complex64::new(v, 0.0));
        y += (&a * &ch.h) * transmitted;
    }
    add_receiver_noise(&mut y, &a, sigma2, noise_seed, slot);
    Ok(ReceivedSymbol {
        slot,
        y_real: y.transpose().map(|z| z.re),
        eta_used: beamformer.eta,
        selected: true,
    })
}

/// Slot with ideal channel inversion and a fixed receiver: `Re{(Σ S + A Z)^T}`.
pub fn pinned_round(
    aggregate: &DMatrix<f64>,
    beamformer: &ReceiveBeamformer,
    sigma2: f64,
    noise_seed: u64,
) -> Result<ReceivedSymbol> {
    if aggregate.ncols() != beamformer.streams() {
        return Err(FlycomError::DimensionMismatch(format!(
            "aggregate width {} differs from beamformer dimension {}",
            aggregate.ncols(),
            beamformer.streams()
        )));
    }
    let a = beamformer.matrix();
    let mut y = aggregate.transpose().map(|v| Complex64::new(v, 0.0));
    add_receiver_noise(&mut y, &a, sigma2, noise_seed, beamformer.slot);
    Ok(ReceivedSymbol {
        slot: beamformer.slot,
        y_real: y.transpose().map(|z| z.re),
        eta_used: beamformer.eta,
        selected: true,
    })
}

/// Channels, beamformer and power audit of one coherence block.
#[derive(Debug, Clone)]
pub struct SlotLink {
    pub channels: Vec<ChannelRealization>,
    pub beamformer: ReceiveBeamformer,
    pub audit: PowerAudit,
    /// Number of device channels redrawn because ZF was ill-conditioned.
    pub resampled: usize,
}

const MAX_RESAMPLE_ROUNDS: usize = 32;

/// Draw the block's channels, design the receive beamformer and denoising
/// factor, and redraw any device whose effective channel cannot be inverted.
#[allow(clippy::too_many_arguments)]
pub fn establish_link(
    seed: u64,
    slot: u64,
    devices: usize,
    model: &FadingModel,
    m: usize,
    local_traces: &[f64],
    power: f64,
    symbol_len: usize,
) -> Result<SlotLink> {
    let mut attempts = vec![0u64; devices];
    let mut channels = (0..devices)
        .map(|k| draw_channel(seed, slot, k as u64, 0, model))
        .collect::<Result<Vec<_>>>()?;
    let mut resampled = 0;
    for _ in 0..MAX_RESAMPLE_ROUNDS {
        let u_a = receive_unitary(&channels, m)?;
        let mut bad = Vec::new();
        for (k, ch) in channels.iter().enumerate() {
            if hermitian_condition(&effective_gram(&u_a, &ch.h)?)? > MAX_CONDITION {
                bad.push(k);
            }
        }
        if bad.is_empty() {
            let eta = denoising_factor(&u_a, &channels, local_traces, power, symbol_len)?;
            let beamformer = ReceiveBeamformer {
                slot,
                eta,
                unitary: u_a,
            };
            let audit = power_audit(&beamformer, &channels, local_traces, power, symbol_len)?;
            return Ok(SlotLink {
                channels,
                beamformer,
                audit,
                resampled,
            });
        }
        for k in bad {
            attempts[k] += 1;
            resampled += 1;
            channels[k] = draw_channel(seed, slot, k as u64, attempts[k], model)?;
        }
    }
    Err(FlycomError::IllConditioned(f64::INFINITY))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::to_complex;
    use crate::sketch::{gen_drm, local_sketch, stacked_drm};
    use crate::tensor::{partition_columns, synth_unfolding};

    fn default_channels(slot: u64, k: usize) -> Vec<ChannelRealization> {
        let model = FadingModel::default();
        (0..k)
            .map(|d| sample_channel(17, slot, d as u64, &model).unwrap())
            .collect()
    }

    fn cmax(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn channel_is_deterministic() {
        let model = FadingModel::default();
        let a = sample_channel(1, 2, 3, &model).unwrap();
        assert_eq!(a, sample_channel(1, 2, 3, &model).unwrap());
        assert_ne!(a, sample_channel(1, 2, 4, &model).unwrap());
        assert_eq!(a.h.shape(), (16, 4));
    }

    #[test]
    fn shadowing_and_gain_means() {
        let model = FadingModel::default();
        let n = 100_000;
        let mut beta_sum = 0.0;
        let mut gain_sum = 0.0;
        for i in 0..n {
            let ch = sample_channel(5, i, 0, &model).unwrap();
            beta_sum += ch.shadow_beta;
            gain_sum += ch.h[(0, 0)].norm_sqr();
        }
        let mean = 1.2 * 0.83;
        let se = (1.2 * 0.83 * 0.83 / n as f64).sqrt();
        assert!((beta_sum / n as f64 - mean).abs() < 3.0 * se);
        // E|H_ij|^2 = E[beta]; Var(beta |h|^2) = E[beta^2] E|h|^4 - E[beta]^2
        let e_beta2 = 1.2 * 0.83 * 0.83 + mean * mean;
        let se_gain = ((2.0 * e_beta2 - mean * mean) / n as f64).sqrt();
        assert!((gain_sum / n as f64 - mean).abs() < 3.0 * se_gain);
    }

    #[test]
    fn invalid_antenna_counts() {
        let model = FadingModel {
            rx_antennas: 2,
            tx_antennas: 4,
            ..FadingModel::default()
        };
        assert!(sample_channel(0, 0, 0, &model).is_err());
    }

    #[test]
    fn single_device_full_rank_spans_channel() {
        let ch = default_channels(1, 1);
        let u_a = receive_unitary(&ch, 4).unwrap();
        let proj_a = u_a.adjoint() * &u_a;
        // projector onto the column space of H
        let h = &ch[0].h;
        let gram_inv = (h.adjoint() * h).try_inverse().unwrap();
        let proj_h = h * gram_inv * h.adjoint();
        assert!(cmax(&(proj_a - proj_h)) < 1e-8);
    }

    #[test]
    fn single_stream_lies_in_channel_space() {
        let ch = default_channels(2, 1);
        let u_a = receive_unitary(&ch, 1).unwrap();
        let h = &ch[0].h;
        // full-eig oracle: the weighted projector has a 4-fold top eigenvalue,
        // so any unit vector of col(H) is a valid answer
        let (vals, vecs) = herm_eigen_desc(&(h * h.adjoint())).unwrap();
        let lambda_h = vals[3];
        let top = vecs.columns(0, 4).into_owned();
        let weighted = &top * top.adjoint() * Complex64::new(lambda_h, 0.0);
        let u = u_a.adjoint();
        let rayleigh = (u.adjoint() * &weighted * &u)[(0, 0)].re;
        assert!((rayleigh - lambda_h).abs() < 1e-8 * lambda_h);
        assert!(((u.adjoint() * &u)[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_array_shapes() {
        let ch = default_channels(3, 20);
        let u_a = receive_unitary(&ch, 2).unwrap();
        assert_eq!(u_a.shape(), (2, 16));
        let gram = &u_a * u_a.adjoint();
        assert!(cmax(&(gram - CMatrix::identity(2, 2))) < 1e-10);
        assert!(receive_unitary(&ch, 5).is_err());
    }

    fn identity_channel(n_r: usize, n_t: usize) -> ChannelRealization {
        let h = CMatrix::from_fn(n_r, n_t, |i, j| {
            Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)
        });
        ChannelRealization {
            slot: 0,
            device: 0,
            h,
            shadow_beta: 1.0,
        }
    }

    #[test]
    fn identity_effective_channel_gives_eta_m() {
        let ch = vec![identity_channel(16, 4)];
        let u_a = ReceiveBeamformer::pinned(0, 16, 2, 1.0).unitary;
        let eta = denoising_factor(&u_a, &ch, &[100.0 * 0.5], 0.5, 100).unwrap();
        assert!((eta - 2.0).abs() < 1e-12);
    }

    #[test]
    fn doubling_power_halves_eta() {
        let ch = default_channels(4, 20);
        let u_a = receive_unitary(&ch, 2).unwrap();
        let traces: Vec<f64> = (0..20).map(|k| 0.5 + k as f64 * 0.01).collect();
        let e1 = denoising_factor(&u_a, &ch, &traces, 1.0, 100).unwrap();
        let e2 = denoising_factor(&u_a, &ch, &traces, 2.0, 100).unwrap();
        assert!((e1 - 2.0 * e2).abs() < 1e-12 * e1);
    }

    #[test]
    fn power_audit_tight_at_weakest_device() {
        let ch = default_channels(5, 20);
        let u_a = receive_unitary(&ch, 2).unwrap();
        let traces: Vec<f64> = (0..20).map(|k| 0.3 + 0.05 * k as f64).collect();
        let eta = denoising_factor(&u_a, &ch, &traces, 1.0, 100).unwrap();
        let bf = ReceiveBeamformer {
            slot: 5,
            eta,
            unitary: u_a,
        };
        // direct evaluation of the expected transmit power
        let a = bf.matrix();
        let mut worst = 0.0_f64;
        for (c, t) in ch.iter().zip(&traces) {
            let ah = &a * &c.h;
            let inv = (&ah * ah.adjoint()).try_inverse().unwrap();
            let p = inv.trace().re * t;
            assert!(p <= 100.0 * (1.0 + 1e-8));
            worst = worst.max(p);
        }
        assert!((worst - 100.0).abs() < 1e-8 * 100.0);
        let audit = power_audit(&bf, &ch, &traces, 1.0, 100).unwrap();
        assert!(audit.equality_gap() < 1e-8);
        assert!(audit.ratios.iter().all(|&r| r <= 1.0 + 1e-8));
    }

    #[test]
    fn zf_on_padded_identity() {
        let a = ReceiveBeamformer::pinned(0, 16, 2, 1.0).unitary;
        let h = identity_channel(16, 4).h;
        let b = zf_beamformer(&a, &h).unwrap();
        let expected = CMatrix::from_fn(4, 2, |i, j| {
            Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)
        });
        assert!(cmax(&(b - expected)) < 1e-14);
    }

    #[test]
    fn zf_inverts_random_channels() {
        for m in [2usize, 4] {
            let ch = default_channels(6, 20);
            let u_a = receive_unitary(&ch, m).unwrap();
            let a = ReceiveBeamformer {
                slot: 6,
                eta: 0.7,
                unitary: u_a,
            }
            .matrix();
            for c in &ch {
                let b = zf_beamformer(&a, &c.h).unwrap();
                assert_eq!(b.shape(), (4, m));
                let resid = &a * &c.h * b - CMatrix::identity(m, m);
                assert!(resid.norm() <= 1e-8);
            }
        }
    }

    #[test]
    fn zf_rejects_singular_effective_channel() {
        let a = ReceiveBeamformer::pinned(0, 16, 2, 1.0).unitary;
        // channel orthogonal to the beamformer rows
        let h = CMatrix::from_fn(16, 4, |i, j| {
            Complex64::new(if i == j + 4 { 1.0 } else { 0.0 }, 0.0)
        });
        assert!(matches!(
            zf_beamformer(&a, &h),
            Err(FlycomError::IllConditioned(_))
        ));
    }

    #[test]
    fn noiseless_round_is_global_sketch() {
        let (x, _) = synth_unfolding(40, 200, 4, 2.0, 8).unwrap();
        let part = partition_columns(&x, 20, 8).unwrap();
        let traces = part.local_traces();
        let model = FadingModel::default();
        let link = establish_link(8, 1, 20, &model, 2, &traces, 1.0, 40).unwrap();
        let sketches: Vec<_> = part
            .locals
            .iter()
            .enumerate()
            .map(|(k, xk)| {
                local_sketch(xk, &gen_drm(8, 1, k as u64, xk.ncols(), 2).unwrap()).unwrap()
            })
            .collect();
        let sym = aircomp_round(&sketches, &link.channels, &link.beamformer, 0.0, 8).unwrap();
        let f = stacked_drm(8, 1, &part.column_counts(), 2).unwrap();
        let expected = part.concatenated() * f;
        assert!((sym.y_real - expected).amax() < 1e-10);
    }

    #[test]
    fn noise_only_covariance_matches_closed_form() {
        // X = 0: E[Ỹ Ỹ^T] = ½ σ² Tr(A A^H) I, sample covariance over 10^4 draws
        let rows = 10;
        let sigma2 = 0.1; // 10 dB with unit power
        let ch = default_channels(7, 5);
        let u_a = receive_unitary(&ch, 2).unwrap();
        let bf = ReceiveBeamformer {
            slot: 7,
            eta: 0.8,
            unitary: u_a,
        };
        let zero: Vec<LocalSketch> = (0..5)
            .map(|k| LocalSketch {
                slot: 7,
                device: k,
                entries: DMatrix::zeros(rows, 2),
            })
            .collect();
        let draws = 10_000u64;
        let mut acc = DMatrix::<f64>::zeros(rows, rows);
        for seed in 0..draws {
            let sym = aircomp_round(&zero, &ch, &bf, sigma2, seed).unwrap();
            acc += &sym.y_real * sym.y_real.transpose();
        }
        acc /= draws as f64;
        let expected = DMatrix::<f64>::identity(rows, rows) * (0.5 * sigma2 * bf.gram_trace());
        let rel = (acc - &expected).norm() / expected.norm();
        assert!(rel < 0.1, "relative error {rel}");
    }

    #[test]
    fn pinned_beamformer_gram() {
        let sigma: f64 = 0.1_f64.sqrt();
        let bf = ReceiveBeamformer::pinned(3, 16, 2, 1.0 / (10.0 * sigma));
        let a = bf.matrix();
        let gram = &a * a.adjoint();
        let target = to_complex(&(DMatrix::<f64>::identity(2, 2) / (10.0 * sigma)));
        assert!(cmax(&(gram - target)) < 1e-12);
        assert!((bf.gram_trace() - 2.0 / (10.0 * sigma)).abs() < 1e-12);
    }

    #[test]
    fn link_audit_holds_for_many_slots() {
        let model = FadingModel::default();
        let traces = vec![0.6; 20];
        for slot in 0..50 {
            let link = establish_link(3, slot, 20, &model, 2, &traces, 1.0, 100).unwrap();
            assert!(link.audit.max_ratio() <= 1.0 + 1e-8);
            assert!(link.audit.equality_gap() < 1e-8);
        }
    }
}
