use nalgebra::DMatrix;

use flycom::analysis::{dtd_error, error_decomposition};
use flycom::channel::{
    aircomp_round, establish_link, pinned_round, FadingModel, ReceiveBeamformer,
};
use flycom::config::{emit_config, parse_config, ExperimentConfig, Mode, NoiseSpec};
use flycom::detector::{
    accumulate, detect, right_covariance_d, whiten, NoiseGram, WhiteningContext,
};
use flycom::harness::{config_hash, run_experiment, write_outputs, CSV_HEADER};
use flycom::linalg::{gaussian_matrix, orthonormal_columns, projector_distance};
use flycom::rng::{derive_seed, substream, Stream};
use flycom::sketch::{gen_drm, local_sketch};
use flycom::tensor::{
    partition_columns, principal_eigenspace, refold, synth_unfolding, unfold, DenseTensor,
};

/// Rank-`r` mode-0 unfolding of a 10×12×15 tensor, returned as the tensor.
fn low_rank_tensor(r: usize, seed: u64) -> (DenseTensor, DMatrix<f64>) {
    let dims = [10, 12, 15];
    let mut rng = substream(seed, Stream::Data, 7, 0);
    let u = orthonormal_columns(gaussian_matrix(&mut rng, dims[0], r));
    let w = gaussian_matrix(&mut rng, r, dims[1] * dims[2]);
    let tensor = refold(&(&u * w), &dims, 0).unwrap();
    (tensor, u)
}

#[test]
fn noiseless_fading_stream_recovers_exact_low_rank_span() {
    let r = 3;
    let (tensor, truth) = low_rank_tensor(r, 3);
    let x = unfold(&tensor, 0).unwrap();
    let part = partition_columns(&x, 6, 3).unwrap();
    let traces = part.local_traces();
    let model = FadingModel::default();
    let m = 2;
    let mut ctx = WhiteningContext::new(0.0, x.norm_squared(), x.nrows(), m).unwrap();
    let mut symbols = Vec::new();
    for slot in 1..=2u64 {
        let sketches: Vec<_> = part
            .locals
            .iter()
            .enumerate()
            .map(|(k, xk)| {
                local_sketch(xk, &gen_drm(3, slot, k as u64, xk.ncols(), m).unwrap()).unwrap()
            })
            .collect();
        let link = establish_link(3, slot, 6, &model, m, &traces, 1.0, x.nrows()).unwrap();
        symbols.push(aircomp_round(&sketches, &link.channels, &link.beamformer, 0.0, 3).unwrap());
        ctx.push(NoiseGram::from_beamformer(&link.beamformer))
            .unwrap();
    }
    // tM = 4 ≥ r: the sketch spans the column space exactly
    let est = detect(&symbols, &ctx, r).unwrap();
    assert!(projector_distance(&est.basis, &truth) < 1e-8);
    assert!(dtd_error(&est.basis, &x).unwrap() < 1e-10 * x.norm_squared());
}

#[test]
fn unfolding_then_eigenspace_matches_planted_basis() {
    let (tensor, truth) = low_rank_tensor(2, 11);
    let x = unfold(&tensor, 0).unwrap();
    let u = principal_eigenspace(&(&x * x.transpose()), 2).unwrap();
    assert!(projector_distance(&u, &truth) < 1e-10);
}

#[test]
fn whitening_equalizes_heterogeneous_noise() {
    // Slots with very different receiver gains: after whitening the right
    // covariance of Φ is Tr(C) times the identity.
    let (rows, cols, m) = (20, 200, 2);
    let sigma2 = 0.5;
    let (x, _) = synth_unfolding(rows, cols, 3, 1.0, 8).unwrap();
    let grams = [0.05, 0.4, 2.5];
    let bfs: Vec<_> = grams
        .iter()
        .enumerate()
        .map(|(l, &g)| ReceiveBeamformer::pinned(l as u64 + 1, 4, m, g))
        .collect();
    let mut ctx = WhiteningContext::new(sigma2, x.norm_squared(), rows, m).unwrap();
    for bf in &bfs {
        ctx.push(NoiseGram::from_beamformer(bf)).unwrap();
    }
    let all = [0, 1, 2];
    let d = right_covariance_d(&ctx, &all).unwrap();
    let dense = d.to_dense();
    assert!(
        (dense[(0, 0)] - dense[(4, 4)]).abs() > 0.1,
        "D should be far from identity here"
    );

    let n = 6000u64;
    let tm = grams.len() * m;
    let mut acc = DMatrix::<f64>::zeros(tm, tm);
    for draw in 0..n {
        let seed = derive_seed(8, Stream::Trial, draw, 0);
        let symbols: Vec<_> = bfs
            .iter()
            .map(|bf| {
                let f = gen_drm(seed, bf.slot, 0, cols, m).unwrap();
                pinned_round(&(&x * &f.entries), bf, sigma2, seed).unwrap()
            })
            .collect();
        let phi = whiten(&accumulate(&symbols).unwrap(), &d).unwrap();
        acc += phi.transpose() * phi;
    }
    acc /= n as f64;
    let mean_g: f64 = grams.iter().sum::<f64>() / grams.len() as f64;
    let trace_c = x.norm_squared() + 0.5 * sigma2 * mean_g * rows as f64;
    let target = DMatrix::<f64>::identity(tm, tm) * trace_c;
    assert!((&acc - &target).norm() / target.norm() < 0.05);
}

fn small(mode: Mode) -> ExperimentConfig {
    ExperimentConfig {
        rows: 20,
        cols: 300,
        r: 3,
        devices: 5,
        t_max: 24,
        trials: 12,
        schedule: Some(vec![2, 4, 8, 16, 24]),
        mode,
        ..ExperimentConfig::reference_defaults()
    }
}

#[test]
fn noiseless_mean_error_falls_with_slots() {
    let cfg = ExperimentConfig {
        noise: NoiseSpec::Sigma2(0.0),
        ..small(Mode::Flycom)
    };
    let out = run_experiment(&cfg, None).unwrap();
    let means: Vec<f64> = out.summary.iter().map(|s| s.mean_error).collect();
    assert!(means.windows(2).all(|w| w[1] <= w[0] * 1.02), "{means:?}");
    let residual = out.summary[0].mean_residual;
    assert!(out.rows.iter().all(|r| r.error >= r.residual_term - 1e-8));
    assert!(means[means.len() - 1] < 1.5 * residual);
}

#[test]
fn every_mode_produces_consistent_rows() {
    for mode in [
        Mode::Flycom,
        Mode::FlycomSelection,
        Mode::Centroid,
        Mode::Alignment,
        Mode::Fig3Validation,
    ] {
        let cfg = ExperimentConfig {
            trials: 3,
            ..small(mode)
        };
        let out = run_experiment(&cfg, Some(2)).unwrap();
        assert!(!out.rows.is_empty(), "{mode:?}");
        for row in &out.rows {
            assert_eq!(row.mode, mode);
            assert_eq!(row.communication_time, row.slot * cfg.rows);
            assert!((row.error - row.sketch_term - row.residual_term).abs() < 1e-10);
            assert!(row.error >= row.residual_term - 1e-8);
        }
        if mode == Mode::FlycomSelection {
            assert!(out
                .rows
                .iter()
                .all(|r| r.m_tilde.is_some() && r.eta_th.is_some()));
        }
    }
}

#[test]
fn outputs_carry_hash_and_reparse() {
    let cfg = small(Mode::Flycom);
    let text = emit_config(&cfg);
    assert_eq!(parse_config(&text).unwrap(), cfg);

    let out = run_experiment(
        &ExperimentConfig {
            trials: 2,
            ..cfg.clone()
        },
        None,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    write_outputs(&cfg, &out.rows, &out.summary, &path).unwrap();
    let rows = std::fs::read_to_string(&path).unwrap();
    assert_eq!(rows.lines().next(), Some(CSV_HEADER));
    let manifest: toml::Table = std::fs::read_to_string(dir.path().join("rows.manifest.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(
        manifest["config_sha256"].as_str(),
        Some(config_hash(&cfg).as_str())
    );
    assert_eq!(manifest["seed"].as_integer(), Some(cfg.seed as i64));
}

#[test]
fn error_metric_agrees_with_decomposition_on_planted_data() {
    let (x, truth) = synth_unfolding(30, 90, 4, 2.0, 21).unwrap();
    let mut rng = substream(21, Stream::Trial, 0, 0);
    for _ in 0..5 {
        let u = orthonormal_columns(gaussian_matrix(&mut rng, 30, 4));
        let (s, res) = error_decomposition(&u, &truth).unwrap();
        assert!((dtd_error(&u, &x).unwrap() - s - res).abs() < 1e-10);
    }
}
