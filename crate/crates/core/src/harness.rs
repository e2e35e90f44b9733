//! Monte Carlo orchestration: streaming FlyCom² trials, one-shot
//! baselines, the fixed-receiver validation run, CSV/manifest output and
//! summary statistics.
//!
//! Every random draw of trial `n` derives from
//! `derive_seed(root_seed, Trial, n, 0)`, so results do not depend on the
//! number of worker threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::analysis::{BoundInputs, ErrorReport};
use crate::baseline::{
    alignment_svd_dtd, centroid_svd_dtd, local_eigenspaces, ChannelContext, LinkParams,
};
use crate::channel::{
    aircomp_round, establish_link, pinned_round, FadingModel, ReceiveBeamformer, ReceivedSymbol,
};
use crate::config::{emit_config, ExperimentConfig, Mode};
use crate::detector::{effective_observation, ml_subspace, NoiseGram, WhiteningContext};
use crate::error::{FlycomError, Result};
use crate::rng::{derive_seed, Stream};
use crate::selection::optimize_threshold;
use crate::sketch::{gen_drm, local_sketch};
use crate::stats::{mean, mean_ci95, paired_t_test, spearman, PairedTest, Spearman};
use crate::tensor::{partition_columns, synth_unfolding, GroundTruth};

/// One estimate of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub trial: usize,
    pub slot: usize,
    /// Symbol slots used so far, `t I`.
    pub communication_time: usize,
    pub mode: Mode,
    pub error: f64,
    pub sketch_term: f64,
    pub residual_term: f64,
    pub theorem1_bound: Option<f64>,
    /// Fraction of `δ_ij ≤ 2`.
    pub delta_ok: Option<f64>,
    pub delta_mean: Option<f64>,
    pub m_tilde: Option<usize>,
    pub eta_th: Option<f64>,
    pub fallback: Option<bool>,
    /// Largest transmit energy over budget across all slots so far.
    pub power_ratio_max: Option<f64>,
    /// Largest `|ratio − 1|` at the weakest device across all slots so far.
    pub power_gap_max: Option<f64>,
}

pub const CSV_HEADER: &str = "trial,slot,communication_time,mode,error,sketch_term,residual_term,theorem1_bound,delta_ok,delta_mean,m_tilde,eta_th,fallback,power_ratio_max,power_gap_max";

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt_f(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

/// CSV text: fixed column order, 17 significant digits, LF line endings.
pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 + rows.len() * 256);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.trial,
            r.slot,
            r.communication_time,
            r.mode.as_str(),
            fmt_f(r.error),
            fmt_f(r.sketch_term),
            fmt_f(r.residual_term),
            fmt_opt_f(r.theorem1_bound),
            fmt_opt_f(r.delta_ok),
            fmt_opt_f(r.delta_mean),
            r.m_tilde.map(|m| m.to_string()).unwrap_or_default(),
            fmt_opt_f(r.eta_th),
            r.fallback
                .map(|f| u8::from(f).to_string())
                .unwrap_or_default(),
            fmt_opt_f(r.power_ratio_max),
            fmt_opt_f(r.power_gap_max),
        );
    }
    out
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_file(path, &rows_to_csv(rows))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Per-(mode, slot) aggregate over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub mode: Mode,
    pub slot: usize,
    pub communication_time: usize,
    pub trials: usize,
    pub mean_error: f64,
    /// Half-width of the 95% interval of the mean error.
    pub ci95: f64,
    pub mean_residual: f64,
    pub mean_bound: Option<f64>,
    pub mean_delta: Option<f64>,
    /// Fraction of trials with every `δ_ij ≤ 2`.
    pub delta_compliance: Option<f64>,
}

fn mode_rank(m: Mode) -> u8 {
    match m {
        Mode::Flycom => 0,
        Mode::FlycomSelection => 1,
        Mode::Centroid => 2,
        Mode::Alignment => 3,
        Mode::Fig3Validation => 4,
    }
}

fn opt_mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty()).map(|v| mean(&v))
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(u8, usize), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((mode_rank(r.mode), r.slot))
            .or_default()
            .push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let errors: Vec<f64> = g.iter().map(|r| r.error).collect();
            let (mean_error, ci95) = mean_ci95(&errors).expect("groups are nonempty");
            SummaryRow {
                mode: g[0].mode,
                slot: g[0].slot,
                communication_time: g[0].communication_time,
                trials: g.len(),
                mean_error,
                ci95,
                mean_residual: mean(&g.iter().map(|r| r.residual_term).collect::<Vec<_>>()),
                mean_bound: opt_mean(g.iter().map(|r| r.theorem1_bound)),
                mean_delta: opt_mean(g.iter().map(|r| r.delta_mean)),
                delta_compliance: opt_mean(
                    g.iter()
                        .map(|r| r.delta_ok.map(|d| f64::from(u8::from(d == 1.0)))),
                ),
            }
        })
        .collect()
}

pub const SUMMARY_HEADER: &str = "mode,slot,communication_time,trials,mean_error,ci95,mean_residual,mean_bound,mean_delta,delta_compliance";

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for s in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.mode.as_str(),
            s.slot,
            s.communication_time,
            s.trials,
            fmt_f(s.mean_error),
            if s.ci95.is_nan() {
                String::new()
            } else {
                fmt_f(s.ci95)
            },
            fmt_f(s.mean_residual),
            fmt_opt_f(s.mean_bound),
            fmt_opt_f(s.mean_delta),
            fmt_opt_f(s.delta_compliance),
        );
    }
    out
}

/// Seed of trial `n`.
pub fn trial_seed(root: u64, trial: usize) -> u64 {
    derive_seed(root, Stream::Trial, trial as u64, 0)
}

fn fading_model(cfg: &ExperimentConfig) -> FadingModel {
    FadingModel {
        rx_antennas: cfg.rx_antennas,
        tx_antennas: cfg.tx_antennas,
        gamma_shape: cfg.gamma_shape,
        gamma_scale: cfg.gamma_scale,
    }
}

struct Evaluation<'a> {
    x: &'a DMatrix<f64>,
    truth: &'a GroundTruth,
    sigma2: f64,
    r: usize,
    m: usize,
}

impl Evaluation<'_> {
    /// Detect from the `included` positions and evaluate every diagnostic.
    fn estimate(
        &self,
        symbols: &[ReceivedSymbol],
        ctx: &WhiteningContext,
        included: &[usize],
    ) -> Result<ErrorReport> {
        let obs = effective_observation(symbols, ctx, included)?;
        let est = ml_subspace(&obs, self.r)?;
        let cols = obs.phi.ncols() as f64;
        let sample: Vec<f64> = est.eigenvalues.iter().map(|g| g / cols).collect();
        let eta = ctx.eta_history();
        let eta_used: Vec<f64> = included.iter().map(|&i| eta[i]).collect();
        let inputs = BoundInputs::new(
            &self.truth.singular_values,
            self.r,
            self.m,
            self.sigma2,
            &eta_used,
        )?;
        ErrorReport::evaluate(&est.basis, self.x, self.truth, &sample, &inputs, None)
    }
}

fn report_row(trial: usize, slot: usize, rows: usize, mode: Mode, rep: &ErrorReport) -> ResultRow {
    ResultRow {
        trial,
        slot,
        communication_time: slot * rows,
        mode,
        error: rep.total_error,
        sketch_term: rep.sketch_term,
        residual_term: rep.residual_term,
        theorem1_bound: Some(rep.theorem1_bound),
        delta_ok: Some(rep.deltas.fraction_ok),
        delta_mean: Some(rep.deltas.mean),
        m_tilde: None,
        eta_th: None,
        fallback: None,
        power_ratio_max: None,
        power_gap_max: None,
    }
}

/// Stream `t_max` slots of FlyCom² and estimate at every scheduled slot,
/// once per requested variant (`false` = all sketches, `true` = selection).
fn flycom_trial(cfg: &ExperimentConfig, trial: usize, variants: &[bool]) -> Result<Vec<ResultRow>> {
    let seed = trial_seed(cfg.seed, trial);
    let (x, truth) = synth_unfolding(cfg.rows, cfg.cols, cfg.r, cfg.xi, seed)?;
    let part = partition_columns(&x, cfg.devices, seed)?;
    let traces = part.local_traces();
    let global_trace: f64 = traces.iter().sum();
    let sigma2 = cfg.sigma2();
    let model = fading_model(cfg);
    let schedule = cfg.estimate_schedule();
    let eval = Evaluation {
        x: &x,
        truth: &truth,
        sigma2,
        r: cfg.r,
        m: cfg.m,
    };
    let mut ctx = WhiteningContext::new(sigma2, global_trace, cfg.rows, cfg.m)?;
    let mut symbols = Vec::with_capacity(cfg.t_max);
    let mut power_max = 0.0_f64;
    let mut gap_max = 0.0_f64;
    let mut rows = Vec::new();
    for t in 1..=cfg.t_max {
        let slot = t as u64;
        let sketches = part
            .locals
            .iter()
            .enumerate()
            .map(|(k, xk)| local_sketch(xk, &gen_drm(seed, slot, k as u64, xk.ncols(), cfg.m)?))
            .collect::<Result<Vec<_>>>()?;
        let link = establish_link(
            seed,
            slot,
            cfg.devices,
            &model,
            cfg.m,
            &traces,
            cfg.power,
            cfg.rows,
        )?;
        power_max = power_max.max(link.audit.max_ratio());
        gap_max = gap_max.max(link.audit.equality_gap());
        symbols.push(aircomp_round(
            &sketches,
            &link.channels,
            &link.beamformer,
            sigma2,
            seed,
        )?);
        ctx.push(NoiseGram::from_beamformer(&link.beamformer))?;
        if schedule.binary_search(&t).is_err() {
            continue;
        }
        for &selection in variants {
            let (included, mode, choice) = if selection {
                let choice =
                    optimize_threshold(&ctx.eta_history(), cfg.r, cfg.m, sigma2, global_trace)?;
                (
                    choice.decision(&ctx.eta_history()).selected,
                    Mode::FlycomSelection,
                    Some(choice),
                )
            } else {
                ((0..t).collect(), Mode::Flycom, None)
            };
            let rep = eval.estimate(&symbols, &ctx, &included)?;
            let mut row = report_row(trial, t, cfg.rows, mode, &rep);
            if let Some(c) = choice {
                row.m_tilde = Some(c.m_tilde);
                row.eta_th = Some(c.threshold);
                row.fallback = Some(c.fallback);
            }
            row.power_ratio_max = Some(power_max);
            row.power_gap_max = Some(gap_max);
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Receiver Gram scale `A A^H = (1/(10σ)) I` of the validation run; unit
/// scale when noiseless.
pub fn fig3_gram_scale(sigma2: f64) -> f64 {
    if sigma2 > 0.0 {
        1.0 / (10.0 * sigma2.sqrt())
    } else {
        1.0
    }
}

/// Channel-free run with ideal aggregation and a fixed receiver.
fn fig3_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Vec<ResultRow>> {
    let seed = trial_seed(cfg.seed, trial);
    let (x, truth) = synth_unfolding(cfg.rows, cfg.cols, cfg.r, cfg.xi, seed)?;
    let sigma2 = cfg.sigma2();
    let gram = fig3_gram_scale(sigma2);
    let schedule = cfg.estimate_schedule();
    let eval = Evaluation {
        x: &x,
        truth: &truth,
        sigma2,
        r: cfg.r,
        m: cfg.m,
    };
    let mut ctx = WhiteningContext::new(sigma2, x.norm_squared(), cfg.rows, cfg.m)?;
    let mut symbols = Vec::with_capacity(cfg.t_max);
    let mut rows = Vec::new();
    for t in 1..=cfg.t_max {
        let slot = t as u64;
        let f = gen_drm(seed, slot, 0, cfg.cols, cfg.m)?;
        let bf = ReceiveBeamformer::pinned(slot, cfg.rx_antennas, cfg.m, gram);
        symbols.push(pinned_round(&(&x * &f.entries), &bf, sigma2, seed)?);
        ctx.push(NoiseGram::from_beamformer(&bf))?;
        if schedule.binary_search(&t).is_ok() {
            let included: Vec<usize> = (0..t).collect();
            let rep = eval.estimate(&symbols, &ctx, &included)?;
            rows.push(report_row(trial, t, cfg.rows, Mode::Fig3Validation, &rep));
        }
    }
    Ok(rows)
}

fn baseline_row(
    trial: usize,
    rows: usize,
    mode: Mode,
    error: f64,
    terms: (f64, f64),
    symbol_slots: usize,
    power: (f64, f64),
) -> ResultRow {
    ResultRow {
        trial,
        slot: symbol_slots / rows,
        communication_time: symbol_slots,
        mode,
        error,
        sketch_term: terms.0,
        residual_term: terms.1,
        theorem1_bound: None,
        delta_ok: None,
        delta_mean: None,
        m_tilde: None,
        eta_th: None,
        fallback: None,
        power_ratio_max: Some(power.0),
        power_gap_max: Some(power.1),
    }
}

/// One-shot baseline. The alignment scheme's reference is the centroid
/// estimate of a bootstrap upload.
fn baseline_trial(cfg: &ExperimentConfig, trial: usize, mode: Mode) -> Result<Vec<ResultRow>> {
    let seed = trial_seed(cfg.seed, trial);
    let (x, truth) = synth_unfolding(cfg.rows, cfg.cols, cfg.r, cfg.xi, seed)?;
    let part = partition_columns(&x, cfg.devices, seed)?;
    let locals = local_eigenspaces(&part.locals, cfg.r)?;
    let link = |s: u64| ChannelContext {
        link: Some(LinkParams {
            model: fading_model(cfg),
            sigma2: cfg.sigma2(),
            power: cfg.power,
            seed: s,
        }),
    };
    let centroid = centroid_svd_dtd(&locals, &link(seed), cfg.r, cfg.m)?;
    let outcome = match mode {
        Mode::Centroid => centroid,
        Mode::Alignment => alignment_svd_dtd(
            &locals,
            &link(derive_seed(seed, Stream::Trial, 1, 0)),
            cfg.r,
            cfg.m,
            &centroid.estimate.basis,
        )?,
        other => {
            return Err(FlycomError::InvalidArgument(format!(
                "{} is not a baseline mode",
                other.as_str()
            )));
        }
    };
    let basis = &outcome.estimate.basis;
    let error = crate::analysis::dtd_error(basis, &x)?;
    let terms = crate::analysis::error_decomposition(basis, &truth)?;
    Ok(vec![baseline_row(
        trial,
        cfg.rows,
        mode,
        error,
        terms,
        outcome.symbol_slots,
        (
            outcome.audit.max_power_ratio,
            outcome.audit.max_equality_gap,
        ),
    )])
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Vec<ResultRow>> {
    match cfg.mode {
        Mode::Flycom => flycom_trial(cfg, trial, &[false]),
        Mode::FlycomSelection => flycom_trial(cfg, trial, &[true]),
        Mode::Fig3Validation => fig3_trial(cfg, trial),
        Mode::Centroid | Mode::Alignment => baseline_trial(cfg, trial, cfg.mode),
    }
}

fn parallel_trials<F>(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
    f: F,
) -> Result<Vec<ResultRow>>
where
    F: Fn(usize) -> Result<Vec<ResultRow>> + Sync + Send,
{
    cfg.validate()?;
    let work = || -> Result<Vec<ResultRow>> {
        let per_trial: Vec<Vec<ResultRow>> = (0..cfg.trials)
            .into_par_iter()
            .map(&f)
            .collect::<Result<_>>()?;
        Ok(per_trial.into_iter().flatten().collect())
    };
    match threads {
        None => work(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| FlycomError::InvalidArgument(e.to_string()))?
            .install(work),
    }
}

/// Rows of every trial plus the per-slot summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

/// Run every trial of `cfg`. `threads = None` uses the global pool.
pub fn run_experiment(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<RunOutput> {
    let rows = parallel_trials(cfg, threads, |n| run_trial(cfg, n))?;
    Ok(RunOutput {
        summary: summarize(&rows),
        rows,
    })
}

/// Lowercase hex SHA-256 of the canonical config text.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(emit_config(cfg).as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Sibling path with `suffix` replacing the extension: `out.csv` → `out.<suffix>`.
pub fn sibling_path(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

/// Write `out` (rows), `out.summary.csv` and `out.manifest.toml`.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    rows: &[ResultRow],
    summary: &[SummaryRow],
    out: &Path,
) -> Result<()> {
    emit_csv(rows, out)?;
    let summary_path = sibling_path(out, "summary.csv");
    write_file(&summary_path, &summary_to_csv(summary))?;
    let manifest = format!(
        "output = {}\nsummary = {}\nconfig_sha256 = \"{}\"\nseed = {}\ntrials = {}\nmode = \"{}\"\nrows = {}\n",
        toml::Value::String(out.to_string_lossy().into_owned()),
        toml::Value::String(summary_path.to_string_lossy().into_owned()),
        config_hash(cfg),
        cfg.seed,
        cfg.trials,
        cfg.mode.as_str(),
        rows.len(),
    );
    write_file(&sibling_path(out, "manifest.toml"), &manifest)
}

/// Paired comparison at one scheduled slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSlot {
    pub slot: usize,
    pub communication_time: usize,
    pub mean_without: f64,
    pub mean_with: f64,
    /// `with − without`; `p_less` tests that selection lowers the error.
    pub test: PairedTest,
    pub fallback_trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionComparison {
    pub rows: Vec<ResultRow>,
    pub slots: Vec<PairedSlot>,
}

/// FlyCom² with and without selection on the same received sketches.
pub fn compare_selection(
    cfg: &ExperimentConfig,
    threads: Option<usize>,
) -> Result<SelectionComparison> {
    let rows = parallel_trials(cfg, threads, |n| flycom_trial(cfg, n, &[false, true]))?;
    let mut slots = Vec::new();
    for t in cfg.estimate_schedule() {
        let pick = |mode: Mode| -> Vec<&ResultRow> {
            rows.iter()
                .filter(|r| r.slot == t && r.mode == mode)
                .collect()
        };
        let without = pick(Mode::Flycom);
        let with = pick(Mode::FlycomSelection);
        let a: Vec<f64> = with.iter().map(|r| r.error).collect();
        let b: Vec<f64> = without.iter().map(|r| r.error).collect();
        let test = if a.len() >= 2 {
            paired_t_test(&a, &b)?
        } else {
            let d = a.first().zip(b.first()).map_or(0.0, |(x, y)| x - y);
            PairedTest {
                mean_diff: d,
                ci95: f64::NAN,
                t_stat: f64::NAN,
                p_less: f64::NAN,
                n: a.len(),
            }
        };
        slots.push(PairedSlot {
            slot: t,
            communication_time: t * cfg.rows,
            mean_without: mean(&b),
            mean_with: mean(&a),
            test,
            fallback_trials: with.iter().filter(|r| r.fallback == Some(true)).count(),
        });
    }
    Ok(SelectionComparison { rows, slots })
}

pub const PAIRED_HEADER: &str =
    "slot,communication_time,trials,mean_without,mean_with,mean_diff,ci95,p_less,fallback_trials";

pub fn paired_to_csv(slots: &[PairedSlot]) -> String {
    let mut out = String::from(PAIRED_HEADER);
    out.push('\n');
    for s in slots {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.slot,
            s.communication_time,
            s.test.n,
            fmt_f(s.mean_without),
            fmt_f(s.mean_with),
            fmt_f(s.test.mean_diff),
            fmt_f(s.test.ci95),
            fmt_f(s.test.p_less),
            s.fallback_trials
        );
    }
    out
}

/// Bound versus Monte Carlo mean at one slot of the validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceRow {
    pub slot: usize,
    pub mean_error: f64,
    pub mean_bound: f64,
    /// Every trial had all `δ_ij ≤ 2` at this slot.
    pub compliant: bool,
    pub dominated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig3Report {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    /// Pooled `(t, error)` rank correlation.
    pub error_trend: Spearman,
    /// Pooled `(t, mean δ)` rank correlation.
    pub delta_trend: Spearman,
    pub dominance: Vec<DominanceRow>,
}

/// Fixed-receiver validation of the expected-error bound and the `δ` trend.
pub fn validate_fig3(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Fig3Report> {
    let cfg = ExperimentConfig {
        mode: Mode::Fig3Validation,
        ..cfg.clone()
    };
    let out = run_experiment(&cfg, threads)?;
    let t: Vec<f64> = out.rows.iter().map(|r| r.slot as f64).collect();
    let err: Vec<f64> = out.rows.iter().map(|r| r.error).collect();
    let delta: Vec<f64> = out
        .rows
        .iter()
        .map(|r| r.delta_mean.unwrap_or(f64::NAN))
        .collect();
    let dominance = out
        .summary
        .iter()
        .map(|s| {
            let bound = s.mean_bound.unwrap_or(f64::NAN);
            DominanceRow {
                slot: s.slot,
                mean_error: s.mean_error,
                mean_bound: bound,
                compliant: s.delta_compliance == Some(1.0),
                dominated: bound >= s.mean_error,
            }
        })
        .collect();
    Ok(Fig3Report {
        error_trend: spearman(&t, &err)?,
        delta_trend: spearman(&t, &delta)?,
        rows: out.rows,
        summary: out.summary,
        dominance,
    })
}

/// Device-side cost of sketching versus a full decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRow {
    pub rows: usize,
    pub samples: usize,
    pub m: usize,
    /// `I J M` per sketch.
    pub sketch_flops: f64,
    /// `min{I,J}² max{I,J}`.
    pub svd_flops: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryRow {
    pub r: usize,
    pub sketch_passes: usize,
    pub svd_passes: usize,
    pub reduction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    pub complexity: Vec<ComplexityRow>,
    pub memory: Vec<MemoryRow>,
}

pub fn cost_table(rows: usize, m: usize, samples: &[usize], ranks: &[usize]) -> CostTable {
    let complexity = samples
        .iter()
        .map(|&j| {
            let sketch_flops = (rows * j * m) as f64;
            let (lo, hi) = (rows.min(j) as f64, rows.max(j) as f64);
            let svd_flops = lo * lo * hi;
            ComplexityRow {
                rows,
                samples: j,
                m,
                sketch_flops,
                svd_flops,
                ratio: svd_flops / sketch_flops,
            }
        })
        .collect();
    let memory = ranks
        .iter()
        .map(|&r| MemoryRow {
            r,
            sketch_passes: 1,
            svd_passes: r,
            reduction: r as f64,
        })
        .collect();
    CostTable { complexity, memory }
}

/// Single CSV with a `table` column: `complexity` rows are keyed by `J`,
/// `memory` rows by `r`.
pub fn cost_table_csv(table: &CostTable) -> String {
    let mut out = String::from("table,parameter,flycom,svd,ratio\n");
    for c in &table.complexity {
        let _ = writeln!(
            out,
            "complexity,{},{},{},{}",
            c.samples,
            fmt_f(c.sketch_flops),
            fmt_f(c.svd_flops),
            fmt_f(c.ratio)
        );
    }
    for m in &table.memory {
        let _ = writeln!(
            out,
            "memory,{},{},{},{}",
            m.r,
            m.sketch_passes,
            m.svd_passes,
            fmt_f(m.reduction)
        );
    }
    out
}
