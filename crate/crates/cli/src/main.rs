//! `flycom` batch driver. Every subcommand writes its CSV next to a
//! `.manifest.toml` carrying the config hash and root seed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use flycom::config::{load_config, ExperimentConfig};
use flycom::harness::{
    compare_selection, config_hash, cost_table, cost_table_csv, paired_to_csv, run_experiment,
    sibling_path, validate_fig3, write_outputs, DominanceRow,
};

#[derive(Parser)]
#[command(
    name = "flycom",
    version,
    about = "Monte Carlo runs of streaming sketch-based distributed Tucker decomposition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured mode and write per-trial rows plus a summary.
    Run(Common),
    /// Paired comparison of plain streaming against sketch selection.
    CompareSelection(Common),
    /// Fixed-receiver check of the expected-error bound and the delta trend.
    ValidateFig3(Common),
    /// Device-side complexity and memory-pass table.
    CostTable(Common),
}

#[derive(Args)]
struct Common {
    /// Config file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; the global pool when omitted.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn resolve(&self) -> flycom::Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => ExperimentConfig::reference_defaults(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        if let Some(out) = &self.out {
            cfg.output = out.clone();
        }
        cfg.validate()?;
        if self.threads == Some(0) {
            return Err(flycom::FlycomError::InvalidArgument(
                "--threads must be at least 1".into(),
            ));
        }
        let out = cfg.output.clone();
        Ok((cfg, out))
    }
}

fn write(path: &Path, text: &str) -> flycom::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).map_err(|e| flycom::FlycomError::Io(format!("{}: {e}", path.display())))
}

fn dominance_csv(rows: &[DominanceRow]) -> String {
    let mut out = String::from("slot,mean_error,mean_bound,compliant,dominated\n");
    for d in rows {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{},{}\n",
            d.slot, d.mean_error, d.mean_bound, d.compliant, d.dominated
        ));
    }
    out
}

fn run(cli: Cli) -> flycom::Result<()> {
    match cli.command {
        Command::Run(common) => {
            let (cfg, out) = common.resolve()?;
            let res = run_experiment(&cfg, common.threads)?;
            write_outputs(&cfg, &res.rows, &res.summary, &out)?;
            for s in &res.summary {
                println!(
                    "{} t={} error={:.6} ci95={:.6}",
                    s.mode.as_str(),
                    s.slot,
                    s.mean_error,
                    s.ci95
                );
            }
        }
        Command::CompareSelection(common) => {
            let (cfg, out) = common.resolve()?;
            let cmp = compare_selection(&cfg, common.threads)?;
            let summary = flycom::harness::summarize(&cmp.rows);
            write_outputs(&cfg, &cmp.rows, &summary, &out)?;
            write(
                &sibling_path(&out, "paired.csv"),
                &paired_to_csv(&cmp.slots),
            )?;
            for p in &cmp.slots {
                println!(
                    "t={} without={:.6} with={:.6} p_less={:.3e}",
                    p.slot, p.mean_without, p.mean_with, p.test.p_less
                );
            }
        }
        Command::ValidateFig3(common) => {
            let (cfg, out) = common.resolve()?;
            let rep = validate_fig3(&cfg, common.threads)?;
            write_outputs(&cfg, &rep.rows, &rep.summary, &out)?;
            write(
                &sibling_path(&out, "dominance.csv"),
                &dominance_csv(&rep.dominance),
            )?;
            println!(
                "error trend: rho={:.4} p={:.3e}",
                rep.error_trend.rho, rep.error_trend.p_value
            );
            println!(
                "delta trend: rho={:.4} p={:.3e}",
                rep.delta_trend.rho, rep.delta_trend.p_value
            );
        }
        Command::CostTable(common) => {
            let (cfg, out) = common.resolve()?;
            let samples: Vec<usize> = (1..=10).map(|k| k * 1000).collect();
            let ranks: Vec<usize> = (1..=30).collect();
            write(
                &out,
                &cost_table_csv(&cost_table(cfg.rows, cfg.m, &samples, &ranks)),
            )?;
            let manifest = format!(
                "output = {}\nconfig_sha256 = \"{}\"\nseed = {}\n",
                toml::Value::String(out.to_string_lossy().into_owned()),
                config_hash(&cfg),
                cfg.seed
            );
            write(&sibling_path(&out, "manifest.toml"), &manifest)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("flycom: {err}");
            ExitCode::FAILURE
        }
    }
}
