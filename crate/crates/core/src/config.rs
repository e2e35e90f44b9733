//! Experiment configuration: a flat TOML table with a fixed key set.
//!
//! | key | type | required | meaning |
//! |-----|------|----------|---------|
//! | `i`, `j` | int | yes | unfolding is `I×J`, `I ≤ J` |
//! | `r` | int | yes | principal dimension, `1 ≤ r < I` |
//! | `xi` | float | yes | residual spectrum decay exponent |
//! | `k` | int | yes | number of devices |
//! | `m` | int | yes | sketch width (symbol columns), `M ≤ N_t` |
//! | `snr_db` or `sigma2` | float | exactly one | transmit SNR `P/σ²` in dB, or `σ²` directly |
//! | `t_max` | int | yes | slots per trial |
//! | `trials` | int | yes | Monte Carlo trials |
//! | `seed` | int | yes | root seed (nonnegative) |
//! | `mode` | string | yes | `flycom`, `flycom+selection`, `centroid`, `alignment`, `fig3-validation` |
//! | `n_t`, `n_r` | int | no (4, 16) | transmit / receive antennas |
//! | `power` | float | no (1.0) | per-symbol power budget `P` |
//! | `schedule` | int array | no | slots at which estimates are computed |
//! | `gamma_shape`, `gamma_scale` | float | no (1.2, 0.83) | shadowing law |
//! | `output` | string | no (`results.csv`) | CSV path |

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::error::{ConfigError, FlycomError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Flycom,
    FlycomSelection,
    Centroid,
    Alignment,
    Fig3Validation,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Flycom => "flycom",
            Mode::FlycomSelection => "flycom+selection",
            Mode::Centroid => "centroid",
            Mode::Alignment => "alignment",
            Mode::Fig3Validation => "fig3-validation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Mode::Flycom,
            Mode::FlycomSelection,
            Mode::Centroid,
            Mode::Alignment,
            Mode::Fig3Validation,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
    }
}

/// Noise level as configured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    SnrDb(f64),
    Sigma2(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub rows: usize,
    pub cols: usize,
    pub r: usize,
    pub xi: f64,
    pub devices: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub m: usize,
    pub noise: NoiseSpec,
    pub power: f64,
    pub t_max: usize,
    pub trials: usize,
    pub seed: u64,
    pub mode: Mode,
    pub schedule: Option<Vec<usize>>,
    pub gamma_shape: f64,
    pub gamma_scale: f64,
    pub output: PathBuf,
}

const KEYS: [&str; 19] = [
    "i",
    "j",
    "r",
    "xi",
    "k",
    "n_t",
    "n_r",
    "m",
    "snr_db",
    "sigma2",
    "power",
    "t_max",
    "trials",
    "seed",
    "mode",
    "schedule",
    "gamma_shape",
    "gamma_scale",
    "output",
];
const REQUIRED: [&str; 10] = [
    "i", "j", "r", "xi", "k", "m", "t_max", "trials", "seed", "mode",
];

impl ExperimentConfig {
    /// Reference settings: 100×1500 unfolding, r = 12, 20 devices, 4×16 antennas, M = 2, 10 dB.
    pub fn reference_defaults() -> Self {
        Self {
            rows: 100,
            cols: 1500,
            r: 12,
            xi: 2.0,
            devices: 20,
            tx_antennas: 4,
            rx_antennas: 16,
            m: 2,
            noise: NoiseSpec::SnrDb(10.0),
            power: 1.0,
            t_max: 200,
            trials: 100,
            seed: 1,
            mode: Mode::Flycom,
            schedule: None,
            gamma_shape: 1.2,
            gamma_scale: 0.83,
            output: PathBuf::from("results.csv"),
        }
    }

    /// `σ² = P / 10^{γ/10}` for an SNR entry.
    pub fn sigma2(&self) -> f64 {
        match self.noise {
            NoiseSpec::Sigma2(s) => s,
            NoiseSpec::SnrDb(db) => self.power / 10f64.powf(db / 10.0),
        }
    }

    /// Configured schedule, or `{s, 2s, 4s, …} ∪ {T}` with `s = ⌈r/M⌉`.
    pub fn estimate_schedule(&self) -> Vec<usize> {
        if let Some(s) = &self.schedule {
            return s.clone();
        }
        let start = self.r.div_ceil(self.m).max(1);
        let mut out = Vec::new();
        let mut t = start;
        while t <= self.t_max {
            out.push(t);
            t *= 2;
        }
        if out.last() != Some(&self.t_max) {
            out.push(self.t_max);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad =
            |key: &str, reason: String| Err(FlycomError::Config(ConfigError::invalid(key, reason)));
        if self.rows < 2 {
            return bad("i", format!("must be at least 2, got {}", self.rows));
        }
        if self.cols < self.rows {
            return bad(
                "j",
                format!("must be at least I = {}, got {}", self.rows, self.cols),
            );
        }
        if self.r == 0 || self.r >= self.rows {
            return bad(
                "r",
                format!("must satisfy 1 <= r < I = {}, got {}", self.rows, self.r),
            );
        }
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return bad("xi", format!("must be positive, got {}", self.xi));
        }
        if self.devices == 0 || self.devices > self.cols {
            return bad(
                "k",
                format!("must be in 1..={}, got {}", self.cols, self.devices),
            );
        }
        if self.tx_antennas == 0 || self.tx_antennas > self.rx_antennas {
            return bad(
                "n_t",
                format!(
                    "must satisfy 1 <= N_t <= N_r = {}, got {}",
                    self.rx_antennas, self.tx_antennas
                ),
            );
        }
        if self.m == 0 || self.m > self.tx_antennas {
            return bad(
                "m",
                format!(
                    "must satisfy 1 <= M <= N_t = {}, got {}",
                    self.tx_antennas, self.m
                ),
            );
        }
        match self.noise {
            NoiseSpec::Sigma2(s) if !(s >= 0.0 && s.is_finite()) => {
                return bad("sigma2", format!("must be finite and nonnegative, got {s}"));
            }
            NoiseSpec::SnrDb(db) if db.is_nan() || db == f64::NEG_INFINITY => {
                return bad("snr_db", format!("must be a number below +inf, got {db}"));
            }
            _ => {}
        }
        if !(self.power > 0.0 && self.power.is_finite()) {
            return bad("power", format!("must be positive, got {}", self.power));
        }
        if self.t_max == 0 {
            return bad("t_max", "must be at least 1".into());
        }
        if self.trials == 0 {
            return bad("trials", "must be at least 1".into());
        }
        if let Some(s) = &self.schedule {
            if s.is_empty()
                || s.windows(2).any(|w| w[0] >= w[1])
                || s[0] == 0
                || s[s.len() - 1] > self.t_max
            {
                return bad(
                    "schedule",
                    format!("must be strictly increasing slots in 1..={}", self.t_max),
                );
            }
        }
        if !(self.gamma_shape > 0.0 && self.gamma_scale > 0.0) {
            return bad(
                "gamma_shape",
                "shadowing parameters must be positive".into(),
            );
        }
        Ok(())
    }
}

fn get_int(table: &Table, key: &str) -> std::result::Result<Option<u64>, ConfigError> {
    match table.get(key) {
        None => Ok(None),
        Some(Value::Integer(v)) if *v >= 0 => Ok(Some(*v as u64)),
        Some(v) => Err(ConfigError::invalid(
            key,
            format!("expected a nonnegative integer, got {v}"),
        )),
    }
}

fn get_usize(table: &Table, key: &str) -> std::result::Result<Option<usize>, ConfigError> {
    get_int(table, key)?
        .map(|v| usize::try_from(v).map_err(|_| ConfigError::invalid(key, "value too large")))
        .transpose()
}

fn get_float(table: &Table, key: &str) -> std::result::Result<Option<f64>, ConfigError> {
    match table.get(key) {
        None => Ok(None),
        Some(Value::Float(v)) => Ok(Some(*v)),
        Some(Value::Integer(v)) => Ok(Some(*v as f64)),
        Some(v) => Err(ConfigError::invalid(
            key,
            format!("expected a number, got {v}"),
        )),
    }
}

fn get_str<'a>(table: &'a Table, key: &str) -> std::result::Result<Option<&'a str>, ConfigError> {
    match table.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(v) => Err(ConfigError::invalid(
            key,
            format!("expected a string, got {v}"),
        )),
    }
}

/// Parse and validate a config from TOML text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    if let Some(unknown) = table.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(ConfigError::UnknownKey(unknown.clone()).into());
    }
    let mut missing: Vec<String> = REQUIRED
        .iter()
        .filter(|k| !table.contains_key(**k))
        .map(|k| k.to_string())
        .collect();
    let has_snr = table.contains_key("snr_db");
    let has_sigma = table.contains_key("sigma2");
    if !has_snr && !has_sigma {
        missing.push("snr_db|sigma2".into());
    }
    if !missing.is_empty() {
        return Err(ConfigError::MissingKeys(missing).into());
    }
    if has_snr && has_sigma {
        return Err(
            ConfigError::invalid("sigma2", "give either snr_db or sigma2, not both").into(),
        );
    }
    let d = ExperimentConfig::reference_defaults();
    let need_usize = |k: &str| get_usize(&table, k).map(|v| v.expect("required key checked"));
    let need_float = |k: &str| get_float(&table, k).map(|v| v.expect("required key checked"));
    let noise = if has_snr {
        NoiseSpec::SnrDb(need_float("snr_db")?)
    } else {
        NoiseSpec::Sigma2(need_float("sigma2")?)
    };
    let mode_str = get_str(&table, "mode")?.expect("required key checked");
    let mode = Mode::parse(mode_str)
        .ok_or_else(|| ConfigError::invalid("mode", format!("unknown mode '{mode_str}'")))?;
    let schedule = match table.get("schedule") {
        None => None,
        Some(Value::Array(items)) => Some(
            items
                .iter()
                .map(|v| match v {
                    Value::Integer(n) if *n > 0 => Ok(*n as usize),
                    other => Err(ConfigError::invalid(
                        "schedule",
                        format!("expected positive integers, got {other}"),
                    )),
                })
                .collect::<std::result::Result<Vec<_>, _>>()?,
        ),
        Some(v) => {
            return Err(
                ConfigError::invalid("schedule", format!("expected an array, got {v}")).into(),
            )
        }
    };
    let cfg = ExperimentConfig {
        rows: need_usize("i")?,
        cols: need_usize("j")?,
        r: need_usize("r")?,
        xi: need_float("xi")?,
        devices: need_usize("k")?,
        tx_antennas: get_usize(&table, "n_t")?.unwrap_or(d.tx_antennas),
        rx_antennas: get_usize(&table, "n_r")?.unwrap_or(d.rx_antennas),
        m: need_usize("m")?,
        noise,
        power: get_float(&table, "power")?.unwrap_or(d.power),
        t_max: need_usize("t_max")?,
        trials: need_usize("trials")?,
        seed: get_int(&table, "seed")?.expect("required key checked"),
        mode,
        schedule,
        gamma_shape: get_float(&table, "gamma_shape")?.unwrap_or(d.gamma_shape),
        gamma_scale: get_float(&table, "gamma_scale")?.unwrap_or(d.gamma_scale),
        output: get_str(&table, "output")?.map_or(d.output, PathBuf::from),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}

fn toml_string(s: &str) -> String {
    Value::String(s.to_owned()).to_string()
}

/// Canonical TOML text for a config; keys in a fixed order, floats in
/// shortest round-trip form.
pub fn emit_config(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    line("i", cfg.rows.to_string());
    line("j", cfg.cols.to_string());
    line("r", cfg.r.to_string());
    line("xi", format!("{:?}", cfg.xi));
    line("k", cfg.devices.to_string());
    line("n_t", cfg.tx_antennas.to_string());
    line("n_r", cfg.rx_antennas.to_string());
    line("m", cfg.m.to_string());
    match cfg.noise {
        NoiseSpec::SnrDb(db) => line("snr_db", format!("{db:?}")),
        NoiseSpec::Sigma2(s) => line("sigma2", format!("{s:?}")),
    }
    line("power", format!("{:?}", cfg.power));
    line("t_max", cfg.t_max.to_string());
    line("trials", cfg.trials.to_string());
    line("seed", cfg.seed.to_string());
    line("mode", toml_string(cfg.mode.as_str()));
    if let Some(s) = &cfg.schedule {
        let items: Vec<String> = s.iter().map(usize::to_string).collect();
        line("schedule", format!("[{}]", items.join(", ")));
    }
    line("gamma_shape", format!("{:?}", cfg.gamma_shape));
    line("gamma_scale", format!("{:?}", cfg.gamma_scale));
    line("output", toml_string(&cfg.output.to_string_lossy()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL: &str = r#"
i = 100
j = 1500
r = 12
xi = 2.0
k = 20
m = 2
snr_db = 10
t_max = 200
trials = 100
seed = 7
mode = "flycom"
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.tx_antennas, 4);
        assert_eq!(cfg.rx_antennas, 16);
        assert!((cfg.sigma2() - 0.1).abs() < 1e-15);
        assert_eq!(cfg.estimate_schedule(), vec![6, 12, 24, 48, 96, 192, 200]);
    }

    #[test]
    fn round_trip() {
        let mut cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&emit_config(&cfg)).unwrap(), cfg);
        cfg.schedule = Some(vec![3, 9, 27]);
        cfg.noise = NoiseSpec::Sigma2(0.123456789);
        cfg.mode = Mode::FlycomSelection;
        cfg.output = PathBuf::from("out dir/\"quoted\".csv");
        assert_eq!(parse_config(&emit_config(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_named() {
        let text = format!("{MINIMAL}\nbogus = 1\n");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(
            err,
            FlycomError::Config(ConfigError::UnknownKey("bogus".into()))
        );
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn all_missing_keys_listed() {
        let text = "i = 100\nj = 1500\nmode = \"flycom\"\n";
        match parse_config(text).unwrap_err() {
            FlycomError::Config(ConfigError::MissingKeys(keys)) => {
                assert_eq!(
                    keys,
                    vec![
                        "r",
                        "xi",
                        "k",
                        "m",
                        "t_max",
                        "trials",
                        "seed",
                        "snr_db|sigma2"
                    ]
                );
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn field_specific_validation() {
        let cases = [
            ("r = 12", "r = 100", "r"),
            ("m = 2", "m = 5", "m"),
            ("mode = \"flycom\"", "mode = \"other\"", "mode"),
            ("trials = 100", "trials = 0", "trials"),
            ("xi = 2.0", "xi = \"two\"", "xi"),
        ];
        for (from, to, key) in cases {
            let err = parse_config(&MINIMAL.replace(from, to)).unwrap_err();
            match err {
                FlycomError::Config(ConfigError::InvalidValue { key: k, .. }) => assert_eq!(k, key),
                e => panic!("{to}: unexpected {e:?}"),
            }
        }
        assert!(parse_config(&format!("{MINIMAL}sigma2 = 0.1\n")).is_err());
        assert!(matches!(
            parse_config("i = "),
            Err(FlycomError::Config(ConfigError::Syntax(_)))
        ));
    }

    proptest! {
        #[test]
        fn emitted_configs_round_trip(
            xi in 0.01f64..10.0,
            sigma2 in 0.0f64..5.0,
            seed in 0u64..(i64::MAX as u64),
            trials in 1usize..1000,
            power in 0.01f64..100.0,
        ) {
            let cfg = ExperimentConfig {
                xi,
                noise: NoiseSpec::Sigma2(sigma2),
                seed,
                trials,
                power,
                ..ExperimentConfig::reference_defaults()
            };
            prop_assert_eq!(parse_config(&emit_config(&cfg)).unwrap(), cfg);
        }
    }
}
