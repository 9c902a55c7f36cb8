//! Experiment configuration with flat dotted keys (`noise.rho = 0.3`).
//!
//! Files are TOML; nested tables and dotted keys flatten to the same key
//! paths, and command-line overrides use the very same names. Every range
//! error names the offending key.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::data::{check_noise_ratio, NoiseKind};
use crate::ehn::easy_ratio;
use crate::error::{Error, Result};
use crate::nshe::discard_ratio;

/// Separation used by the standard synthetic dataset.
pub const DEFAULT_OVERLAP: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    Auto,
    Value(f64),
}

impl Setting {
    fn render(self) -> String {
        match self {
            Setting::Auto => "\"auto\"".into(),
            Setting::Value(v) => format!("{v:?}"),
        }
    }
}

/// Noise ratio handed to detection and correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoHat {
    /// The injected ratio for synthetic data, an estimate otherwise.
    Auto,
    Estimate,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub samples: usize,
    pub test_samples: usize,
    pub features: usize,
    pub classes: usize,
    pub overlap: f64,
    pub noise_kind: NoiseKind,
    pub noise_rho: f64,
    pub rho_hat: RhoHat,
    pub k: usize,
    pub tau_e: Setting,
    pub tau: Setting,
    pub rounds: usize,
    pub gamma: f64,
    pub m: f64,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub decay_start: usize,
    pub correction_epochs: usize,
    pub nshe_epochs: usize,
    pub hidden: Vec<usize>,
    pub mm_hidden: Vec<usize>,
    pub mm_epochs: usize,
    pub mm_lr: f64,
    pub mm_holdout: f64,
    pub estimator_epochs: usize,
    pub estimator_lr: f64,
    pub disable_nshe: bool,
    pub disable_ehn: bool,
    pub disable_correction: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            data_path: None,
            test_path: None,
            samples: 2000,
            test_samples: 1000,
            features: 20,
            classes: 2,
            overlap: DEFAULT_OVERLAP,
            noise_kind: NoiseKind::Symmetric,
            noise_rho: 0.3,
            rho_hat: RhoHat::Auto,
            k: 30,
            tau_e: Setting::Auto,
            tau: Setting::Auto,
            rounds: 1,
            gamma: 2.0,
            m: 0.99,
            batch_size: 64,
            lr: 0.01,
            momentum: 0.9,
            decay_start: 15,
            correction_epochs: 30,
            nshe_epochs: 40,
            hidden: vec![32, 16],
            mm_hidden: vec![64, 32],
            mm_epochs: 200,
            mm_lr: 0.01,
            mm_holdout: 0.2,
            estimator_epochs: 100,
            estimator_lr: 0.05,
            disable_nshe: false,
            disable_ehn: false,
            disable_correction: false,
        }
    }
}

/// Every accepted key, in `config.resolved` order.
pub const KEYS: &[&str] = &[
    "seed",
    "data.path",
    "data.test_path",
    "data.n",
    "data.test_n",
    "data.features",
    "data.classes",
    "data.overlap",
    "noise.kind",
    "noise.rho",
    "pipeline.rho_hat",
    "pipeline.k",
    "pipeline.tau_e",
    "pipeline.tau",
    "pipeline.rounds",
    "pipeline.gamma",
    "pipeline.m",
    "train.batch_size",
    "train.lr",
    "train.momentum",
    "train.decay_start",
    "train.correction_epochs",
    "train.nshe_epochs",
    "net.hidden",
    "mm.hidden",
    "mm.epochs",
    "mm.lr",
    "mm.holdout",
    "estimator.epochs",
    "estimator.lr",
    "ablation.disable_nshe",
    "ablation.disable_ehn",
    "ablation.disable_correction",
];

fn bad(key: &str, message: impl Into<String>) -> Error {
    Error::config_key(key, message)
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse()
        .map_err(|_| bad(key, format!("expected a non-negative integer, got `{v}`")))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| bad(key, format!("expected a number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(bad(key, "must be finite"));
    }
    Ok(x)
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(bad(key, format!("expected true or false, got `{other}`"))),
    }
}

fn parse_setting(key: &str, v: &str) -> Result<Setting> {
    if v.trim() == "auto" {
        Ok(Setting::Auto)
    } else {
        parse_f64(key, v).map(Setting::Value)
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    let v = v.trim().trim_start_matches('[').trim_end_matches(']');
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|p| parse_usize(key, p)).collect()
}

fn parse_path(v: &str) -> Option<PathBuf> {
    let v = v.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn quote(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// Flattens TOML tables into `(dotted key, scalar text)` pairs.
fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, String)>) -> Result<()> {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        let text = match v {
            toml::Value::Table(t) => {
                flatten(&key, t, out)?;
                continue;
            }
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => format!("{f:?}"),
            toml::Value::Boolean(b) => b.to_string(),
            toml::Value::Array(items) => items
                .iter()
                .map(|i| match i {
                    toml::Value::Integer(n) => Ok(n.to_string()),
                    _ => Err(bad(&key, "lists may only hold integers")),
                })
                .collect::<Result<Vec<_>>>()?
                .join(","),
            toml::Value::Datetime(_) => return Err(bad(&key, "dates are not accepted")),
        };
        out.push((key, text));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "seed" => self.seed = v.trim().parse().map_err(|_| bad(key, format!("expected an unsigned integer, got `{v}`")))?,
            "data.path" => self.data_path = parse_path(v),
            "data.test_path" => self.test_path = parse_path(v),
            "data.n" => self.samples = parse_usize(key, v)?,
            "data.test_n" => self.test_samples = parse_usize(key, v)?,
            "data.features" => self.features = parse_usize(key, v)?,
            "data.classes" => self.classes = parse_usize(key, v)?,
            "data.overlap" => self.overlap = parse_f64(key, v)?,
            "noise.kind" => {
                self.noise_kind = NoiseKind::parse(v.trim())
                    .ok_or_else(|| bad(key, format!("expected symmetric or asymmetric, got `{v}`")))?
            }
            "noise.rho" => self.noise_rho = parse_f64(key, v)?,
            "pipeline.rho_hat" => {
                self.rho_hat = match v.trim() {
                    "auto" => RhoHat::Auto,
                    "estimate" => RhoHat::Estimate,
                    other => RhoHat::Value(parse_f64(key, other)?),
                }
            }
            "pipeline.k" => self.k = parse_usize(key, v)?,
            "pipeline.tau_e" => self.tau_e = parse_setting(key, v)?,
            "pipeline.tau" => self.tau = parse_setting(key, v)?,
            "pipeline.rounds" => self.rounds = parse_usize(key, v)?,
            "pipeline.gamma" => self.gamma = parse_f64(key, v)?,
            "pipeline.m" => self.m = parse_f64(key, v)?,
            "train.batch_size" => self.batch_size = parse_usize(key, v)?,
            "train.lr" => self.lr = parse_f64(key, v)?,
            "train.momentum" => self.momentum = parse_f64(key, v)?,
            "train.decay_start" => self.decay_start = parse_usize(key, v)?,
            "train.correction_epochs" => self.correction_epochs = parse_usize(key, v)?,
            "train.nshe_epochs" => self.nshe_epochs = parse_usize(key, v)?,
            "net.hidden" => self.hidden = parse_list(key, v)?,
            "mm.hidden" => self.mm_hidden = parse_list(key, v)?,
            "mm.epochs" => self.mm_epochs = parse_usize(key, v)?,
            "mm.lr" => self.mm_lr = parse_f64(key, v)?,
            "mm.holdout" => self.mm_holdout = parse_f64(key, v)?,
            "estimator.epochs" => self.estimator_epochs = parse_usize(key, v)?,
            "estimator.lr" => self.estimator_lr = parse_f64(key, v)?,
            "ablation.disable_nshe" => self.disable_nshe = parse_bool(key, v)?,
            "ablation.disable_ehn" => self.disable_ehn = parse_bool(key, v)?,
            "ablation.disable_correction" => self.disable_correction = parse_bool(key, v)?,
            _ => return Err(bad(key, "unknown configuration key")),
        }
        Ok(())
    }

    /// Parses TOML text on top of the defaults and validates the result.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            Error::Config(format!("invalid config file: {}", e.message()))
        })?;
        let mut pairs = Vec::new();
        flatten("", &table, &mut pairs)?;
        let mut cfg = ExperimentConfig::default();
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Applies `key=value` style overrides, then re-validates.
    pub fn with_overrides<'a>(mut self, overrides: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        for (k, v) in overrides {
            self.set(k, v)?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: usize| if v == 0 { Err(bad(key, "must be at least 1")) } else { Ok(()) };
        let unit_open = |key: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(bad(key, format!("must lie in [0, 1), got {v}")))
            }
        };
        if self.classes < 2 {
            return Err(bad("data.classes", "need at least 2 classes"));
        }
        if self.samples < 2 * self.classes {
            return Err(bad("data.n", format!("need at least {} samples", 2 * self.classes)));
        }
        positive("data.test_n", self.test_samples)?;
        positive("data.features", self.features)?;
        if self.overlap < 0.0 {
            return Err(bad("data.overlap", "must be non-negative"));
        }
        if self.test_path.is_some() && self.data_path.is_none() {
            return Err(bad("data.test_path", "needs data.path"));
        }
        if self.data_path.is_some() && self.test_path.is_none() {
            return Err(bad("data.test_path", "required when data.path is set"));
        }
        check_noise_ratio(self.noise_rho, self.classes).map_err(|e| bad("noise.rho", e.to_string()))?;
        if let RhoHat::Value(r) = self.rho_hat {
            check_noise_ratio(r, self.classes).map_err(|e| bad("pipeline.rho_hat", e.to_string()))?;
        }
        positive("pipeline.k", self.k)?;
        if let Setting::Value(t) = self.tau_e {
            if !(t > 0.0 && t <= 1.0) {
                return Err(bad("pipeline.tau_e", format!("must lie in (0, 1], got {t}")));
            }
        }
        if let Setting::Value(t) = self.tau {
            unit_open("pipeline.tau", t)?;
        }
        positive("pipeline.rounds", self.rounds)?;
        if self.gamma < 0.0 {
            return Err(bad("pipeline.gamma", "must be non-negative"));
        }
        unit_open("pipeline.m", self.m)?;
        positive("train.batch_size", self.batch_size)?;
        if self.lr <= 0.0 {
            return Err(bad("train.lr", "must be positive"));
        }
        unit_open("train.momentum", self.momentum)?;
        positive("train.correction_epochs", self.correction_epochs)?;
        positive("train.nshe_epochs", self.nshe_epochs)?;
        positive("mm.epochs", self.mm_epochs)?;
        if self.mm_lr <= 0.0 {
            return Err(bad("mm.lr", "must be positive"));
        }
        if !(0.0..0.9).contains(&self.mm_holdout) {
            return Err(bad("mm.holdout", "must lie in [0, 0.9)"));
        }
        positive("estimator.epochs", self.estimator_epochs)?;
        if self.estimator_lr <= 0.0 {
            return Err(bad("estimator.lr", "must be positive"));
        }
        Ok(())
    }

    /// The noise ratio known before the run, if any.
    pub fn known_rho(&self) -> Option<f64> {
        match self.rho_hat {
            RhoHat::Value(r) => Some(r),
            RhoHat::Auto if self.data_path.is_none() => Some(self.noise_rho),
            _ => None,
        }
    }

    pub fn tau_e_for(&self, rho: f64) -> f64 {
        match self.tau_e {
            Setting::Value(t) => t,
            Setting::Auto => easy_ratio(rho),
        }
    }

    pub fn tau_for(&self, rho: f64) -> f64 {
        match self.tau {
            Setting::Value(t) => t,
            Setting::Auto => discard_ratio(rho),
        }
    }

    /// Copy with `tau_e` / `tau` filled in when the noise ratio is known up front.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        if let Some(rho) = self.known_rho() {
            out.tau_e = Setting::Value(self.tau_e_for(rho));
            out.tau = Setting::Value(self.tau_for(rho));
        }
        out
    }

    fn render(&self, key: &str) -> String {
        let path = |p: &Option<PathBuf>| quote(&p.as_ref().map_or(String::new(), |p| p.display().to_string()));
        let list = |l: &[usize]| format!("[{}]", l.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "));
        match key {
            "seed" => self.seed.to_string(),
            "data.path" => path(&self.data_path),
            "data.test_path" => path(&self.test_path),
            "data.n" => self.samples.to_string(),
            "data.test_n" => self.test_samples.to_string(),
            "data.features" => self.features.to_string(),
            "data.classes" => self.classes.to_string(),
            "data.overlap" => format!("{:?}", self.overlap),
            "noise.kind" => quote(self.noise_kind.as_str()),
            "noise.rho" => format!("{:?}", self.noise_rho),
            "pipeline.rho_hat" => match self.rho_hat {
                RhoHat::Auto => quote("auto"),
                RhoHat::Estimate => quote("estimate"),
                RhoHat::Value(v) => format!("{v:?}"),
            },
            "pipeline.k" => self.k.to_string(),
            "pipeline.tau_e" => self.tau_e.render(),
            "pipeline.tau" => self.tau.render(),
            "pipeline.rounds" => self.rounds.to_string(),
            "pipeline.gamma" => format!("{:?}", self.gamma),
            "pipeline.m" => format!("{:?}", self.m),
            "train.batch_size" => self.batch_size.to_string(),
            "train.lr" => format!("{:?}", self.lr),
            "train.momentum" => format!("{:?}", self.momentum),
            "train.decay_start" => self.decay_start.to_string(),
            "train.correction_epochs" => self.correction_epochs.to_string(),
            "train.nshe_epochs" => self.nshe_epochs.to_string(),
            "net.hidden" => list(&self.hidden),
            "mm.hidden" => list(&self.mm_hidden),
            "mm.epochs" => self.mm_epochs.to_string(),
            "mm.lr" => format!("{:?}", self.mm_lr),
            "mm.holdout" => format!("{:?}", self.mm_holdout),
            "estimator.epochs" => self.estimator_epochs.to_string(),
            "estimator.lr" => format!("{:?}", self.estimator_lr),
            "ablation.disable_nshe" => self.disable_nshe.to_string(),
            "ablation.disable_ehn" => self.disable_ehn.to_string(),
            "ablation.disable_correction" => self.disable_correction.to_string(),
            _ => unreachable!("render covers every key"),
        }
    }

    /// TOML text with every key, one `key = value` line each; parses back to `self`.
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.render(key));
        }
        out
    }
}
