//! Plain-text key-value experiment configuration.
//!
//! Format: one `key = value` pair per line; `#` starts a comment; blank
//! lines ignored. Every key has a fixed documented default (see
//! [`ExperimentConfig::default`]); unknown keys are errors. Seeds default to
//! fixed constants, never the wall clock, so an empty config is fully
//! reproducible.

use crate::error::{Error, Result};
use crate::optim::{Alpha, HyperParams, OptimizerKind};
use crate::Real;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Where training data comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DataSource {
    /// IDX files `train-images-idx3-ubyte` etc. under the given directory.
    Mnist { dir: PathBuf },
    /// Teacher-generated synthetic task.
    Synthetic {
        seed: u64,
        samples: usize,
        input_dim: usize,
        classes: usize,
    },
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub layer_sizes: Vec<usize>,
    pub optimizer: OptimizerKind,
    pub eta: Real,
    pub eta_decay: Real,
    pub alpha: Vec<Real>,
    pub temperature: Real,
    pub temperature_follows_eta: bool,
    pub theta_min: Real,
    pub batch: usize,
    pub epochs: usize,
    /// Global connectivity target; per-layer fraction is `p0 * multiplier`.
    pub p0: f64,
    pub multipliers: Vec<f64>,
    pub data: DataSource,
    /// Truncate train/test sets to this many samples (0 = all).
    pub train_limit: usize,
    pub test_limit: usize,
    pub seed_init: u64,
    pub seed_noise: u64,
    pub seed_rewire: u64,
    pub seed_data: u64,
    pub seed_label: u64,
    pub metrics_out: PathBuf,
    pub checkpoint_out: Option<PathBuf>,
    /// Metrics row every `cadence` iterations (epoch ends always recorded).
    pub cadence: usize,
    /// Wall-clock column breaks byte-determinism; off by default.
    pub record_wall_time: bool,
    pub transfer: bool,
    pub probe_samples: usize,
    pub correlations_out: PathBuf,
    pub sweep_p0: Vec<f64>,
    pub sweep_out: PathBuf,
    pub prune_quality: f64,
    pub prune_phase_epochs: Vec<usize>,
    pub weight_decay: Real,
    pub boxcar_width: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            layer_sizes: vec![784, 300, 100, 10],
            optimizer: OptimizerKind::DeepR,
            eta: 0.05,
            eta_decay: 1.0,
            alpha: vec![1e-4],
            // noise scale matched to the default learning rate
            temperature: 0.05 / 2.0 * 1e-12,
            temperature_follows_eta: false,
            theta_min: -0.15,
            batch: 10,
            epochs: 10,
            p0: 0.01,
            multipliers: vec![0.75, 2.3, 22.8],
            data: DataSource::Mnist {
                dir: PathBuf::from("data/mnist"),
            },
            train_limit: 0,
            test_limit: 0,
            seed_init: 1,
            seed_noise: 2,
            seed_rewire: 3,
            seed_data: 4,
            seed_label: 5,
            metrics_out: PathBuf::from("metrics.csv"),
            checkpoint_out: None,
            cadence: 100,
            record_wall_time: false,
            transfer: false,
            probe_samples: 1000,
            correlations_out: PathBuf::from("correlations.csv"),
            sweep_p0: vec![],
            sweep_out: PathBuf::from("sweep.csv"),
            prune_quality: 0.7,
            prune_phase_epochs: vec![],
            weight_decay: 0.0,
            boxcar_width: 100,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{v}'")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    if v.trim().is_empty() {
        return Ok(vec![]);
    }
    v.split(',')
        .map(|x| parse_num(key, x.trim()))
        .collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("key '{key}': expected bool, got '{v}'"))),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        // synthetic sub-keys buffered so `data` can arrive in any order
        let mut synth = (12345u64, 1000usize, 16usize, 2usize);
        let mut mnist_dir = PathBuf::from("data/mnist");
        let mut data_kind: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "layer_sizes" => cfg.layer_sizes = parse_list(key, value)?,
                "optimizer" => cfg.optimizer = value.parse()?,
                "eta" => cfg.eta = parse_num(key, value)?,
                "eta_decay" => cfg.eta_decay = parse_num(key, value)?,
                "alpha" => cfg.alpha = parse_list(key, value)?,
                "temperature" => cfg.temperature = parse_num(key, value)?,
                "temperature_follows_eta" => {
                    cfg.temperature_follows_eta = parse_bool(key, value)?
                }
                "theta_min" => cfg.theta_min = parse_num(key, value)?,
                "batch" => cfg.batch = parse_num(key, value)?,
                "epochs" => cfg.epochs = parse_num(key, value)?,
                "p0" => cfg.p0 = parse_num(key, value)?,
                "multipliers" => cfg.multipliers = parse_list(key, value)?,
                "data" => data_kind = Some(value.to_string()),
                "mnist_dir" => mnist_dir = PathBuf::from(value),
                "synthetic_seed" => synth.0 = parse_num(key, value)?,
                "synthetic_samples" => synth.1 = parse_num(key, value)?,
                "synthetic_input_dim" => synth.2 = parse_num(key, value)?,
                "synthetic_classes" => synth.3 = parse_num(key, value)?,
                "train_limit" => cfg.train_limit = parse_num(key, value)?,
                "test_limit" => cfg.test_limit = parse_num(key, value)?,
                "seed_init" => cfg.seed_init = parse_num(key, value)?,
                "seed_noise" => cfg.seed_noise = parse_num(key, value)?,
                "seed_rewire" => cfg.seed_rewire = parse_num(key, value)?,
                "seed_data" => cfg.seed_data = parse_num(key, value)?,
                "seed_label" => cfg.seed_label = parse_num(key, value)?,
                "metrics_out" => cfg.metrics_out = PathBuf::from(value),
                "checkpoint_out" => {
                    cfg.checkpoint_out = if value.is_empty() {
                        None
                    } else {
                        Some(PathBuf::from(value))
                    }
                }
                "cadence" => cfg.cadence = parse_num(key, value)?,
                "record_wall_time" => cfg.record_wall_time = parse_bool(key, value)?,
                "transfer" => cfg.transfer = parse_bool(key, value)?,
                "probe_samples" => cfg.probe_samples = parse_num(key, value)?,
                "correlations_out" => cfg.correlations_out = PathBuf::from(value),
                "sweep_p0" => cfg.sweep_p0 = parse_list(key, value)?,
                "sweep_out" => cfg.sweep_out = PathBuf::from(value),
                "prune_quality" => cfg.prune_quality = parse_num(key, value)?,
                "prune_phase_epochs" => cfg.prune_phase_epochs = parse_list(key, value)?,
                "weight_decay" => cfg.weight_decay = parse_num(key, value)?,
                "boxcar_width" => cfg.boxcar_width = parse_num(key, value)?,
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
        match data_kind.as_deref() {
            None | Some("mnist") => cfg.data = DataSource::Mnist { dir: mnist_dir },
            Some("synthetic") => {
                cfg.data = DataSource::Synthetic {
                    seed: synth.0,
                    samples: synth.1,
                    input_dim: synth.2,
                    classes: synth.3,
                }
            }
            Some(other) => {
                return Err(Error::Config(format!(
                    "key 'data': expected 'mnist' or 'synthetic', got '{other}'"
                )))
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 3 {
            return Err(Error::Config(
                "layer_sizes needs at least one hidden layer".into(),
            ));
        }
        if self.layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        let n_layers = self.layer_sizes.len() - 1;
        if self.multipliers.len() != n_layers {
            return Err(Error::Config(format!(
                "{} multipliers for {n_layers} weight layers",
                self.multipliers.len()
            )));
        }
        if self.alpha.len() != 1 && self.alpha.len() != n_layers {
            return Err(Error::Config(format!(
                "alpha must be scalar or one value per weight layer ({n_layers})"
            )));
        }
        if !(self.p0 > 0.0 && self.p0 <= 1.0) {
            return Err(Error::Config(format!("p0 must be in (0, 1], got {}", self.p0)));
        }
        if self.cadence == 0 {
            return Err(Error::Config("cadence must be >= 1".into()));
        }
        if self.boxcar_width == 0 {
            return Err(Error::Config("boxcar_width must be >= 1".into()));
        }
        if let DataSource::Mnist { dir } = &self.data {
            for f in ["train-images-idx3-ubyte", "train-labels-idx1-ubyte"] {
                if !dir.join(f).exists() {
                    return Err(Error::Config(format!(
                        "missing dataset file {}",
                        dir.join(f).display()
                    )));
                }
            }
        }
        if self.optimizer == OptimizerKind::Prune {
            if self.prune_phase_epochs.len() != 3 {
                return Err(Error::Config(
                    "prune_phase_epochs must list exactly 3 phases".into(),
                ));
            }
            if self.prune_phase_epochs.iter().sum::<usize>() != self.epochs {
                return Err(Error::Config(format!(
                    "prune_phase_epochs {:?} must sum to epochs = {}",
                    self.prune_phase_epochs, self.epochs
                )));
            }
        }
        self.hyper_params().validate()
    }

    pub fn hyper_params(&self) -> HyperParams<Real> {
        let alpha = if self.alpha.len() == 1 {
            Alpha::Scalar(self.alpha[0])
        } else {
            Alpha::PerLayer(self.alpha.clone())
        };
        HyperParams {
            eta: self.eta,
            eta_decay: self.eta_decay,
            alpha,
            temperature: self.temperature,
            temperature_follows_eta: self.temperature_follows_eta,
            theta_min: Some(self.theta_min),
            batch: self.batch,
            epochs: self.epochs,
            optimizer: self.optimizer,
        }
    }

    /// Per-layer connectivity fractions implied by `p0` and the multipliers.
    pub fn fractions(&self) -> Result<Vec<f64>> {
        crate::store::allocate_fractions(self.p0, &self.multipliers)
    }

    /// Serialize the fully resolved configuration (used as a sidecar next to
    /// the metrics file). Parsing the output reproduces the config.
    pub fn to_text(&self) -> String {
        let join = |xs: &[f64]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = String::new();
        let _ = writeln!(
            s,
            "layer_sizes = {}",
            self.layer_sizes
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        let _ = writeln!(s, "optimizer = {}", self.optimizer);
        let _ = writeln!(s, "eta = {}", self.eta);
        let _ = writeln!(s, "eta_decay = {}", self.eta_decay);
        let _ = writeln!(s, "alpha = {}", join(&self.alpha));
        let _ = writeln!(s, "temperature = {:e}", self.temperature);
        let _ = writeln!(s, "temperature_follows_eta = {}", self.temperature_follows_eta);
        let _ = writeln!(s, "theta_min = {}", self.theta_min);
        let _ = writeln!(s, "batch = {}", self.batch);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "p0 = {}", self.p0);
        let _ = writeln!(s, "multipliers = {}", join(&self.multipliers));
        match &self.data {
            DataSource::Mnist { dir } => {
                let _ = writeln!(s, "data = mnist");
                let _ = writeln!(s, "mnist_dir = {}", dir.display());
            }
            DataSource::Synthetic {
                seed,
                samples,
                input_dim,
                classes,
            } => {
                let _ = writeln!(s, "data = synthetic");
                let _ = writeln!(s, "synthetic_seed = {seed}");
                let _ = writeln!(s, "synthetic_samples = {samples}");
                let _ = writeln!(s, "synthetic_input_dim = {input_dim}");
                let _ = writeln!(s, "synthetic_classes = {classes}");
            }
        }
        let _ = writeln!(s, "train_limit = {}", self.train_limit);
        let _ = writeln!(s, "test_limit = {}", self.test_limit);
        let _ = writeln!(s, "seed_init = {}", self.seed_init);
        let _ = writeln!(s, "seed_noise = {}", self.seed_noise);
        let _ = writeln!(s, "seed_rewire = {}", self.seed_rewire);
        let _ = writeln!(s, "seed_data = {}", self.seed_data);
        let _ = writeln!(s, "seed_label = {}", self.seed_label);
        let _ = writeln!(s, "metrics_out = {}", self.metrics_out.display());
        if let Some(c) = &self.checkpoint_out {
            let _ = writeln!(s, "checkpoint_out = {}", c.display());
        }
        let _ = writeln!(s, "cadence = {}", self.cadence);
        let _ = writeln!(s, "record_wall_time = {}", self.record_wall_time);
        let _ = writeln!(s, "transfer = {}", self.transfer);
        let _ = writeln!(s, "probe_samples = {}", self.probe_samples);
        let _ = writeln!(s, "correlations_out = {}", self.correlations_out.display());
        if !self.sweep_p0.is_empty() {
            let _ = writeln!(s, "sweep_p0 = {}", join(&self.sweep_p0));
            let _ = writeln!(s, "sweep_out = {}", self.sweep_out.display());
        }
        let _ = writeln!(s, "prune_quality = {}", self.prune_quality);
        if !self.prune_phase_epochs.is_empty() {
            let _ = writeln!(
                s,
                "prune_phase_epochs = {}",
                self.prune_phase_epochs
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            );
        }
        let _ = writeln!(s, "weight_decay = {}", self.weight_decay);
        let _ = writeln!(s, "boxcar_width = {}", self.boxcar_width);
        s
    }
}
