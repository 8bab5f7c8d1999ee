//! `key = value` run configuration shared by every subcommand.
//!
//! Blank lines and lines starting with `#` are ignored. Values given on the
//! command line with `--set key=value` are applied after the file.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use cccf::data::InputFormat;
use cccf::eval::DEFAULT_CUTOFFS;
use cccf::{Gain, MfConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// One grid point of an experiment: `GxR`, optionally `:unit` for all-ones
/// weights and `:alpha=V` to set both code couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub g: usize,
    pub r: usize,
    pub unit: bool,
    pub alpha: Option<f64>,
}

impl FromStr for GridPoint {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let bad = || ConfigError(format!("bad grid point `{s}` (expected GxR[:unit][:alpha=V])"));
        let mut parts = s.trim().split(':');
        let shape = parts.next().ok_or_else(bad)?;
        let (g, r) = shape.split_once('x').ok_or_else(bad)?;
        let mut point = GridPoint {
            g: g.parse().map_err(|_| bad())?,
            r: r.parse().map_err(|_| bad())?,
            unit: false,
            alpha: None,
        };
        for opt in parts {
            match opt.split_once('=') {
                None if opt == "unit" => point.unit = true,
                Some(("alpha", v)) => point.alpha = Some(v.parse().map_err(|_| bad())?),
                _ => return Err(bad()),
            }
        }
        Ok(point)
    }
}

/// Every tunable of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub format: InputFormat,
    pub min_count: usize,
    pub train_frac: f64,
    pub split_seed: u64,
    pub mf: MfConfig,
    /// MF seed; defaults to the training seed.
    pub mf_seed: Option<u64>,
    pub train: TrainConfig,
    pub ks: Vec<usize>,
    pub gain: Gain,
    pub fast: bool,
    pub dataset: String,
    pub grid: Vec<GridPoint>,
    pub split_seeds: Vec<u64>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            format: InputFormat::Csv,
            min_count: 1,
            train_frac: 0.7,
            split_seed: 0,
            mf: MfConfig::default(),
            mf_seed: None,
            train: TrainConfig::default(),
            ks: DEFAULT_CUTOFFS.to_vec(),
            gain: Gain::Linear,
            fast: true,
            dataset: "dataset".into(),
            grid: vec![
                GridPoint {
                    g: 8,
                    r: 8,
                    unit: false,
                    alpha: None,
                },
                GridPoint {
                    g: 1,
                    r: 64,
                    unit: true,
                    alpha: Some(10.0),
                },
            ],
            split_seeds: vec![0, 1, 2, 3, 4],
            threads: None,
        }
    }
}

/// Accepted keys, in documentation order.
pub const KEYS: &[&str] = &[
    "format",
    "min_count",
    "train_frac",
    "split_seed",
    "mf_rank",
    "mf_lambda",
    "mf_learning_rate",
    "mf_epochs",
    "mf_seed",
    "g",
    "r",
    "alpha1",
    "alpha2",
    "alpha3",
    "alpha4",
    "h",
    "max_outer",
    "max_dcd_sweeps",
    "tol",
    "seed",
    "weight_mode",
    "distance_scale",
    "linear_term",
    "init_rounds",
    "init_gd_steps",
    "e",
    "ks",
    "gain",
    "fast",
    "dataset",
    "grid",
    "split_seeds",
    "threads",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError(format!("invalid value `{value}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s.trim()))
        .collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        let t = &mut self.train;
        match key.trim() {
            "format" => self.format = parse(key, v)?,
            "min_count" => self.min_count = parse(key, v)?,
            "train_frac" => self.train_frac = parse(key, v)?,
            "split_seed" => self.split_seed = parse(key, v)?,
            "mf_rank" => self.mf.rank = parse(key, v)?,
            "mf_lambda" => self.mf.lambda = parse(key, v)?,
            "mf_learning_rate" => self.mf.learning_rate = parse(key, v)?,
            "mf_epochs" => self.mf.epochs = parse(key, v)?,
            "mf_seed" => self.mf_seed = Some(parse(key, v)?),
            "g" => t.g = parse(key, v)?,
            "r" => t.r = parse(key, v)?,
            "alpha1" => t.alpha1 = parse(key, v)?,
            "alpha2" => t.alpha2 = parse(key, v)?,
            "alpha3" => t.alpha3 = parse(key, v)?,
            "alpha4" => t.alpha4 = parse(key, v)?,
            "h" => t.h = parse(key, v)?,
            "max_outer" => t.max_outer = parse(key, v)?,
            "max_dcd_sweeps" => t.max_dcd_sweeps = parse(key, v)?,
            "tol" => t.tol = parse(key, v)?,
            "seed" => t.seed = parse(key, v)?,
            "weight_mode" => t.weight_mode = parse(key, v)?,
            "distance_scale" => t.distance_scale = parse(key, v)?,
            "linear_term" => t.linear_term = parse(key, v)?,
            "init_rounds" => t.init_rounds = parse(key, v)?,
            "init_gd_steps" => t.init_gd_steps = parse(key, v)?,
            "e" => t.int_scale = parse(key, v)?,
            "ks" => self.ks = parse_list(key, v)?,
            "gain" => self.gain = parse(key, v)?,
            "fast" => self.fast = parse(key, v)?,
            "dataset" => self.dataset = v.to_string(),
            "grid" => self.grid = parse_list(key, v)?,
            "split_seeds" => self.split_seeds = parse_list(key, v)?,
            "threads" => self.threads = Some(parse(key, v)?),
            other => return Err(ConfigError(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` assignments in order.
    pub fn apply<'a>(&mut self, pairs: impl IntoIterator<Item = &'a str>) -> Result<(), ConfigError> {
        for pair in pairs {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("expected key=value, got `{pair}`")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", n + 1)))?;
            cfg.set(k, v)
                .map_err(|e| ConfigError(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    /// File values (if any) overridden by `overrides`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError(format!("{}: {e}", p.display())))?;
                RunConfig::parse_text(&text)?
            }
            None => RunConfig::default(),
        };
        cfg.apply(overrides.iter().map(String::as_str))?;
        Ok(cfg)
    }

    pub fn mf_config(&self) -> MfConfig {
        MfConfig {
            seed: self.mf_seed.unwrap_or(self.train.seed),
            ..self.mf.clone()
        }
    }

    /// Training configurations of the experiment grid.
    pub fn grid_configs(&self) -> Vec<TrainConfig> {
        self.grid
            .iter()
            .map(|p| {
                let mut c = TrainConfig {
                    g: p.g,
                    r: p.r,
                    ..self.train.clone()
                };
                if p.unit {
                    c.weight_mode = cccf::WeightMode::Unit;
                }
                if let Some(a) = p.alpha {
                    c.alpha1 = a;
                    c.alpha2 = a;
                }
                c
            })
            .collect()
    }

    /// `threads` key, else `CCCF_THREADS`, else rayon's default.
    pub fn thread_count(&self) -> Result<Option<usize>, ConfigError> {
        if self.threads.is_some() {
            return Ok(self.threads);
        }
        match std::env::var("CCCF_THREADS") {
            Ok(v) => parse("CCCF_THREADS", v.trim()).map(Some),
            Err(_) => Ok(None),
        }
    }
}
