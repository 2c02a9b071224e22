//! Experiment configuration: defaults, `key = value` files and overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homeo::HolderEnvelope;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(format!("expected csv or json, got '{s}'")),
        }
    }
}

/// Effective settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub depth: u32,
    pub samples: usize,
    /// Thread count. It never changes a result, so it is left out of emitted metadata.
    #[serde(skip_serializing, default = "one")]
    pub workers: usize,
    pub points_per_oscillation: u32,
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub output_dir: Option<PathBuf>,
    /// `None` lets each subcommand use its natural format.
    pub format: Option<OutputFormat>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let holder = HolderEnvelope::default();
        Self {
            seed: 1,
            depth: 16,
            samples: 10_000,
            workers: 1,
            points_per_oscillation: 16,
            k1: holder.k1,
            k2: holder.k2,
            c: holder.c,
            output_dir: None,
            format: None,
        }
    }
}

fn one() -> usize {
    1
}

/// Partial configuration; `None` leaves the lower layer in place.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigPatch {
    pub seed: Option<u64>,
    pub depth: Option<u32>,
    pub samples: Option<usize>,
    pub workers: Option<usize>,
    pub points_per_oscillation: Option<u32>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub c: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

/// Keys accepted in configuration files.
pub const CONFIG_KEYS: [&str; 10] = [
    "seed",
    "depth",
    "samples",
    "workers",
    "points_per_oscillation",
    "K1",
    "K2",
    "C",
    "output_dir",
    "format",
];

fn parse_value<T: FromStr>(key: &str, value: &str, errors: &mut Vec<String>) -> Option<T> {
    match value.parse::<T>() {
        Ok(v) => Some(v),
        Err(_) => {
            errors.push(format!("{key}: cannot parse '{value}'"));
            None
        }
    }
}

impl ConfigPatch {
    /// Parses `key = value` lines; blank lines and `#` comments are ignored.
    /// Every bad line is reported, not just the first.
    pub fn parse(text: &str) -> Result<Self> {
        let mut patch = ConfigPatch::default();
        let mut errors = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {}: expected 'key = value', got '{line}'", lineno + 1));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            let e = &mut errors;
            match key {
                "seed" => patch.seed = parse_value(key, value, e),
                "depth" => patch.depth = parse_value(key, value, e),
                "samples" => patch.samples = parse_value(key, value, e),
                "workers" => patch.workers = parse_value(key, value, e),
                "points_per_oscillation" => patch.points_per_oscillation = parse_value(key, value, e),
                "K1" | "k1" => patch.k1 = parse_value(key, value, e),
                "K2" | "k2" => patch.k2 = parse_value(key, value, e),
                "C" | "c" => patch.c = parse_value(key, value, e),
                "output_dir" => patch.output_dir = Some(PathBuf::from(value)),
                "format" => patch.format = parse_value(key, value, e),
                _ => errors.push(format!("unknown key '{key}'")),
            }
        }
        if errors.is_empty() {
            Ok(patch)
        } else {
            Err(Error::Config(errors.join("; ")))
        }
    }

    pub fn apply(&self, base: &mut ExperimentConfig) {
        macro_rules! take {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f.clone() {
                    base.$f = v;
                }
            )*};
        }
        take!(seed, depth, samples, workers, points_per_oscillation, k1, k2, c);
        if self.output_dir.is_some() {
            base.output_dir = self.output_dir.clone();
        }
        if self.format.is_some() {
            base.format = self.format;
        }
    }
}

impl ExperimentConfig {
    /// Lists every violated invariant.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.depth < 1 || self.depth > crate::homeo::MAX_DEPTH {
            errors.push(format!(
                "depth: must be in 1..={}, got {}",
                crate::homeo::MAX_DEPTH,
                self.depth
            ));
        }
        if self.samples < 1 {
            errors.push("samples: must be at least 1".to_string());
        }
        if self.workers < 1 {
            errors.push("workers: must be at least 1".to_string());
        }
        if self.points_per_oscillation < 8 {
            errors.push(format!(
                "points_per_oscillation: must be at least 8, got {}",
                self.points_per_oscillation
            ));
        }
        if !(self.k1 > 1.0) {
            errors.push(format!("K1: must exceed 1, got {}", self.k1));
        }
        if !(self.k2 > 0.0 && self.k2 < 1.0) {
            errors.push(format!("K2: must lie in (0, 1), got {}", self.k2));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            errors.push(format!("C: must be positive, got {}", self.c));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors.join("; ")))
        }
    }

    pub fn holder(&self) -> HolderEnvelope {
        HolderEnvelope {
            k1: self.k1,
            k2: self.k2,
            c: self.c,
        }
    }

    /// `(key, value)` pairs in file syntax, for output headers; `workers` is omitted.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut v = vec![
            ("seed".to_string(), self.seed.to_string()),
            ("depth".to_string(), self.depth.to_string()),
            ("samples".to_string(), self.samples.to_string()),
            (
                "points_per_oscillation".to_string(),
                self.points_per_oscillation.to_string(),
            ),
            ("K1".to_string(), self.k1.to_string()),
            ("K2".to_string(), self.k2.to_string()),
            ("C".to_string(), self.c.to_string()),
        ];
        if let Some(dir) = &self.output_dir {
            v.push(("output_dir".to_string(), dir.display().to_string()));
        }
        if let Some(f) = self.format {
            v.push(("format".to_string(), f.to_string()));
        }
        v
    }
}

/// Defaults overlaid with the file at `path`, validated.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::default();
    ConfigPatch::parse(&text)?.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}
