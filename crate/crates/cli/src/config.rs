//! Optional TOML configuration file. Every field mirrors a command-line flag;
//! flags win, then the file, then the built-in defaults.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

use pushqa::bench::DatasetConfig;
use pushqa::learner::TrainConfig;
use pushqa::DEFAULT_MAX_STEPS;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub demo: DemoSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub n_series: Option<usize>,
    pub questions_per_type: Option<usize>,
    /// Train/eval/test fractions; must sum to 1.
    pub split: Option<(f64, f64, f64)>,
    pub easy_fraction: Option<f64>,
    pub master_seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoSection {
    pub max_steps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub hidden: Option<usize>,
    pub lr: Option<f64>,
    pub momentum: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    /// Side length of the encoder's downsampled visual grid.
    pub grid: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub max_steps: Option<usize>,
}

impl FileConfig {
    /// Load a config file, or the empty config when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }
}

/// Resolve a dataset configuration from defaults, file, and flags.
pub fn dataset_config(
    file: &DatasetSection,
    n_series: Option<usize>,
    questions_per_type: Option<usize>,
    split: Option<(f64, f64, f64)>,
    easy_fraction: Option<f64>,
    master_seed: Option<u64>,
) -> DatasetConfig {
    let d = DatasetConfig::default();
    DatasetConfig {
        n_series: n_series.or(file.n_series).unwrap_or(d.n_series),
        questions_per_type: questions_per_type
            .or(file.questions_per_type)
            .unwrap_or(d.questions_per_type),
        split: split.or(file.split).unwrap_or(d.split),
        easy_fraction: easy_fraction.or(file.easy_fraction).unwrap_or(d.easy_fraction),
        master_seed: master_seed.or(file.master_seed).unwrap_or(d.master_seed),
    }
}

/// Resolve training hyperparameters the same way.
pub fn train_config(
    file: &TrainSection,
    hidden: Option<usize>,
    lr: Option<f64>,
    momentum: Option<f64>,
    epochs: Option<usize>,
    seed: Option<u64>,
) -> TrainConfig {
    let d = TrainConfig::default();
    TrainConfig {
        hidden: hidden.or(file.hidden).unwrap_or(d.hidden),
        lr: lr.or(file.lr).unwrap_or(d.lr),
        momentum: momentum.or(file.momentum).unwrap_or(d.momentum),
        epochs: epochs.or(file.epochs).unwrap_or(d.epochs),
        seed: seed.or(file.seed).unwrap_or(d.seed),
    }
}

/// Resolve a push budget from flag, file section, and the global default.
pub fn max_steps(flag: Option<usize>, file: Option<usize>) -> usize {
    flag.or(file).unwrap_or(DEFAULT_MAX_STEPS)
}

/// Parse "a,b,c" into split fractions.
pub fn parse_fractions(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated fractions, got {s:?}"));
    }
    let mut v = [0.0f64; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|e| format!("bad fraction {part:?}: {e}"))?;
    }
    Ok((v[0], v[1], v[2]))
}
