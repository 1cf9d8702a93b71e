use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::MetricKind;
use crate::embedding::ProviderSpec;
use crate::error::{Error, Result};
use crate::prompt::AblationMode;
use crate::tasks::Hops;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Every sample against all of the dataset's classes.
    #[default]
    Supervised,
    /// N-way K-shot episodes over the train part of the label split.
    Episodic,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Best validation epoch for a single dataset, final epoch for joint runs.
    #[default]
    Auto,
    BestVal,
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    /// Dataset directory, relative to the config file.
    pub path: PathBuf,
    #[serde(default)]
    pub task: TaskKind,
    #[serde(default = "one")]
    pub multiplier: f64,
    #[serde(default = "default_n")]
    pub n_way: (usize, usize),
    #[serde(default = "default_k")]
    pub k_shot: (usize, usize),
    /// Episodes per epoch before the multiplier (episodic tasks).
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    /// Validation metric; chosen from the task shape when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricKind>,
}

impl DatasetEntry {
    pub fn supervised(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            task: TaskKind::Supervised,
            multiplier: 1.0,
            n_way: default_n(),
            k_shot: default_k(),
            episodes: default_episodes(),
            metric: None,
        }
    }

    pub fn episodic(path: impl Into<PathBuf>, n_way: (usize, usize), k_shot: (usize, usize)) -> Self {
        Self {
            task: TaskKind::Episodic,
            n_way,
            k_shot,
            ..Self::supervised(path)
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_n() -> (usize, usize) {
    (3, 5)
}
fn default_k() -> (usize, usize) {
    (0, 5)
}
fn default_episodes() -> usize {
    100
}
fn default_batch() -> usize {
    128
}
fn default_dropout() -> f64 {
    0.15
}
fn default_workers() -> usize {
    1
}
fn default_clip() -> f64 {
    1.0
}
fn default_provider() -> ProviderSpec {
    ProviderSpec::hash(crate::embedding::DEFAULT_DIM, 0)
}

/// A training run, as read from its JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub datasets: Vec<DatasetEntry>,
    #[serde(default = "default_provider")]
    pub provider: ProviderSpec,
    /// Overrides `provider.dim` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Defaults: 5 when every task is episodic, else 6 for one dataset and
    /// 7 for joint training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    /// Defaults: 30 when every task is episodic, else 100.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ablation: AblationMode,
    #[serde(default)]
    pub hops: Hops,
    /// Validate every this many epochs; 0 turns validation off.
    #[serde(default = "one_usize")]
    pub eval_every: usize,
    #[serde(default = "default_episodes")]
    pub val_episodes: usize,
    #[serde(default)]
    pub selection: Selection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default = "default_clip")]
    pub clip_norm: f64,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn one_usize() -> usize {
    1
}

impl RunConfig {
    pub fn new(datasets: Vec<DatasetEntry>) -> Self {
        Self {
            datasets,
            provider: default_provider(),
            dim: None,
            layers: None,
            dropout: default_dropout(),
            lr: None,
            epochs: None,
            batch_size: default_batch(),
            seed: 0,
            ablation: AblationMode::Full,
            hops: Hops::default(),
            eval_every: 1,
            val_episodes: default_episodes(),
            selection: Selection::Auto,
            max_steps: None,
            clip_norm: default_clip(),
            workers: 1,
        }
    }

    /// Reads a config; dataset paths become relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut cfg.datasets {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
        if let Some(src) = cfg.provider.source.as_mut() {
            if src.is_relative() {
                *src = base.join(&*src);
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn low_resource(&self) -> bool {
        !self.datasets.is_empty() && self.datasets.iter().all(|d| d.task == TaskKind::Episodic)
    }

    pub fn is_joint(&self) -> bool {
        self.datasets.len() > 1
    }

    pub fn layers(&self) -> usize {
        self.layers.unwrap_or(if self.low_resource() {
            5
        } else if self.is_joint() {
            7
        } else {
            6
        })
    }

    pub fn lr(&self) -> f64 {
        self.lr.unwrap_or(1e-4)
    }

    pub fn epochs(&self) -> usize {
        self.epochs.unwrap_or(if self.low_resource() { 30 } else { 100 })
    }

    pub fn provider(&self) -> ProviderSpec {
        let mut p = self.provider.clone();
        if let Some(d) = self.dim {
            p.dim = d;
        }
        p
    }

    pub fn select_best(&self) -> bool {
        match self.selection {
            Selection::Auto => !self.is_joint(),
            Selection::BestVal => true,
            Selection::Final => false,
        }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.datasets.is_empty() {
            return bad("no datasets configured".into());
        }
        if self.batch_size == 0 || self.workers == 0 || self.layers() == 0 {
            return bad("batch size, workers and layers must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.lr().is_nan() || self.lr() <= 0.0 || self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return bad("learning rate and clip norm must be positive".into());
        }
        for d in &self.datasets {
            if d.multiplier.is_nan() || d.multiplier <= 0.0 {
                return bad(format!("multiplier for {} must be positive", d.path.display()));
            }
            if d.n_way.0 > d.n_way.1 || d.k_shot.0 > d.k_shot.1 {
                return bad(format!("empty N or K range for {}", d.path.display()));
            }
        }
        self.provider().check()
    }
}
