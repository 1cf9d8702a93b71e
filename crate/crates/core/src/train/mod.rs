//! Optimization, evaluation protocols, metrics and embedding dumps.

mod config;
mod metrics;
mod optim;

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_dataset, Dataset, SplitName};
use crate::embedding::{embed_all, EmbeddingTable, Provider};
use crate::error::{Error, Result};
use crate::model::{
    backward_into, forward, predict_class, sample_embedding, Checkpoint, EncodedGraph, ModelConfig, ModelParams,
};
use crate::prompt::AblationMode;
use crate::rng::{self, Rng};
use crate::tasks::{mix_datasets, sample_episode, supervised_item, Assembler, Hops, MixPlan, PromptItem};

pub use config::{DatasetEntry, RunConfig, Selection, TaskKind};
pub use metrics::{accuracy, average_precision, compute_metric, default_metric, roc_auc, MetricKind, MetricValue};
pub use optim::{clip_global_norm, Adam, AdamConfig};

/// Outcome of an evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: MetricKind,
    pub value: f64,
    pub count: usize,
    /// Value per dataset name.
    pub datasets: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitName>,
    /// 95% normal-approximation interval (episodic evaluation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped_columns: Vec<usize>,
}

/// Loaded datasets plus the embedding table covering all their texts.
pub fn prepare(config: &RunConfig) -> Result<(Vec<Dataset>, EmbeddingTable)> {
    let datasets = config
        .datasets
        .iter()
        .map(|d| load_dataset(&d.path))
        .collect::<Result<Vec<_>>>()?;
    let provider = Provider::from_spec(&config.provider())?;
    let table = embed_all(&datasets, &provider)?;
    Ok((datasets, table))
}

/// Relation vocabulary covering every dataset.
pub fn relation_vocabulary(datasets: &[Dataset]) -> Vec<String> {
    datasets
        .iter()
        .flat_map(|d| d.manifest.relation_texts.iter().cloned())
        .collect()
}

/// Scoring and evaluation over a fixed set of datasets and embeddings.
pub struct Session<'a> {
    pub assembler: Assembler<'a>,
    pub table: &'a EmbeddingTable,
    pool: Option<rayon::ThreadPool>,
}

impl<'a> Session<'a> {
    pub fn new(
        datasets: &'a [Dataset],
        table: &'a EmbeddingTable,
        hops: Hops,
        ablation: AblationMode,
        workers: usize,
    ) -> Result<Self> {
        let workers = workers.max(1);
        let pool = if workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::Config(format!("worker pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            assembler: Assembler::new(datasets, hops, ablation),
            table,
            pool,
        })
    }

    pub fn datasets(&self) -> &'a [Dataset] {
        self.assembler.datasets()
    }

    pub fn dataset_index(&self, name: &str) -> Result<usize> {
        self.datasets()
            .iter()
            .position(|d| d.name() == name)
            .ok_or_else(|| Error::Config(format!("no dataset named {name:?}")))
    }

    /// Order-preserving map, run on the worker pool when there is one.
    fn map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        match &self.pool {
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
            None => (0..n).map(f).collect(),
        }
    }

    pub fn encode(&self, params: &ModelParams<f32>, item: &PromptItem) -> Result<EncodedGraph<f32>> {
        let pg = self.assembler.assemble(item)?;
        EncodedGraph::new(&pg, self.table, params)
    }

    /// Raw class scores per item, in eval mode.
    pub fn score(&self, params: &ModelParams<f32>, items: &[PromptItem]) -> Result<Vec<Vec<f32>>> {
        self.map(items.len(), |i| {
            let g = self.encode(params, &items[i])?;
            Ok(forward::<f32, Rng>(params, &g, None)?.scores)
        })
    }

    pub fn evaluate_supervised(
        &self,
        params: &ModelParams<f32>,
        dataset: usize,
        split: SplitName,
        metric: MetricKind,
    ) -> Result<MetricReport> {
        let ds = &self.datasets()[dataset];
        let idx = ds.manifest.splits.get(split);
        if idx.is_empty() {
            return Err(Error::Sampling(format!("split {split} of {} is empty", ds.name())));
        }
        let items: Vec<PromptItem> = idx.iter().map(|&s| supervised_item(ds, dataset, s)).collect();
        let scores = self.score(params, &items)?;
        let scores: Vec<Vec<f64>> = scores.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let labels: Vec<Vec<bool>> = items
            .iter()
            .map(|it| it.labels().iter().map(|&v| v > 0.5).collect())
            .collect();
        let v = compute_metric(&scores, &labels, metric)?;
        Ok(MetricReport {
            metric,
            value: v.value,
            count: items.len(),
            datasets: BTreeMap::from([(ds.name().to_string(), v.value)]),
            split: Some(split),
            interval: None,
            skipped_columns: v.skipped_columns,
        })
    }

    /// Mean query accuracy over `episodes` seeded episodes.
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate_episodes(
        &self,
        params: &ModelParams<f32>,
        dataset: usize,
        part: &[usize],
        n_range: (usize, usize),
        k_range: (usize, usize),
        episodes: usize,
        seed: u64,
    ) -> Result<MetricReport> {
        if episodes == 0 {
            return Err(Error::Config("episode count must be positive".into()));
        }
        let ds = &self.datasets()[dataset];
        let specs = (0..episodes)
            .map(|i| {
                sample_episode(
                    ds,
                    part,
                    n_range,
                    k_range,
                    rng::derive_seed(seed, "eval-episode", i as u64),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let items: Vec<PromptItem> = specs.iter().map(|s| s.to_item(ds, dataset)).collect();
        let scores = self.score(params, &items)?;
        let correct = scores
            .iter()
            .zip(&specs)
            .filter(|(s, e)| predict_class(s) == Some(e.query_class))
            .count();
        let n = episodes as f64;
        let mean = correct as f64 / n;
        let half = 1.96 * (mean * (1.0 - mean) / n).sqrt();
        Ok(MetricReport {
            metric: MetricKind::Acc,
            value: mean,
            count: episodes,
            datasets: BTreeMap::from([(ds.name().to_string(), mean)]),
            split: None,
            interval: Some([(mean - half).max(0.0), (mean + half).min(1.0)]),
            skipped_columns: Vec::new(),
        })
    }

    /// One CSV row per sample of every dataset: the dataset name followed by
    /// the sample's prompt-node readout. Returns the number of rows.
    pub fn dump_prompt_embeddings<W: Write>(&self, params: &ModelParams<f32>, mut out: W) -> Result<usize> {
        let mut rows = 0;
        for (d, ds) in self.datasets().iter().enumerate() {
            let vecs = self.map(ds.samples.len(), |s| {
                let g = self.encode(params, &supervised_item(ds, d, s))?;
                let trace = forward::<f32, Rng>(params, &g, None)?;
                Ok(sample_embedding(params, &g, &trace))
            })?;
            let name = csv_field(ds.name());
            for v in vecs {
                let mut line = name.clone();
                for x in v.iter() {
                    line.push(',');
                    line.push_str(&format!("{x:.8e}"));
                }
                line.push('\n');
                out.write_all(line.as_bytes())
                    .map_err(|e| Error::io("embedding dump", e))?;
                rows += 1;
            }
        }
        Ok(rows)
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValPoint {
    pub epoch: usize,
    pub metric: MetricKind,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub curve: Vec<CurvePoint>,
    pub validation: Vec<ValPoint>,
    pub best_epoch: Option<usize>,
    pub steps: usize,
}

impl TrainOutcome {
    /// `step,loss,lr` lines.
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("step,loss,lr\n");
        for p in &self.curve {
            s.push_str(&format!("{},{:.9e},{:e}\n", p.step, p.loss, p.lr));
        }
        s
    }
}

/// Items per gradient partial; partials are summed in batch order whatever
/// the worker count.
const GRAD_CHUNK: usize = 8;

/// Loads, embeds and trains as `config` says.
pub fn train(config: &RunConfig) -> Result<TrainOutcome> {
    config.check()?;
    let (datasets, table) = prepare(config)?;
    train_with(config, &datasets, &table)
}

fn selection_metric(entry: &DatasetEntry, ds: &Dataset) -> MetricKind {
    entry.metric.unwrap_or(match entry.task {
        TaskKind::Episodic => MetricKind::Acc,
        TaskKind::Supervised => default_metric(ds.num_classes(), ds.is_multi_label()),
    })
}

/// Trains on already loaded datasets; `config.datasets[i]` describes
/// `datasets[i]` (its path is not read).
pub fn train_with(config: &RunConfig, datasets: &[Dataset], table: &EmbeddingTable) -> Result<TrainOutcome> {
    config.check()?;
    if config.datasets.len() != datasets.len() {
        return Err(Error::Config(format!(
            "{} dataset entries for {} datasets",
            config.datasets.len(),
            datasets.len()
        )));
    }
    for (e, ds) in config.datasets.iter().zip(datasets) {
        if e.task == TaskKind::Episodic && ds.manifest.label_splits.is_none() {
            return Err(Error::Config(format!(
                "episodic dataset {} has no label split",
                ds.name()
            )));
        }
    }
    let seed = config.seed;
    let model_cfg = ModelConfig::new(
        table.dim(),
        config.layers(),
        config.dropout,
        config.ablation,
        relation_vocabulary(datasets),
    );
    let mut params = ModelParams::<f32>::init(model_cfg, &mut rng::stream(seed, "init", 0))?;
    let session = Session::new(datasets, table, config.hops, config.ablation, config.workers)?;
    let adam_cfg = AdamConfig {
        lr: config.lr(),
        ..AdamConfig::default()
    };
    let mut opt = Adam::new(adam_cfg, &params);

    // supervised train items never change, so encode them once
    let supervised: Vec<usize> = (0..datasets.len())
        .filter(|&d| config.datasets[d].task == TaskKind::Supervised)
        .collect();
    let mut cache_keys = Vec::new();
    for &d in &supervised {
        for &s in &datasets[d].manifest.splits.train {
            cache_keys.push((d, s));
        }
    }
    let encoded = session.map(cache_keys.len(), |i| {
        let (d, s) = cache_keys[i];
        session.encode(&params, &supervised_item(&datasets[d], d, s))
    })?;
    let cache: HashMap<(usize, usize), EncodedGraph<f32>> = cache_keys.iter().copied().zip(encoded).collect();
    let train_splits: Vec<&[usize]> = supervised
        .iter()
        .map(|&d| datasets[d].manifest.splits.train.as_slice())
        .collect();
    if train_splits.iter().any(|s| s.is_empty()) {
        return Err(Error::Config("a supervised dataset has an empty train split".into()));
    }
    let mix = MixPlan {
        multipliers: supervised.iter().map(|&d| config.datasets[d].multiplier).collect(),
        seed: rng::derive_seed(seed, "mix", 0),
    };

    let select = config.select_best() && config.eval_every > 0;
    let mut best: Option<(f64, usize, ModelParams<f32>)> = None;
    let mut curve = Vec::new();
    let mut validation = Vec::new();
    let mut step = 0usize;
    let mut counter = 0u64;
    let max_steps = config.max_steps.unwrap_or(usize::MAX);

    'epochs: for epoch in 0..config.epochs() {
        let mut items: Vec<(PromptItem, bool)> = mix_datasets(&train_splits, &mix, epoch as u64)?
            .into_iter()
            .map(|(k, s)| {
                let d = supervised[k];
                (supervised_item(&datasets[d], d, s), true)
            })
            .collect();
        for (d, entry) in config.datasets.iter().enumerate() {
            if entry.task != TaskKind::Episodic {
                continue;
            }
            let part = &datasets[d].manifest.label_splits.as_ref().unwrap().train;
            let count = (entry.multiplier * entry.episodes as f64 + 1e-9).floor() as usize;
            for i in 0..count {
                let es = rng::derive_seed(seed, &format!("train-episode-{d}"), ((epoch as u64) << 32) | i as u64);
                let spec = sample_episode(&datasets[d], part, entry.n_way, entry.k_shot, es)?;
                items.push((spec.to_item(&datasets[d], d), false));
            }
        }
        items.shuffle(&mut rng::stream(seed, "epoch-order", epoch as u64));

        for batch in items.chunks(config.batch_size) {
            if step >= max_steps {
                break 'epochs;
            }
            let base = counter;
            counter += batch.len() as u64;
            let scale = 1.0 / batch.len() as f32;
            let parts: Vec<&[(PromptItem, bool)]> = batch.chunks(GRAD_CHUNK).collect();
            let partials = session.map(parts.len(), |p| {
                let mut grads = params.zeros_like();
                let mut loss = 0.0f64;
                for (j, (item, cached)) in parts[p].iter().enumerate() {
                    let g: Cow<EncodedGraph<f32>> = match (cached, item.sample) {
                        (true, Some(s)) => match cache.get(&(item.dataset, s)) {
                            Some(g) => Cow::Borrowed(g),
                            None => Cow::Owned(session.encode(&params, item)?),
                        },
                        _ => Cow::Owned(session.encode(&params, item)?),
                    };
                    let mut drop_rng = rng::stream(seed, "dropout", base + (p * GRAD_CHUNK + j) as u64);
                    let trace = forward(&params, &g, Some(&mut drop_rng))?;
                    loss += backward_into(&params, &g, &trace, &item.labels(), scale, &mut grads)? as f64;
                }
                Ok((loss, grads))
            })?;
            let mut grads = params.zeros_like();
            let mut loss = 0.0;
            for (l, g) in &partials {
                loss += l;
                grads.add_scaled(g, 1.0);
            }
            let loss = loss / batch.len() as f64;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::Diverged(format!("step {step}: loss {loss}")));
            }
            clip_global_norm(&mut grads, config.clip_norm as f32);
            opt.step(&mut params, &grads);
            if !params.all_finite() {
                return Err(Error::Diverged(format!("step {step}: non-finite parameters")));
            }
            curve.push(CurvePoint {
                step,
                loss,
                lr: adam_cfg.lr,
            });
            step += 1;
        }

        if select && (epoch + 1) % config.eval_every == 0 {
            let entry = &config.datasets[0];
            let ds = &datasets[0];
            let metric = selection_metric(entry, ds);
            let value = match entry.task {
                TaskKind::Supervised if !ds.manifest.splits.val.is_empty() => {
                    Some(session.evaluate_supervised(&params, 0, SplitName::Val, metric)?.value)
                }
                TaskKind::Episodic => match ds.manifest.label_splits.as_ref().map(|l| &l.val) {
                    Some(val) if !val.is_empty() => Some(
                        session
                            .evaluate_episodes(
                                &params,
                                0,
                                val,
                                entry.n_way,
                                entry.k_shot,
                                config.val_episodes,
                                rng::derive_seed(seed, "val-episodes", 0),
                            )?
                            .value,
                    ),
                    _ => None,
                },
                _ => None,
            };
            if let Some(value) = value {
                validation.push(ValPoint { epoch, metric, value });
                if best.as_ref().is_none_or(|(b, _, _)| value > *b) {
                    best = Some((value, epoch, params.clone()));
                }
            }
        }
    }

    let best_epoch = best.as_ref().map(|(_, e, _)| *e);
    let final_params = match best {
        Some((_, _, p)) => p,
        None => params,
    };
    let run = serde_json::json!({
        "provider": config.provider(),
        "hops": config.hops,
        "datasets": datasets.iter().map(|d| d.name()).collect::<Vec<_>>(),
        "optimizer": {"kind": "adam", "lr": adam_cfg.lr, "beta1": adam_cfg.beta1, "beta2": adam_cfg.beta2, "eps": adam_cfg.eps},
        "batch_size": config.batch_size,
        "clip_norm": config.clip_norm,
        "steps": step,
        "best_epoch": best_epoch,
    });
    Ok(TrainOutcome {
        checkpoint: Checkpoint::new(final_params, seed, run),
        curve,
        validation,
        best_epoch,
        steps: step,
    })
}

/// Hop settings recorded in a checkpoint, if any.
pub fn checkpoint_hops(ckpt: &Checkpoint) -> Option<Hops> {
    serde_json::from_value(ckpt.run.get("hops")?.clone()).ok()
}

/// Provider recorded in a checkpoint, if any.
pub fn checkpoint_provider(ckpt: &Checkpoint) -> Option<crate::embedding::ProviderSpec> {
    serde_json::from_value(ckpt.run.get("provider")?.clone()).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::ProviderSpec;
    use crate::tasks::tests::ring_dataset;

    fn setup() -> (Vec<Dataset>, EmbeddingTable) {
        let ds = vec![ring_dataset(30, 3)];
        let table = embed_all(&ds, &Provider::from_spec(&ProviderSpec::hash(16, 1)).unwrap()).unwrap();
        (ds, table)
    }

    fn cfg() -> RunConfig {
        let mut c = RunConfig::new(vec![DatasetEntry::supervised("unused")]);
        c.provider = ProviderSpec::hash(16, 1);
        c.layers = Some(2);
        c.lr = Some(0.01);
        c.epochs = Some(3);
        c.batch_size = 8;
        c.hops = Hops::uniform(1);
        c
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (ds, table) = setup();
        let mut c = cfg();
        c.epochs = Some(0);
        let out = train_with(&c, &ds, &table).unwrap();
        let init = ModelParams::<f32>::init(
            ModelConfig::new(16, 2, c.dropout, AblationMode::Full, relation_vocabulary(&ds)),
            &mut rng::stream(0, "init", 0),
        )
        .unwrap();
        assert_eq!(out.checkpoint.params, init);
        assert!(out.curve.is_empty());
    }

    #[test]
    fn training_is_reproducible_and_parallel_safe() {
        let (ds, table) = setup();
        let c = cfg();
        let a = train_with(&c, &ds, &table).unwrap();
        let b = train_with(&c, &ds, &table).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.checkpoint.params, b.checkpoint.params);
        assert_eq!(a.steps, 3 * 3);
        assert_eq!(a.validation.len(), 3);
        assert!(a.best_epoch.is_some());
        let mut c2 = c.clone();
        c2.workers = 2;
        let p = train_with(&c2, &ds, &table).unwrap();
        assert_eq!(p.curve, a.curve);
        assert_eq!(p.checkpoint.params, a.checkpoint.params);
        assert!(a.curve_csv().starts_with("step,loss,lr\n0,"));
    }

    #[test]
    fn evaluation_and_dump_are_deterministic() {
        let (ds, table) = setup();
        let out = train_with(&cfg(), &ds, &table).unwrap();
        let s = Session::new(&ds, &table, Hops::uniform(1), AblationMode::Full, 1).unwrap();
        let p = &out.checkpoint.params;
        let r1 = s.evaluate_supervised(p, 0, SplitName::Test, MetricKind::Acc).unwrap();
        let r2 = s.evaluate_supervised(p, 0, SplitName::Test, MetricKind::Acc).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.count, 6);
        assert!(s.evaluate_supervised(p, 0, SplitName::Test, MetricKind::Auc).is_err());
        let e = s.evaluate_episodes(p, 0, &[0, 1, 2], (2, 2), (1, 1), 20, 3).unwrap();
        let [lo, hi] = e.interval.unwrap();
        assert!(lo <= e.value && e.value <= hi);
        let mut a = Vec::new();
        let rows = s.dump_prompt_embeddings(p, &mut a).unwrap();
        let mut b = Vec::new();
        s.dump_prompt_embeddings(p, &mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(rows, 30);
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().next().unwrap().split(',').count(), 17);
    }

    #[test]
    fn max_steps_caps_training() {
        let (ds, table) = setup();
        let mut c = cfg();
        c.max_steps = Some(4);
        assert_eq!(train_with(&c, &ds, &table).unwrap().steps, 4);
    }
}
