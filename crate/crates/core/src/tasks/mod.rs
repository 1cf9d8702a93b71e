//! Streams of model inputs: supervised samples, N-way K-shot episodes, and
//! their assembly into prompted graphs.

mod episode;
mod sampling;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, SplitName};
use crate::error::{Error, Result};
use crate::prompt::{
    apply_ablation, build_few_shot, default_hops, AblationMode, GraphIndex, Noi, NoiSubgraph, PromptedGraph,
    SupportExample,
};
use crate::tag::TaskLevel;

pub use episode::{sample_episode, EpisodeSpec};
pub use sampling::{mix_datasets, sample_link_negatives, split_labels, LabelSplit, MixPlan};

/// A NOI inside one of a dataset's graphs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiRef {
    pub graph: usize,
    pub targets: Vec<usize>,
    pub level: TaskLevel,
}

impl NoiRef {
    pub fn of_sample(ds: &Dataset, sample: usize) -> Self {
        let s = &ds.samples[sample];
        let level = ds.level();
        let targets = match level {
            TaskLevel::Graph => (0..ds.graphs[s.graph].num_nodes()).collect(),
            _ => s.target.clone(),
        };
        Self {
            graph: s.graph,
            targets,
            level,
        }
    }

    pub fn noi(&self) -> Noi {
        Noi {
            targets: self.targets.clone(),
            level: self.level,
        }
    }
}

/// Everything needed to assemble one prompted graph and score it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptItem {
    pub dataset: usize,
    /// Sample index of the query, when it is a dataset sample.
    pub sample: Option<usize>,
    pub query: NoiRef,
    /// `[class][shot]`; empty for supervised and zero-shot items.
    pub supports: Vec<Vec<NoiRef>>,
    pub task_text: String,
    pub class_texts: Vec<String>,
    /// Positions in `class_texts` that are true.
    pub positives: Vec<usize>,
}

impl PromptItem {
    pub fn num_classes(&self) -> usize {
        self.class_texts.len()
    }

    /// 0/1 label per class.
    pub fn labels(&self) -> Vec<f32> {
        let mut y = vec![0.0; self.class_texts.len()];
        for &p in &self.positives {
            y[p] = 1.0;
        }
        y
    }
}

/// The supervised item for one sample: all of the dataset's classes as
/// candidates, every listed class positive.
pub fn supervised_item(ds: &Dataset, dataset: usize, sample: usize) -> PromptItem {
    PromptItem {
        dataset,
        sample: Some(sample),
        query: NoiRef::of_sample(ds, sample),
        supports: Vec::new(),
        task_text: ds.manifest.task_text.clone(),
        class_texts: ds.manifest.class_texts.clone(),
        positives: ds.samples[sample].classes.clone(),
    }
}

/// Shuffles a split and cuts it into batches of at most `batch_size` items.
pub fn make_supervised_batch(
    ds: &Dataset,
    dataset: usize,
    split: SplitName,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<Vec<PromptItem>>> {
    use rand::seq::SliceRandom;
    let idx = ds.manifest.splits.get(split);
    if idx.is_empty() {
        return Err(Error::Sampling(format!("split {split} of {} is empty", ds.name())));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut order = idx.to_vec();
    order.shuffle(&mut crate::rng::stream(seed, "supervised-batch", 0));
    Ok(order
        .chunks(batch_size)
        .map(|c| c.iter().map(|&s| supervised_item(ds, dataset, s)).collect())
        .collect())
}

/// Ego radius per task level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hops {
    pub node: usize,
    pub link: usize,
}

impl Default for Hops {
    fn default() -> Self {
        Self {
            node: default_hops(TaskLevel::Node),
            link: default_hops(TaskLevel::Link),
        }
    }
}

impl Hops {
    pub fn uniform(h: usize) -> Self {
        Self { node: h, link: h }
    }

    pub fn for_level(&self, level: TaskLevel) -> usize {
        match level {
            TaskLevel::Node => self.node,
            TaskLevel::Link => self.link,
            TaskLevel::Graph => 0,
        }
    }
}

/// Turns [`PromptItem`]s into prompted graphs. Holds reachability indexes
/// for the shared graphs of node- and link-level datasets.
pub struct Assembler<'a> {
    datasets: &'a [Dataset],
    indexes: Vec<Option<GraphIndex>>,
    pub hops: Hops,
    pub ablation: AblationMode,
}

impl<'a> Assembler<'a> {
    pub fn new(datasets: &'a [Dataset], hops: Hops, ablation: AblationMode) -> Self {
        let indexes = datasets
            .iter()
            .map(|ds| match ds.level() {
                TaskLevel::Graph => None,
                _ => ds.graphs.first().map(GraphIndex::new),
            })
            .collect();
        Self {
            datasets,
            indexes,
            hops,
            ablation,
        }
    }

    pub fn datasets(&self) -> &'a [Dataset] {
        self.datasets
    }

    fn subgraph(&self, dataset: usize, r: &NoiRef) -> Result<NoiSubgraph> {
        let ds = &self.datasets[dataset];
        let graph = ds
            .graphs
            .get(r.graph)
            .ok_or_else(|| Error::Sampling(format!("graph {} outside dataset {}", r.graph, ds.name())))?;
        let noi = r.noi();
        noi.check(graph)?;
        match (r.level, &self.indexes[dataset]) {
            (TaskLevel::Graph, _) => Ok(NoiSubgraph::whole(graph)),
            (level, Some(idx)) if r.graph == 0 => idx.link_query_subgraph(graph, &noi, self.hops.for_level(level)),
            (level, _) => GraphIndex::new(graph).link_query_subgraph(graph, &noi, self.hops.for_level(level)),
        }
    }

    pub fn assemble(&self, item: &PromptItem) -> Result<PromptedGraph> {
        let ds = self
            .datasets
            .get(item.dataset)
            .ok_or_else(|| Error::Sampling(format!("dataset {} out of range", item.dataset)))?;
        let q_sub = self.subgraph(item.dataset, &item.query)?;
        let q_noi = item.query.noi();
        let s_subs: Vec<Vec<(NoiSubgraph, Noi)>> = item
            .supports
            .iter()
            .map(|shots| {
                shots
                    .iter()
                    .map(|r| Ok((self.subgraph(item.dataset, r)?, r.noi())))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let supports: Vec<Vec<SupportExample<'_>>> = item
            .supports
            .iter()
            .zip(&s_subs)
            .map(|(refs, subs)| {
                refs.iter()
                    .zip(subs)
                    .map(|(r, (sub, noi))| SupportExample {
                        graph: &ds.graphs[r.graph],
                        subgraph: sub,
                        noi,
                    })
                    .collect()
            })
            .collect();
        let full = build_few_shot(
            &ds.graphs[item.query.graph],
            &q_sub,
            &q_noi,
            &supports,
            &item.task_text,
            &item.class_texts,
        )?;
        apply_ablation(&full, self.ablation)
    }
}
