use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Splits;
use crate::error::{Error, Result};
use crate::rng;
use crate::tag::TaGraph;

/// Class-index partition for episodic training and evaluation.
pub type LabelSplit = Splits;

fn pair(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Labels `positives` with class 1 ("have") and adds `ratio` times as many
/// uniformly drawn non-edge pairs with class 0 ("do not have"). Pairs are
/// unordered; no pair repeats and no negative is an edge in either direction.
pub fn sample_link_negatives(
    graph: &TaGraph,
    positives: &[(usize, usize)],
    ratio: usize,
    seed: u64,
) -> Result<Vec<(usize, usize, usize)>> {
    if ratio < 1 {
        return Err(Error::Sampling("negative ratio must be at least 1".into()));
    }
    let n = graph.num_nodes();
    let mut taken: HashSet<(usize, usize)> = graph.edges.iter().map(|e| pair(e.src, e.dst)).collect();
    let mut out = Vec::with_capacity(positives.len() * (ratio + 1));
    for &(a, b) in positives {
        if a >= n || b >= n {
            return Err(Error::Sampling(format!("positive pair ({a}, {b}) outside graph")));
        }
        taken.insert(pair(a, b));
        out.push((a, b, 1));
    }
    let total_pairs = n * n.saturating_sub(1) / 2;
    let blocked = taken.iter().filter(|(a, b)| a != b).count();
    let free = total_pairs - blocked;
    let need = positives.len() * ratio;
    if need > free {
        return Err(Error::Sampling(format!(
            "graph too dense: {need} negatives requested, {free} non-edge pairs available"
        )));
    }
    let mut r = rng::stream(seed, "link-negatives", 0);
    if need * 2 > free {
        let mut all: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|p| !taken.contains(p))
            .collect();
        all.shuffle(&mut r);
        out.extend(all.into_iter().take(need).map(|(a, b)| (a, b, 0)));
        return Ok(out);
    }
    while out.len() < positives.len() + need {
        let (a, b) = (r.gen_range(0..n), r.gen_range(0..n));
        if a == b {
            continue;
        }
        let p = pair(a, b);
        if taken.insert(p) {
            out.push((p.0, p.1, 0));
        }
    }
    Ok(out)
}

/// Shuffles `classes` and deals `counts` of them into train, val and test.
pub fn split_labels(classes: &[usize], counts: [usize; 3], seed: u64) -> Result<LabelSplit> {
    let need: usize = counts.iter().sum();
    if need > classes.len() {
        return Err(Error::Sampling(format!(
            "label split needs {need} classes, only {} available",
            classes.len()
        )));
    }
    let mut order = classes.to_vec();
    order.shuffle(&mut rng::stream(seed, "label-split", 0));
    let (train, rest) = order.split_at(counts[0]);
    let (val, rest) = rest.split_at(counts[1]);
    Ok(LabelSplit {
        train: train.to_vec(),
        val: val.to_vec(),
        test: rest[..counts[2]].to_vec(),
    })
}

/// Per-dataset sampling multipliers for joint training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixPlan {
    pub multipliers: Vec<f64>,
    pub seed: u64,
}

/// One epoch of `(dataset, sample)` draws. Each dataset contributes
/// `floor(m * |train|)` samples: the whole split `floor(m)` times, plus the
/// remainder drawn without replacement and fresh each epoch. The result is
/// shuffled across datasets.
pub fn mix_datasets(train: &[&[usize]], plan: &MixPlan, epoch: u64) -> Result<Vec<(usize, usize)>> {
    if plan.multipliers.len() != train.len() {
        return Err(Error::Config(format!(
            "{} multipliers for {} datasets",
            plan.multipliers.len(),
            train.len()
        )));
    }
    if let Some(m) = plan.multipliers.iter().find(|m| !m.is_finite() || **m <= 0.0) {
        return Err(Error::Config(format!("multiplier {m} must be positive")));
    }
    let mut r = rng::stream(plan.seed, "mix", epoch);
    let mut out = Vec::new();
    for (d, (split, &m)) in train.iter().zip(&plan.multipliers).enumerate() {
        let total = (m * split.len() as f64 + 1e-9).floor() as usize;
        let whole = total / split.len().max(1);
        for _ in 0..whole {
            out.extend(split.iter().map(|&s| (d, s)));
        }
        let rest = total - whole * split.len();
        for i in index::sample(&mut r, split.len(), rest) {
            out.push((d, split[i]));
        }
    }
    out.shuffle(&mut r);
    Ok(out)
}
