use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NoiRef, PromptItem};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// One N-way K-shot task instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub n_way: usize,
    pub k_shot: usize,
    /// Dataset class index behind each of the N candidates.
    pub classes: Vec<usize>,
    pub class_texts: Vec<String>,
    pub task_text: String,
    pub query_sample: usize,
    /// Position of the query's class among the candidates.
    pub query_class: usize,
    /// `[class][shot]` sample indices.
    pub support_samples: Vec<Vec<usize>>,
}

impl EpisodeSpec {
    pub fn to_item(&self, ds: &Dataset, dataset: usize) -> PromptItem {
        PromptItem {
            dataset,
            sample: Some(self.query_sample),
            query: NoiRef::of_sample(ds, self.query_sample),
            supports: if self.k_shot == 0 {
                Vec::new()
            } else {
                self.support_samples
                    .iter()
                    .map(|shots| shots.iter().map(|&s| NoiRef::of_sample(ds, s)).collect())
                    .collect()
            },
            task_text: self.task_text.clone(),
            class_texts: self.class_texts.clone(),
            positives: vec![self.query_class],
        }
    }
}

fn draw<R: Rng>(pool: &[usize], count: usize, used: &mut HashSet<usize>, r: &mut R) -> Option<Vec<usize>> {
    let free: Vec<usize> = pool.iter().copied().filter(|s| !used.contains(s)).collect();
    if free.len() < count {
        return None;
    }
    let picked: Vec<usize> = index::sample(r, free.len(), count)
        .into_iter()
        .map(|i| free[i])
        .collect();
    used.extend(&picked);
    Some(picked)
}

fn range<R: Rng>(r: &mut R, (lo, hi): (usize, usize), what: &str) -> Result<usize> {
    if lo > hi {
        return Err(Error::Config(format!("{what} range [{lo}, {hi}] is empty")));
    }
    Ok(r.gen_range(lo..=hi))
}

/// Draws an episode over the classes in `part`.
///
/// Multi-label datasets with negative class texts yield 2-way episodes: one
/// label column from `part`, its text against its negative text, with K
/// positive and K negative supports. `n_range` is ignored there.
pub fn sample_episode(
    ds: &Dataset,
    part: &[usize],
    n_range: (usize, usize),
    k_range: (usize, usize),
    seed: u64,
) -> Result<EpisodeSpec> {
    let mut r = rng::stream(seed, "episode", 0);
    let binary = ds.is_multi_label() && ds.manifest.negative_class_texts.is_some();
    let n = if binary { 2 } else { range(&mut r, n_range, "N")? };
    let k = range(&mut r, k_range, "K")?;
    if n == 0 {
        return Err(Error::Sampling("episodes need at least one class".into()));
    }
    if let Some(&bad) = part.iter().find(|&&c| c >= ds.num_classes()) {
        return Err(Error::Sampling(format!("class {bad} outside {}", ds.name())));
    }
    let in_class = |c: usize| -> Vec<usize> {
        (0..ds.samples.len())
            .filter(|&s| ds.samples[s].classes.contains(&c))
            .collect()
    };
    let mut used = HashSet::new();
    let short = |c: usize, have: usize, need: usize| {
        Error::Sampling(format!(
            "class {c} ({:?}) has {have} usable samples, needs {need}",
            ds.manifest.class_texts[c]
        ))
    };

    if binary {
        if part.is_empty() {
            return Err(Error::Sampling("no label columns to draw from".into()));
        }
        let c = part[r.gen_range(0..part.len())];
        let pos = in_class(c);
        let neg: Vec<usize> = (0..ds.samples.len()).filter(|s| !pos.contains(s)).collect();
        let query_class = r.gen_range(0..2);
        let mut supports = Vec::with_capacity(2);
        let mut query = None;
        for (i, pool) in [&pos, &neg].into_iter().enumerate() {
            let need = k + usize::from(i == query_class);
            let mut got = draw(pool, need, &mut used, &mut r).ok_or_else(|| short(c, pool.len(), need))?;
            if i == query_class {
                query = got.pop();
            }
            supports.push(got);
        }
        let negative = &ds.manifest.negative_class_texts.as_ref().unwrap()[c];
        return Ok(EpisodeSpec {
            n_way: 2,
            k_shot: k,
            classes: vec![c, c],
            class_texts: vec![ds.manifest.class_texts[c].clone(), negative.clone()],
            task_text: ds.manifest.task_text.clone(),
            query_sample: query.unwrap(),
            query_class,
            support_samples: supports,
        });
    }

    if part.len() < n {
        return Err(Error::Sampling(format!(
            "{n}-way episode needs {n} classes, part has {}",
            part.len()
        )));
    }
    let pools: Vec<Vec<usize>> = part.iter().map(|&c| in_class(c)).collect();
    let k_max = k_range.1;
    if let Some((i, p)) = pools.iter().enumerate().find(|(_, p)| p.len() < k_max + 1) {
        return Err(short(part[i], p.len(), k_max + 1));
    }
    let chosen: Vec<usize> = index::sample(&mut r, part.len(), n).into_vec();
    let query_class = r.gen_range(0..n);
    let mut query = None;
    let mut supports = Vec::with_capacity(n);
    for (i, &ci) in chosen.iter().enumerate() {
        let need = k + usize::from(i == query_class);
        let mut got =
            draw(&pools[ci], need, &mut used, &mut r).ok_or_else(|| short(part[ci], pools[ci].len(), need))?;
        if i == query_class {
            query = got.pop();
        }
        supports.push(got);
    }
    let classes: Vec<usize> = chosen.iter().map(|&i| part[i]).collect();
    Ok(EpisodeSpec {
        n_way: n,
        k_shot: k,
        class_texts: classes.iter().map(|&c| ds.manifest.class_texts[c].clone()).collect(),
        classes,
        task_text: ds.manifest.task_text.clone(),
        query_sample: query.unwrap(),
        query_class,
        support_samples: supports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::AblationMode;
    use crate::tasks::tests::ring_dataset;
    use crate::tasks::{Assembler, Hops};

    #[test]
    fn zero_shot_episode() {
        let ds = ring_dataset(40, 8);
        let part: Vec<usize> = (0..8).collect();
        let e = sample_episode(&ds, &part, (5, 5), (0, 0), 1).unwrap();
        assert_eq!(e.n_way, 5);
        assert!(e.support_samples.iter().all(Vec::is_empty));
        assert!(e.to_item(&ds, 0).supports.is_empty());
        assert_eq!(ds.samples[e.query_sample].classes, vec![e.classes[e.query_class]]);
    }

    #[test]
    fn balanced_supports() {
        let ds = ring_dataset(40, 4);
        let e = sample_episode(&ds, &[0, 1, 2, 3], (2, 2), (3, 3), 9).unwrap();
        assert_eq!(e.support_samples.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3]);
        for (i, shots) in e.support_samples.iter().enumerate() {
            for &s in shots {
                assert_eq!(ds.samples[s].classes, vec![e.classes[i]]);
            }
        }
        let asm = Assembler::new(std::slice::from_ref(&ds), Hops::uniform(1), AblationMode::Full);
        let pg = asm.assemble(&e.to_item(&ds, 0)).unwrap();
        assert_eq!(pg.prompt_node_count(), 1 + 6 + 2);
    }

    #[test]
    fn query_never_in_supports() {
        let ds = ring_dataset(30, 3);
        for seed in 0..1000 {
            let e = sample_episode(&ds, &[0, 1, 2], (2, 3), (1, 4), seed).unwrap();
            assert!(e.support_samples.iter().flatten().all(|&s| s != e.query_sample));
            let distinct: HashSet<usize> = e.support_samples.iter().flatten().copied().collect();
            assert_eq!(distinct.len(), e.n_way * e.k_shot);
        }
    }

    #[test]
    fn thin_class_is_named() {
        let ds = ring_dataset(8, 4);
        let err = sample_episode(&ds, &[0, 1, 2, 3], (2, 2), (2, 2), 0)
            .unwrap_err()
            .to_string();
        assert!(err.contains("class 0"), "{err}");
        assert_eq!(
            sample_episode(&ds, &[0, 1], (2, 2), (1, 1), 5).unwrap(),
            sample_episode(&ds, &[0, 1], (2, 2), (1, 1), 5).unwrap()
        );
    }

    #[test]
    fn binary_assay_episode() {
        let mut ds = ring_dataset(20, 3);
        for (i, s) in ds.samples.iter_mut().enumerate() {
            s.classes = if i % 2 == 0 { vec![0, 2] } else { vec![1] };
        }
        ds.manifest.negative_class_texts = Some((0..3).map(|c| format!("prompt node. not kind {c}")).collect());
        let e = sample_episode(&ds, &[0, 1, 2], (5, 5), (2, 2), 3).unwrap();
        assert_eq!(e.n_way, 2);
        let c = e.classes[0];
        assert_eq!(e.class_texts[1], format!("prompt node. not kind {c}"));
        for &s in &e.support_samples[0] {
            assert!(ds.samples[s].classes.contains(&c));
        }
        for &s in &e.support_samples[1] {
            assert!(!ds.samples[s].classes.contains(&c));
        }
        let positive = ds.samples[e.query_sample].classes.contains(&c);
        assert_eq!(positive, e.query_class == 0);
    }
}
