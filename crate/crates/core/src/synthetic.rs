//! Small generated datasets with known answers.
//!
//! [`joint_suite`] gives one node-, one link- and one graph-level task that a
//! single model can fit together; [`zero_shot_matching`] gives a node task
//! whose class texts repeat the content of their members' node texts, with a
//! label split for episodic training.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::convert::{random_splits, KG_NODE_DESC, KG_REL_DESC, KG_TASK};
use crate::dataset::{Dataset, DatasetManifest, DatasetStats, Sample, Splits};
use crate::rng;
use crate::tag::{EdgeRecord, TaGraph, TaskLevel, TextPrefix, TextTemplate};
use crate::tasks::split_labels;

const COLORS: [&str; 3] = ["red", "green", "blue"];
const RELATIONS: [&str; 2] = ["knows", "lives in"];
const ATOMS: [&str; 2] = ["carbon", "oxygen"];
const NOISE: [&str; 8] = ["plain", "small", "large", "quiet", "bright", "round", "flat", "sharp"];

fn feature(prefix: TextPrefix, desc: &str, content: String) -> String {
    TextTemplate::new(prefix)
        .part(desc, content)
        .render()
        .expect("templates have a description")
}

fn undirected(pairs: impl IntoIterator<Item = (usize, usize)>, text: &str) -> Vec<EdgeRecord> {
    pairs
        .into_iter()
        .flat_map(|(a, b)| [(a, b), (b, a)])
        .map(|(src, dst)| EdgeRecord {
            src,
            dst,
            rel: 0,
            text: text.to_string(),
        })
        .collect()
}

fn random_pairs<R: Rng>(n: usize, per_node: usize, r: &mut R) -> Vec<(usize, usize)> {
    let mut pairs = std::collections::BTreeSet::new();
    for a in 0..n {
        for _ in 0..per_node {
            let b = r.gen_range(0..n);
            if a != b {
                pairs.insert((a.min(b), a.max(b)));
            }
        }
    }
    pairs.into_iter().collect()
}

fn manifest(
    name: &str,
    level: TaskLevel,
    task: &str,
    classes: Vec<String>,
    relation: &str,
    splits: Splits,
) -> DatasetManifest {
    DatasetManifest {
        name: name.to_string(),
        task_level: level,
        task_text: task.to_string(),
        class_texts: classes,
        relation_texts: vec![relation.to_string()],
        splits,
        negative_class_texts: None,
        label_splits: None,
        directed: false,
        stats: DatasetStats::default(),
    }
}

/// Node task: each node names its color among noise words (3 classes).
pub fn color_nodes(n: usize, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, "synthetic-colors", 0);
    let labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..COLORS.len())).collect();
    let texts = labels
        .iter()
        .map(|&c| {
            let noise = NOISE.choose(&mut r).unwrap();
            feature(TextPrefix::FeatureNode, "item", format!("{noise} {} thing", COLORS[c]))
        })
        .collect::<Vec<_>>();
    let edge_text = feature(TextPrefix::FeatureEdge, "connection", String::new());
    let edges = undirected(random_pairs(n, 2, &mut r), &edge_text);
    let mut g = TaGraph::from_texts(texts, edges, vec!["connection".into()]);
    g.directed = false;
    let samples = labels
        .iter()
        .enumerate()
        .map(|(v, &c)| Sample {
            target: vec![v],
            classes: vec![c],
            graph: 0,
        })
        .collect::<Vec<_>>();
    let classes = COLORS
        .iter()
        .map(|c| feature(TextPrefix::PromptNode, "item color", c.to_string()))
        .collect();
    let splits = random_splits(n, [0.8, 0.1, 0.1], seed);
    Dataset::new(
        manifest(
            "syn-colors",
            TaskLevel::Node,
            "prompt node. node classification of item color.",
            classes,
            "connection",
            splits,
        ),
        vec![g],
        samples,
    )
}

/// Link task: relation type between two typed entities (2 classes). People
/// know people and live in cities; the sampled pairs are edges of the graph.
pub fn typed_links(n: usize, pairs: usize, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, "synthetic-entities", 0);
    let city: Vec<bool> = (0..n).map(|v| v % 3 == 0).collect();
    let texts = (0..n)
        .map(|v| {
            let kind = if city[v] { "city" } else { "person" };
            feature(
                TextPrefix::FeatureNode,
                KG_NODE_DESC,
                format!("{kind} {}", NOISE[v % NOISE.len()]),
            )
        })
        .collect::<Vec<_>>();
    let rel_text = |rel: usize| feature(TextPrefix::FeatureEdge, KG_REL_DESC, RELATIONS[rel].to_string());
    let mut seen = std::collections::BTreeSet::new();
    let mut triples = Vec::new();
    let mut attempts = 0;
    while triples.len() < pairs && attempts < 100 * pairs {
        attempts += 1;
        let rel = triples.len() % 2;
        let a = r.gen_range(0..n);
        let b = r.gen_range(0..n);
        if a == b || city[a] || city[b] != (rel == 1) || !seen.insert((a.min(b), a.max(b))) {
            continue;
        }
        triples.push((a, rel, b));
    }
    let edges = triples
        .iter()
        .map(|&(a, rel, b)| EdgeRecord {
            src: a,
            dst: b,
            rel,
            text: rel_text(rel),
        })
        .collect();
    let g = TaGraph::from_texts(texts, edges, RELATIONS.iter().map(|s| s.to_string()).collect());
    let samples = triples
        .iter()
        .map(|&(a, rel, b)| Sample {
            target: vec![a, b],
            classes: vec![rel],
            graph: 0,
        })
        .collect::<Vec<_>>();
    let classes = RELATIONS
        .iter()
        .map(|rel| feature(TextPrefix::PromptNode, KG_REL_DESC, rel.to_string()))
        .collect();
    let splits = random_splits(samples.len(), [0.8, 0.1, 0.1], seed);
    let mut m = manifest("syn-entities", TaskLevel::Link, KG_TASK, classes, RELATIONS[0], splits);
    m.relation_texts = RELATIONS.iter().map(|s| s.to_string()).collect();
    m.directed = true;
    Dataset::new(m, vec![g], samples)
}

/// Graph task: which atom kind is in the majority (odd sizes, no ties).
pub fn majority_molecules(count: usize, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, "synthetic-molecules", 0);
    let bond = feature(TextPrefix::FeatureEdge, "chemical bond", "single".into());
    let mut graphs = Vec::with_capacity(count);
    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let n = [5, 7, 9][r.gen_range(0..3)];
        let major = i % 2;
        let share = r.gen_range(n / 2 + 1..=n);
        let mut kinds: Vec<usize> = (0..n).map(|j| if j < share { major } else { 1 - major }).collect();
        kinds.shuffle(&mut r);
        let texts = kinds
            .iter()
            .map(|&k| feature(TextPrefix::FeatureNode, "atom", ATOMS[k].to_string()));
        let chain = (1..n).map(|j| (r.gen_range(0..j), j));
        let mut g = TaGraph::from_texts(texts, undirected(chain, &bond), vec!["chemical bond".into()]);
        g.directed = false;
        graphs.push(g);
        samples.push(Sample {
            target: Vec::new(),
            classes: vec![major],
            graph: i,
        });
    }
    let classes = ATOMS
        .iter()
        .map(|a| {
            feature(
                TextPrefix::PromptNode,
                "molecule property description",
                format!("mostly made of {a}"),
            )
        })
        .collect();
    let splits = random_splits(count, [0.8, 0.1, 0.1], seed);
    Dataset::new(
        manifest(
            "syn-molecules",
            TaskLevel::Graph,
            "prompt node. graph classification on molecule properties.",
            classes,
            "chemical bond",
            splits,
        ),
        graphs,
        samples,
    )
}

/// The node, link and graph tasks of the joint training suite.
pub fn joint_suite(seed: u64) -> Vec<Dataset> {
    vec![
        color_nodes(150, rng::derive_seed(seed, "suite", 0)),
        typed_links(90, 200, rng::derive_seed(seed, "suite", 1)),
        majority_molecules(160, rng::derive_seed(seed, "suite", 2)),
    ]
}

/// Node task with `classes` topics of `words` random tokens each. A node's
/// text carries its topic's tokens and the class text repeats them. The label
/// split puts half of the topics in train and a quarter each in val and test.
pub fn zero_shot_matching(classes: usize, per_class: usize, words: usize, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, "synthetic-topics", 0);
    let topics: Vec<String> = (0..classes)
        .map(|_| {
            (0..words)
                .map(|_| format!("k{:05}", r.gen_range(0..100_000)))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let n = classes * per_class;
    let mut labels: Vec<usize> = (0..n).map(|v| v % classes).collect();
    labels.shuffle(&mut r);
    let texts = labels
        .iter()
        .map(|&c| feature(TextPrefix::FeatureNode, "topic", topics[c].clone()))
        .collect::<Vec<_>>();
    let edge_text = feature(TextPrefix::FeatureEdge, "reference", String::new());
    let edges = undirected(random_pairs(n, 1, &mut r), &edge_text);
    let mut g = TaGraph::from_texts(texts, edges, vec!["reference".into()]);
    g.directed = false;
    let samples = labels
        .iter()
        .enumerate()
        .map(|(v, &c)| Sample {
            target: vec![v],
            classes: vec![c],
            graph: 0,
        })
        .collect::<Vec<_>>();
    let class_texts = topics
        .iter()
        .map(|t| feature(TextPrefix::PromptNode, "topic", t.clone()))
        .collect();
    let all: Vec<usize> = (0..classes).collect();
    let (val, test) = (classes / 4, classes / 4);
    let label_splits = split_labels(&all, [classes - val - test, val, test], seed).expect("counts fit");
    let mut m = manifest(
        "syn-topics",
        TaskLevel::Node,
        "prompt node. node classification of topic.",
        class_texts,
        "reference",
        random_splits(n, [0.6, 0.2, 0.2], seed),
    );
    m.label_splits = Some(label_splits);
    Dataset::new(m, vec![g], samples)
}
