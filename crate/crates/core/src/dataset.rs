//! On-disk dataset layout and validation.
//!
//! A dataset directory holds `manifest.json` plus JSON-lines record files:
//! `nodes.jsonl` and `edges.jsonl` for node- and link-level datasets (one
//! shared graph), and `samples.jsonl` for every level. Graph-level samples
//! carry their own nodes and edges.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tag::{has_prefix, EdgeRecord, NodeRecord, TaGraph, TaskLevel, TextPrefix};

/// Sample indices of the three supervised splits.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    #[serde(default)]
    pub train: Vec<usize>,
    #[serde(default)]
    pub val: Vec<usize>,
    #[serde(default)]
    pub test: Vec<usize>,
}

/// Which part of a split to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SplitName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitName::Train),
            "val" => Ok(SplitName::Val),
            "test" => Ok(SplitName::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

impl Splits {
    pub fn get(&self, name: SplitName) -> &[usize] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Val => &self.val,
            SplitName::Test => &self.test,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub num_graphs: usize,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub num_classes: usize,
    pub num_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub task_level: TaskLevel,
    pub task_text: String,
    pub class_texts: Vec<String>,
    #[serde(default)]
    pub relation_texts: Vec<String>,
    #[serde(default)]
    pub splits: Splits,
    /// Per-class text of the "not this class" candidate, used by 2-way
    /// episodes over multi-label columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_class_texts: Option<Vec<String>>,
    /// Class-index partition for few-shot and zero-shot episodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_splits: Option<Splits>,
    #[serde(default = "default_directed")]
    pub directed: bool,
    #[serde(default)]
    pub stats: DatasetStats,
}

fn default_directed() -> bool {
    true
}

/// One supervised example: its NOI targets (empty for graph level, meaning
/// all nodes), its positive classes, and the graph it lives in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub target: Vec<usize>,
    pub classes: Vec<usize>,
    pub graph: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub graphs: Vec<TaGraph>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn name(&self) -> &str {
        &self.manifest.name
    }

    pub fn level(&self) -> TaskLevel {
        self.manifest.task_level
    }

    pub fn num_classes(&self) -> usize {
        self.manifest.class_texts.len()
    }

    pub fn graph_of(&self, sample: usize) -> &TaGraph {
        &self.graphs[self.samples[sample].graph]
    }

    /// True when some sample lists other than exactly one class.
    pub fn is_multi_label(&self) -> bool {
        self.samples.iter().any(|s| s.classes.len() != 1)
    }

    pub fn compute_stats(&self) -> DatasetStats {
        DatasetStats {
            num_graphs: self.graphs.len(),
            num_nodes: self.graphs.iter().map(TaGraph::num_nodes).sum(),
            num_edges: self.graphs.iter().map(TaGraph::num_edges).sum(),
            num_classes: self.manifest.class_texts.len(),
            num_samples: self.samples.len(),
        }
    }

    /// Assembles a dataset and refreshes its stats block.
    pub fn new(manifest: DatasetManifest, graphs: Vec<TaGraph>, samples: Vec<Sample>) -> Self {
        let mut ds = Self {
            manifest,
            graphs,
            samples,
        };
        ds.manifest.stats = ds.compute_stats();
        for g in &mut ds.graphs {
            g.relation_texts = ds.manifest.relation_texts.clone();
            g.directed = ds.manifest.directed;
        }
        ds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    EmptyGraph,
    NonDenseIds,
    DanglingEndpoint,
    UnknownRelation,
    EmptyText,
    MissingPrefix,
    EmptyClassTexts,
    SplitOverlap,
    BadSampleIndex,
    BadClassIndex,
    BadTarget,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::EmptyGraph => "empty graph",
            ViolationKind::NonDenseIds => "non-dense ids",
            ViolationKind::DanglingEndpoint => "dangling endpoint",
            ViolationKind::UnknownRelation => "unknown relation",
            ViolationKind::EmptyText => "empty text",
            ViolationKind::MissingPrefix => "missing prefix",
            ViolationKind::EmptyClassTexts => "empty class texts",
            ViolationKind::SplitOverlap => "split overlap",
            ViolationKind::BadSampleIndex => "bad sample index",
            ViolationKind::BadClassIndex => "bad class index",
            ViolationKind::BadTarget => "bad target",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    fn push(&mut self, kind: ViolationKind, message: String) {
        self.violations.push(Violation { kind, message });
    }
}

/// Checks every graph, manifest and sample invariant. Never fails; problems
/// become report entries.
pub fn validate_dataset(ds: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    let m = &ds.manifest;

    if m.class_texts.is_empty() {
        report.push(ViolationKind::EmptyClassTexts, "manifest lists no classes".into());
    }
    for (i, t) in m.class_texts.iter().enumerate() {
        if t.trim().is_empty() {
            report.push(ViolationKind::EmptyText, format!("class text {i} is empty"));
        }
    }
    if m.task_text.trim().is_empty() {
        report.push(ViolationKind::EmptyText, "task text is empty".into());
    }
    if let Some(neg) = &m.negative_class_texts {
        if neg.len() != m.class_texts.len() {
            report.push(
                ViolationKind::BadClassIndex,
                format!("{} negative class texts for {} classes", neg.len(), m.class_texts.len()),
            );
        }
    }
    if ds.graphs.is_empty() {
        report.push(ViolationKind::EmptyGraph, "dataset has no graphs".into());
    }

    for (gi, g) in ds.graphs.iter().enumerate() {
        validate_graph(g, gi, &mut report);
    }

    let nsamples = ds.samples.len();
    for (si, s) in ds.samples.iter().enumerate() {
        if s.graph >= ds.graphs.len() {
            report.push(
                ViolationKind::BadSampleIndex,
                format!("sample {si} refers to graph {}", s.graph),
            );
            continue;
        }
        let n = ds.graphs[s.graph].num_nodes();
        let want = match m.task_level {
            TaskLevel::Node => Some(1),
            TaskLevel::Link => Some(2),
            TaskLevel::Graph => None,
        };
        match want {
            Some(k) if s.target.len() != k => report.push(
                ViolationKind::BadTarget,
                format!(
                    "sample {si} has {} targets, {} level needs {k}",
                    s.target.len(),
                    m.task_level
                ),
            ),
            None if !s.target.is_empty() => report.push(
                ViolationKind::BadTarget,
                format!("graph-level sample {si} lists explicit targets"),
            ),
            _ => {}
        }
        if s.target.len() == 2 && s.target[0] == s.target[1] {
            report.push(ViolationKind::BadTarget, format!("sample {si} links a node to itself"));
        }
        for &t in &s.target {
            if t >= n {
                report.push(ViolationKind::BadTarget, format!("sample {si} targets node {t} of {n}"));
            }
        }
        for &c in &s.classes {
            if c >= m.class_texts.len() {
                report.push(
                    ViolationKind::BadClassIndex,
                    format!("sample {si} has class {c} of {}", m.class_texts.len()),
                );
            }
        }
    }

    let parts = [
        (SplitName::Train, &m.splits.train),
        (SplitName::Val, &m.splits.val),
        (SplitName::Test, &m.splits.test),
    ];
    for (name, idx) in parts {
        for &i in idx.iter() {
            if i >= nsamples {
                report.push(
                    ViolationKind::BadSampleIndex,
                    format!("{name} split index {i} of {nsamples} samples"),
                );
            }
        }
    }
    check_disjoint(&parts, "sample", &mut report);

    if let Some(ls) = &m.label_splits {
        let lparts = [
            (SplitName::Train, &ls.train),
            (SplitName::Val, &ls.val),
            (SplitName::Test, &ls.test),
        ];
        for (name, idx) in lparts {
            for &c in idx.iter() {
                if c >= m.class_texts.len() {
                    report.push(
                        ViolationKind::BadClassIndex,
                        format!("{name} label split has class {c}"),
                    );
                }
            }
        }
        check_disjoint(&lparts, "label", &mut report);
    }
    report
}

fn check_disjoint(parts: &[(SplitName, &Vec<usize>); 3], what: &str, report: &mut ValidationReport) {
    for a in 0..3 {
        for b in a + 1..3 {
            let sa: HashSet<usize> = parts[a].1.iter().copied().collect();
            let shared: BTreeSet<usize> = parts[b].1.iter().copied().filter(|i| sa.contains(i)).collect();
            if !shared.is_empty() {
                report.push(
                    ViolationKind::SplitOverlap,
                    format!(
                        "{} and {} {what} splits share {} indices (first {})",
                        parts[a].0,
                        parts[b].0,
                        shared.len(),
                        shared.iter().next().unwrap()
                    ),
                );
            }
        }
    }
}

fn validate_graph(g: &TaGraph, gi: usize, report: &mut ValidationReport) {
    if g.nodes.is_empty() {
        report.push(ViolationKind::EmptyGraph, format!("graph {gi} has no nodes"));
    }
    let n = g.nodes.len();
    for (i, node) in g.nodes.iter().enumerate() {
        if node.id != i {
            report.push(
                ViolationKind::NonDenseIds,
                format!("graph {gi}: position {i} holds node id {}", node.id),
            );
        }
        if node.text.trim().is_empty() {
            report.push(ViolationKind::EmptyText, format!("graph {gi}: node {i} has no text"));
        } else if !has_prefix(&node.text, TextPrefix::FeatureNode) {
            report.push(
                ViolationKind::MissingPrefix,
                format!("graph {gi}: node {i} text does not start with \"feature node.\""),
            );
        }
    }
    for (i, e) in g.edges.iter().enumerate() {
        if e.src >= n || e.dst >= n {
            report.push(
                ViolationKind::DanglingEndpoint,
                format!("graph {gi}: edge {i} ({} -> {}) with {n} nodes", e.src, e.dst),
            );
        }
        if e.rel >= g.relation_texts.len() {
            report.push(
                ViolationKind::UnknownRelation,
                format!(
                    "graph {gi}: edge {i} uses relation {} of {}",
                    e.rel,
                    g.relation_texts.len()
                ),
            );
        }
        if e.text.trim().is_empty() {
            report.push(ViolationKind::EmptyText, format!("graph {gi}: edge {i} has no text"));
        } else if !has_prefix(&e.text, TextPrefix::FeatureEdge) {
            report.push(
                ViolationKind::MissingPrefix,
                format!("graph {gi}: edge {i} text does not start with \"feature edge.\""),
            );
        }
    }
}

#[derive(Deserialize, Serialize)]
struct TargetSampleLine {
    target: Vec<usize>,
    classes: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NodeEntry {
    Text(String),
    Record(NodeRecord),
}

#[derive(Deserialize)]
struct GraphSampleLine {
    nodes: Vec<NodeEntry>,
    #[serde(default)]
    edges: Vec<EdgeRecord>,
    classes: Vec<usize>,
}

#[derive(Serialize)]
struct GraphSampleOut<'a> {
    nodes: &'a [NodeRecord],
    edges: &'a [EdgeRecord],
    classes: &'a [usize],
}

fn read_jsonl<T, F>(path: &Path, mut each: F) -> Result<usize>
where
    T: for<'de> Deserialize<'de>,
    F: FnMut(usize, T) -> Result<()>,
{
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let fname = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut count = 0;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            file: fname.clone(),
            line: i + 1,
            message: e.to_string(),
        })?;
        each(i + 1, record)?;
        count += 1;
    }
    Ok(count)
}

fn dense_nodes(mut records: Vec<(usize, NodeRecord)>, file: &str) -> Result<Vec<NodeRecord>> {
    records.sort_by_key(|(_, r)| r.id);
    for (pos, (line, r)) in records.iter().enumerate() {
        if r.id != pos {
            return Err(Error::Malformed {
                file: file.to_string(),
                line: *line,
                message: format!("node ids must be dense 0..n-1; expected {pos}, found {}", r.id),
            });
        }
    }
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

fn check_edges(edges: &[(usize, EdgeRecord)], n: usize, nrel: usize, file: &str) -> Result<()> {
    for (line, e) in edges {
        if e.src >= n || e.dst >= n {
            return Err(Error::Malformed {
                file: file.to_string(),
                line: *line,
                message: format!("dangling endpoint {} -> {} with {n} nodes", e.src, e.dst),
            });
        }
        if e.rel >= nrel {
            return Err(Error::Malformed {
                file: file.to_string(),
                line: *line,
                message: format!("relation {} of {nrel}", e.rel),
            });
        }
    }
    Ok(())
}

/// Loads and validates a dataset directory.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("manifest.json");
    let raw = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&raw).map_err(|e| Error::Malformed {
        file: "manifest.json".into(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let nrel = manifest.relation_texts.len();

    let mut graphs = Vec::new();
    let mut samples = Vec::new();
    match manifest.task_level {
        TaskLevel::Node | TaskLevel::Link => {
            let mut nodes = Vec::new();
            read_jsonl(&dir.join("nodes.jsonl"), |line, r: NodeRecord| {
                nodes.push((line, r));
                Ok(())
            })?;
            if nodes.is_empty() {
                return Err(Error::InvalidDataset("nodes.jsonl holds no nodes".into()));
            }
            let nodes = dense_nodes(nodes, "nodes.jsonl")?;
            let mut edges = Vec::new();
            let edges_path = dir.join("edges.jsonl");
            if edges_path.exists() {
                read_jsonl(&edges_path, |line, r: EdgeRecord| {
                    edges.push((line, r));
                    Ok(())
                })?;
            }
            check_edges(&edges, nodes.len(), nrel, "edges.jsonl")?;
            graphs.push(TaGraph {
                nodes,
                edges: edges.into_iter().map(|(_, e)| e).collect(),
                relation_texts: manifest.relation_texts.clone(),
                directed: manifest.directed,
            });
            read_jsonl(&dir.join("samples.jsonl"), |_, r: TargetSampleLine| {
                samples.push(Sample {
                    target: r.target,
                    classes: r.classes,
                    graph: 0,
                });
                Ok(())
            })?;
        }
        TaskLevel::Graph => {
            read_jsonl(&dir.join("samples.jsonl"), |line, r: GraphSampleLine| {
                let recs = r
                    .nodes
                    .into_iter()
                    .enumerate()
                    .map(|(i, e)| match e {
                        NodeEntry::Text(text) => (line, NodeRecord { id: i, text }),
                        NodeEntry::Record(rec) => (line, rec),
                    })
                    .collect::<Vec<_>>();
                if recs.is_empty() {
                    return Err(Error::Malformed {
                        file: "samples.jsonl".into(),
                        line,
                        message: "graph sample without nodes".into(),
                    });
                }
                let nodes = dense_nodes(recs, "samples.jsonl")?;
                let edges: Vec<_> = r.edges.into_iter().map(|e| (line, e)).collect();
                check_edges(&edges, nodes.len(), nrel, "samples.jsonl")?;
                samples.push(Sample {
                    target: Vec::new(),
                    classes: r.classes,
                    graph: graphs.len(),
                });
                graphs.push(TaGraph {
                    nodes,
                    edges: edges.into_iter().map(|(_, e)| e).collect(),
                    relation_texts: manifest.relation_texts.clone(),
                    directed: manifest.directed,
                });
                Ok(())
            })?;
        }
    }

    let ds = Dataset::new(manifest, graphs, samples);
    let report = validate_dataset(&ds);
    if !report.is_ok() {
        let shown: Vec<String> = report.violations.iter().take(5).map(|v| v.to_string()).collect();
        return Err(Error::InvalidDataset(format!(
            "{} violation(s): {}",
            report.violations.len(),
            shown.join("; ")
        )));
    }
    Ok(ds)
}

fn write_lines<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a dataset in the directory layout read by [`load_dataset`].
pub fn save_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = ds.manifest.clone();
    manifest.stats = ds.compute_stats();
    let manifest_path = dir.join("manifest.json");
    let mut body = serde_json::to_string_pretty(&manifest)?;
    body.push('\n');
    fs::write(&manifest_path, body).map_err(|e| Error::io(&manifest_path, e))?;

    match manifest.task_level {
        TaskLevel::Node | TaskLevel::Link => {
            let g = ds
                .graphs
                .first()
                .ok_or_else(|| Error::InvalidDataset("no graph to save".into()))?;
            write_lines(&dir.join("nodes.jsonl"), &g.nodes)?;
            write_lines(&dir.join("edges.jsonl"), &g.edges)?;
            write_lines(
                &dir.join("samples.jsonl"),
                ds.samples.iter().map(|s| TargetSampleLine {
                    target: s.target.clone(),
                    classes: s.classes.clone(),
                }),
            )?;
        }
        TaskLevel::Graph => {
            write_lines(
                &dir.join("samples.jsonl"),
                ds.samples.iter().map(|s| {
                    let g = &ds.graphs[s.graph];
                    GraphSampleOut {
                        nodes: &g.nodes,
                        edges: &g.edges,
                        classes: &s.classes,
                    }
                }),
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy_manifest(level: TaskLevel) -> DatasetManifest {
        DatasetManifest {
            name: "toy".into(),
            task_level: level,
            task_text: "prompt node. node classification of toy category.".into(),
            class_texts: vec!["prompt node. red".into(), "prompt node. blue".into()],
            relation_texts: vec!["link".into()],
            splits: Splits {
                train: vec![0],
                val: vec![1],
                test: vec![2],
            },
            negative_class_texts: None,
            label_splits: None,
            directed: true,
            stats: DatasetStats::default(),
        }
    }

    fn toy_node_dataset() -> Dataset {
        let g = TaGraph::from_texts(
            (0..3).map(|i| format!("feature node. item: {i}")),
            vec![
                EdgeRecord {
                    src: 0,
                    dst: 1,
                    rel: 0,
                    text: "feature edge. link".into(),
                },
                EdgeRecord {
                    src: 1,
                    dst: 0,
                    rel: 0,
                    text: "feature edge. link".into(),
                },
            ],
            vec!["link".into()],
        );
        let samples = (0..3)
            .map(|i| Sample {
                target: vec![i],
                classes: vec![i % 2],
                graph: 0,
            })
            .collect();
        Dataset::new(toy_manifest(TaskLevel::Node), vec![g], samples)
    }

    #[test]
    fn valid_toy_has_no_violations() {
        assert!(validate_dataset(&toy_node_dataset()).is_ok());
    }

    #[test]
    fn dangling_edge_is_one_violation() {
        let mut ds = toy_node_dataset();
        ds.graphs[0].edges.push(EdgeRecord {
            src: 0,
            dst: 3,
            rel: 0,
            text: "feature edge. link".into(),
        });
        let r = validate_dataset(&ds);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].kind, ViolationKind::DanglingEndpoint);
        assert_eq!(r.violations[0].kind.as_str(), "dangling endpoint");
    }

    #[test]
    fn split_overlap_is_reported() {
        let mut ds = toy_node_dataset();
        ds.manifest.splits.test.push(0);
        let r = validate_dataset(&ds);
        assert_eq!(r.count(ViolationKind::SplitOverlap), 1);
        assert_eq!(r.violations.len(), 1);
    }

    #[test]
    fn round_trip_node_and_graph_levels() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy_node_dataset();
        save_dataset(&ds, dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), ds);

        let graphs = vec![
            TaGraph::from_texts(
                vec!["feature node. atom: c".into(), "feature node. atom: o".into()],
                vec![EdgeRecord {
                    src: 0,
                    dst: 1,
                    rel: 0,
                    text: "feature edge. bond".into(),
                }],
                vec!["link".into()],
            ),
            TaGraph::from_texts(vec!["feature node. atom: n".into()], vec![], vec!["link".into()]),
        ];
        let samples = vec![
            Sample {
                target: vec![],
                classes: vec![0, 1],
                graph: 0,
            },
            Sample {
                target: vec![],
                classes: vec![],
                graph: 1,
            },
        ];
        let mut m = toy_manifest(TaskLevel::Graph);
        m.splits = Splits {
            train: vec![0],
            val: vec![],
            test: vec![1],
        };
        let ds = Dataset::new(m, graphs, samples);
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), ds);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy_node_dataset();
        save_dataset(&ds, dir.path()).unwrap();

        fs::write(dir.path().join("nodes.jsonl"), "").unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::InvalidDataset(_))));

        fs::write(
            dir.path().join("nodes.jsonl"),
            "{\"id\":0,\"text\":\"feature node. a\"}\n{\"id\":1,\"text\":\n",
        )
        .unwrap();
        match load_dataset(dir.path()) {
            Err(Error::Malformed { line, file, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(file, "nodes.jsonl");
            }
            other => panic!("expected malformed, got {other:?}"),
        }

        fs::write(
            dir.path().join("nodes.jsonl"),
            "{\"id\":0,\"text\":\"feature node. a\"}\n",
        )
        .unwrap();
        fs::write(
            dir.path().join("edges.jsonl"),
            "{\"src\":0,\"dst\":1,\"rel\":0,\"text\":\"feature edge. x\"}\n",
        )
        .unwrap();
        let err = load_dataset(dir.path()).unwrap_err().to_string();
        assert!(err.contains("dangling endpoint"), "{err}");
    }

    #[test]
    fn single_node_graph_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let g = TaGraph::from_texts(vec!["feature node. lonely".into()], vec![], vec![]);
        let mut m = toy_manifest(TaskLevel::Node);
        m.relation_texts.clear();
        m.splits = Splits {
            train: vec![0],
            val: vec![],
            test: vec![],
        };
        let ds = Dataset::new(
            m,
            vec![g],
            vec![Sample {
                target: vec![0],
                classes: vec![1],
                graph: 0,
            }],
        );
        save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.graphs[0].num_nodes(), 1);
        assert_eq!(back.graphs[0].num_edges(), 0);
    }
}
