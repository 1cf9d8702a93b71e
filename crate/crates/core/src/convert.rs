//! Converters from raw graph sources to the dataset layout.
//!
//! Each family renders its texts through fixed templates:
//!
//! * `generic-jsonl`: an already rendered dataset directory, copied through.
//! * `cora-like`: `papers.jsonl` (`id`, `title`, `abstract`, `label`),
//!   `citations.tsv` (`citing<TAB>cited`) and optionally `categories.jsonl`
//!   (`name`, `description`). Node classification, or link prediction with
//!   [`ConvertOptions::link`].
//! * `kg-triples`: `train.tsv`, `valid.tsv`, `test.tsv` with
//!   `head<TAB>relation<TAB>tail` rows and optionally `entities.tsv`
//!   (`id<TAB>name<TAB>description`). The graph holds the train triples;
//!   every triple is a relation-type sample.
//! * `molecule-pretext`: `tasks.jsonl` (`description`, optional `negative`)
//!   and `molecules.jsonl` (`atoms`, `bonds`, `labels`, optional `split`)
//!   with atom and bond descriptions already rendered as text.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_dataset, save_dataset, Dataset, DatasetManifest, DatasetStats, Sample, Splits};
use crate::error::{Error, Result};
use crate::rng;
use crate::tag::{has_prefix, EdgeRecord, TaGraph, TaskLevel, TextPrefix, TextTemplate};
use crate::tasks::sample_link_negatives;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvertFormat {
    GenericJsonl,
    CoraLike,
    KgTriples,
    MoleculePretext,
}

impl ConvertFormat {
    pub const ALL: [ConvertFormat; 4] = [
        ConvertFormat::GenericJsonl,
        ConvertFormat::CoraLike,
        ConvertFormat::KgTriples,
        ConvertFormat::MoleculePretext,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConvertFormat::GenericJsonl => "generic-jsonl",
            ConvertFormat::CoraLike => "cora-like",
            ConvertFormat::KgTriples => "kg-triples",
            ConvertFormat::MoleculePretext => "molecule-pretext",
        }
    }
}

impl fmt::Display for ConvertFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ConvertFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Convert(format!("unknown format {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvertOptions {
    /// Dataset name; defaults to the input directory name.
    pub name: Option<String>,
    pub seed: u64,
    /// Train/val/test fractions for families without given splits.
    pub split_ratios: [f64; 3],
    /// cora-like: emit the co-citation link task instead of node labels.
    pub link: bool,
    /// Negatives per positive pair for link tasks.
    pub negative_ratio: usize,
}

impl Default for ConvertOptions {
    fn default() -> Self {
        Self {
            name: None,
            seed: 0,
            split_ratios: [0.6, 0.2, 0.2],
            link: false,
            negative_ratio: 1,
        }
    }
}

/// Converts `input` and writes the dataset directory `output`.
pub fn convert(format: ConvertFormat, input: &Path, output: &Path, opts: &ConvertOptions) -> Result<Dataset> {
    let ds = convert_dir(format, input, opts)?;
    save_dataset(&ds, output)?;
    Ok(ds)
}

/// Converts `input` in memory.
pub fn convert_dir(format: ConvertFormat, input: &Path, opts: &ConvertOptions) -> Result<Dataset> {
    let sum: f64 = opts.split_ratios.iter().sum();
    if opts.split_ratios.iter().any(|r| r.is_nan() || *r < 0.0) || sum > 1.0 + 1e-9 {
        return Err(Error::Convert(format!("bad split ratios {:?}", opts.split_ratios)));
    }
    let ds = match format {
        ConvertFormat::GenericJsonl => load_dataset(input)?,
        ConvertFormat::CoraLike => cora_like(input, opts)?,
        ConvertFormat::KgTriples => kg_triples(input, opts)?,
        ConvertFormat::MoleculePretext => molecule_pretext(input, opts)?,
    };
    let report = crate::dataset::validate_dataset(&ds);
    if !report.is_ok() {
        return Err(Error::Convert(format!(
            "converted dataset is invalid: {}",
            report.violations[0]
        )));
    }
    Ok(ds)
}

fn dataset_name(input: &Path, opts: &ConvertOptions) -> String {
    opts.name.clone().unwrap_or_else(|| {
        input
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    })
}

fn malformed(file: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Malformed {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

fn open_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>> {
    let name = file_label(path);
    open_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            serde_json::from_str(&text)
                .map(|r| (line, r))
                .map_err(|e| malformed(&name, line, e.to_string()))
        })
        .collect()
}

fn tsv(path: &Path, columns: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let name = file_label(path);
    open_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            let cols: Vec<String> = text.split('\t').map(|c| c.trim().to_string()).collect();
            if cols.len() != columns || cols.iter().any(String::is_empty) {
                return Err(malformed(
                    &name,
                    line,
                    format!(
                        "expected {columns} tab-separated nonempty columns, found {}",
                        cols.len()
                    ),
                ));
            }
            Ok((line, cols))
        })
        .collect()
}

/// Shuffled split of `0..n` by fractions; the remainder after train and val
/// goes to test.
pub fn random_splits(n: usize, ratios: [f64; 3], seed: u64) -> Splits {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "convert-split", 0));
    let count = |r: f64, left: usize| ((r * n as f64).round() as usize).min(left);
    let train = count(ratios[0], n);
    let val = count(ratios[1], n - train);
    let test = if (ratios.iter().sum::<f64>() - 1.0).abs() < 1e-9 {
        n - train - val
    } else {
        count(ratios[2], n - train - val)
    };
    let take = |k: usize, off: usize| {
        let mut v = order[off..off + k].to_vec();
        v.sort_unstable();
        v
    };
    Splits {
        train: take(train, 0),
        val: take(val, train),
        test: take(test, train + val),
    }
}

fn join_sentence(head: &str, tail: &str) -> String {
    let (head, tail) = (head.trim(), tail.trim());
    match (head.is_empty(), tail.is_empty()) {
        (false, false) => format!("{head}. {tail}"),
        (false, true) => head.to_string(),
        _ => tail.to_string(),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawId {
    Text(String),
    Number(i64),
}

impl RawId {
    fn into_string(self) -> String {
        match self {
            RawId::Text(s) => s,
            RawId::Number(n) => n.to_string(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PaperRow {
    id: RawId,
    #[serde(default)]
    title: String,
    #[serde(default, rename = "abstract")]
    abstract_: String,
    #[serde(default)]
    label: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CategoryRow {
    name: String,
    #[serde(default)]
    description: String,
}

pub const CORA_NODE_DESC: &str = "literature category and description";
pub const CORA_EDGE: &str = "co-citation";
pub const CORA_TASK: &str = "prompt node. node classification of literature category.";
pub const CORA_LINK_TASK: &str = "prompt node. link prediction on the papers that are cited together";
pub const CORA_LINK_CLASSES: [&str; 2] = [
    "prompt node. two papers do not have co-citation",
    "prompt node. two papers have co-citation",
];

fn cora_like(input: &Path, opts: &ConvertOptions) -> Result<Dataset> {
    let papers: Vec<(usize, PaperRow)> = jsonl(&input.join("papers.jsonl"))?;
    if papers.is_empty() {
        return Err(Error::Convert("papers.jsonl holds no papers".into()));
    }
    let cat_path = input.join("categories.jsonl");
    let categories: Vec<CategoryRow> = if cat_path.exists() {
        jsonl(&cat_path)?.into_iter().map(|(_, c)| c).collect()
    } else {
        let names: BTreeSet<String> = papers.iter().filter_map(|(_, p)| p.label.clone()).collect();
        names
            .into_iter()
            .map(|name| CategoryRow {
                name,
                description: String::new(),
            })
            .collect()
    };
    let class_of: HashMap<&str, usize> = categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.as_str(), i))
        .collect();

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut texts = Vec::with_capacity(papers.len());
    let mut labels = Vec::with_capacity(papers.len());
    for (line, p) in papers {
        let id = p.id.into_string();
        if index.insert(id.clone(), texts.len()).is_some() {
            return Err(malformed("papers.jsonl", line, format!("duplicate paper id {id:?}")));
        }
        let text = TextTemplate::new(TextPrefix::FeatureNode)
            .part(CORA_NODE_DESC, join_sentence(&p.title, &p.abstract_))
            .render()
            .map_err(|e| malformed("papers.jsonl", line, e.to_string()))?;
        texts.push(text);
        let label = match p.label {
            Some(l) => Some(
                *class_of
                    .get(l.as_str())
                    .ok_or_else(|| malformed("papers.jsonl", line, format!("unknown category {l:?}")))?,
            ),
            None => None,
        };
        labels.push(label);
    }

    let mut pairs = BTreeSet::new();
    for (line, cols) in tsv(&input.join("citations.tsv"), 2)? {
        let end = |c: &str| {
            index
                .get(c)
                .copied()
                .ok_or_else(|| malformed("citations.tsv", line, format!("unknown paper id {c:?}")))
        };
        let (a, b) = (end(&cols[0])?, end(&cols[1])?);
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let edge_text = TextTemplate::new(TextPrefix::FeatureEdge)
        .part(CORA_EDGE, "")
        .render()?;
    let edges: Vec<EdgeRecord> = pairs
        .iter()
        .flat_map(|&(a, b)| [(a, b), (b, a)])
        .map(|(src, dst)| EdgeRecord {
            src,
            dst,
            rel: 0,
            text: edge_text.clone(),
        })
        .collect();
    let mut graph = TaGraph::from_texts(texts, edges, vec![CORA_EDGE.to_string()]);
    graph.directed = false;

    let name = dataset_name(input, opts);
    let (level, task_text, class_texts, samples, name) = if opts.link {
        let positives: Vec<(usize, usize)> = pairs.iter().copied().collect();
        let labeled = sample_link_negatives(&graph, &positives, opts.negative_ratio, opts.seed)?;
        let samples: Vec<Sample> = labeled
            .into_iter()
            .map(|(a, b, c)| Sample {
                target: vec![a, b],
                classes: vec![c],
                graph: 0,
            })
            .collect();
        let classes = CORA_LINK_CLASSES.iter().map(|s| s.to_string()).collect();
        (
            TaskLevel::Link,
            CORA_LINK_TASK.to_string(),
            classes,
            samples,
            format!("{name}-link"),
        )
    } else {
        let samples: Vec<Sample> = labels
            .iter()
            .enumerate()
            .filter_map(|(v, l)| {
                l.map(|c| Sample {
                    target: vec![v],
                    classes: vec![c],
                    graph: 0,
                })
            })
            .collect();
        let classes = categories
            .iter()
            .map(|c| {
                TextTemplate::new(TextPrefix::PromptNode)
                    .part(CORA_NODE_DESC, join_sentence(&c.name, &c.description))
                    .render()
            })
            .collect::<Result<Vec<_>>>()?;
        (TaskLevel::Node, CORA_TASK.to_string(), classes, samples, name)
    };
    if samples.is_empty() {
        return Err(Error::Convert("no labeled papers".into()));
    }
    let splits = random_splits(samples.len(), opts.split_ratios, opts.seed);
    let manifest = DatasetManifest {
        name,
        task_level: level,
        task_text,
        class_texts,
        relation_texts: graph.relation_texts.clone(),
        splits,
        negative_class_texts: None,
        label_splits: None,
        directed: false,
        stats: DatasetStats::default(),
    };
    Ok(Dataset::new(manifest, vec![graph], samples))
}

pub const KG_NODE_DESC: &str = "entity and entity description";
pub const KG_REL_DESC: &str = "relation between two entities";
pub const KG_TASK: &str = "prompt node. relation type prediction between the connected entities.";

fn kg_file(input: &Path, names: &[&str]) -> Result<std::path::PathBuf> {
    names
        .iter()
        .map(|n| input.join(n))
        .find(|p| p.exists())
        .ok_or_else(|| Error::Convert(format!("{} missing from {}", names[0], input.display())))
}

fn kg_triples(input: &Path, opts: &ConvertOptions) -> Result<Dataset> {
    let files = [
        kg_file(input, &["train.tsv", "train.txt"])?,
        kg_file(input, &["valid.tsv", "val.tsv", "valid.txt"])?,
        kg_file(input, &["test.tsv", "test.txt"])?,
    ];
    let mut entity_ix: HashMap<String, usize> = HashMap::new();
    let mut entities: Vec<(String, String)> = Vec::new();
    let ent_path = input.join("entities.tsv");
    let fixed_entities = ent_path.exists();
    if fixed_entities {
        for (line, mut cols) in tsv_flexible(&ent_path, 2, 3)? {
            let desc = if cols.len() == 3 {
                cols.pop().unwrap()
            } else {
                String::new()
            };
            let name = cols.pop().unwrap();
            let id = cols.pop().unwrap();
            if entity_ix.insert(id.clone(), entities.len()).is_some() {
                return Err(malformed("entities.tsv", line, format!("duplicate entity {id:?}")));
            }
            entities.push((name, desc));
        }
    }

    let mut rel_ix: HashMap<String, usize> = HashMap::new();
    let mut relations: Vec<String> = Vec::new();
    let mut parts: Vec<Vec<(usize, usize, usize)>> = Vec::new();
    for path in &files {
        let label = file_label(path);
        let mut triples = Vec::new();
        for (line, cols) in tsv(path, 3)? {
            let mut entity = |id: &str| -> Result<usize> {
                if let Some(&i) = entity_ix.get(id) {
                    return Ok(i);
                }
                if fixed_entities {
                    return Err(malformed(&label, line, format!("entity {id:?} not in entities.tsv")));
                }
                entity_ix.insert(id.to_string(), entities.len());
                entities.push((id.to_string(), String::new()));
                Ok(entities.len() - 1)
            };
            let h = entity(&cols[0])?;
            let t = entity(&cols[2])?;
            let r = *rel_ix.entry(cols[1].clone()).or_insert_with(|| {
                relations.push(cols[1].clone());
                relations.len() - 1
            });
            triples.push((h, r, t));
        }
        parts.push(triples);
    }
    if parts[0].is_empty() {
        return Err(Error::Convert("no train triples".into()));
    }

    let node_texts = entities
        .iter()
        .map(|(name, desc)| {
            TextTemplate::new(TextPrefix::FeatureNode)
                .part(KG_NODE_DESC, join_sentence(name, desc))
                .render()
        })
        .collect::<Result<Vec<_>>>()?;
    let edge_texts = relations
        .iter()
        .map(|r| {
            TextTemplate::new(TextPrefix::FeatureEdge)
                .part(KG_REL_DESC, r.as_str())
                .render()
        })
        .collect::<Result<Vec<_>>>()?;
    let edges = parts[0]
        .iter()
        .map(|&(h, r, t)| EdgeRecord {
            src: h,
            dst: t,
            rel: r,
            text: edge_texts[r].clone(),
        })
        .collect();
    let graph = TaGraph::from_texts(node_texts, edges, relations.clone());

    let mut samples = Vec::new();
    let mut splits = Splits::default();
    for (p, triples) in parts.iter().enumerate() {
        for &(h, r, t) in triples {
            let part = match p {
                0 => &mut splits.train,
                1 => &mut splits.val,
                _ => &mut splits.test,
            };
            part.push(samples.len());
            samples.push(Sample {
                target: vec![h, t],
                classes: vec![r],
                graph: 0,
            });
        }
    }
    let class_texts = relations
        .iter()
        .map(|r| {
            TextTemplate::new(TextPrefix::PromptNode)
                .part(KG_REL_DESC, r.as_str())
                .render()
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        name: dataset_name(input, opts),
        task_level: TaskLevel::Link,
        task_text: KG_TASK.to_string(),
        class_texts,
        relation_texts: relations,
        splits,
        negative_class_texts: None,
        label_splits: None,
        directed: true,
        stats: DatasetStats::default(),
    };
    Ok(Dataset::new(manifest, vec![graph], samples))
}

fn tsv_flexible(path: &Path, min: usize, max: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let name = file_label(path);
    open_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            let cols: Vec<String> = text.split('\t').map(|c| c.trim().to_string()).collect();
            if cols.len() < min || cols.len() > max || cols[0].is_empty() {
                return Err(malformed(
                    &name,
                    line,
                    format!("expected {min} to {max} tab-separated columns"),
                ));
            }
            Ok((line, cols))
        })
        .collect()
}

pub const MOL_ATOM_DESC: &str = "atom";
pub const MOL_BOND_DESC: &str = "chemical bond";
pub const MOL_CLASS_DESC: &str = "molecule property description";
pub const MOL_TASK: &str = "prompt node. graph classification on molecule properties.";

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskRow {
    description: String,
    #[serde(default)]
    negative: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BondRow {
    Tuple(usize, usize, String),
    Record { src: usize, dst: usize, text: String },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LabelValue {
    Flag(bool),
    Number(f64),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MoleculeRow {
    atoms: Vec<String>,
    #[serde(default)]
    bonds: Vec<BondRow>,
    labels: Vec<Option<LabelValue>>,
    #[serde(default)]
    split: Option<String>,
}

fn feature_text(prefix: TextPrefix, desc: &str, text: &str) -> Result<String> {
    if has_prefix(text, prefix) {
        Ok(text.to_string())
    } else {
        TextTemplate::new(prefix).part(desc, text).render()
    }
}

fn molecule_pretext(input: &Path, opts: &ConvertOptions) -> Result<Dataset> {
    let tasks: Vec<(usize, TaskRow)> = jsonl(&input.join("tasks.jsonl"))?;
    if tasks.is_empty() {
        return Err(Error::Convert("tasks.jsonl holds no tasks".into()));
    }
    let with_negative = tasks.iter().filter(|(_, t)| t.negative.is_some()).count();
    if with_negative != 0 && with_negative != tasks.len() {
        let (line, _) = tasks.iter().find(|(_, t)| t.negative.is_none()).unwrap();
        return Err(malformed(
            "tasks.jsonl",
            *line,
            "negative text missing while other tasks have one",
        ));
    }
    let class_text = |d: &str| {
        TextTemplate::new(TextPrefix::PromptNode)
            .part(MOL_CLASS_DESC, d)
            .render()
    };
    let class_texts = tasks
        .iter()
        .map(|(_, t)| class_text(&t.description))
        .collect::<Result<Vec<_>>>()?;
    let negative_class_texts = if with_negative > 0 {
        Some(
            tasks
                .iter()
                .map(|(_, t)| class_text(t.negative.as_deref().unwrap()))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };

    let rows: Vec<(usize, MoleculeRow)> = jsonl(&input.join("molecules.jsonl"))?;
    let mut graphs = Vec::with_capacity(rows.len());
    let mut samples = Vec::with_capacity(rows.len());
    let mut given = Splits::default();
    let mut all_given = true;
    let bad = |line: usize, m: String| malformed("molecules.jsonl", line, m);
    for (g, (line, row)) in rows.into_iter().enumerate() {
        if row.atoms.is_empty() {
            return Err(bad(line, "molecule without atoms".into()));
        }
        if row.labels.len() != tasks.len() {
            return Err(bad(
                line,
                format!("{} labels for {} tasks", row.labels.len(), tasks.len()),
            ));
        }
        let n = row.atoms.len();
        let atoms = row
            .atoms
            .iter()
            .map(|a| feature_text(TextPrefix::FeatureNode, MOL_ATOM_DESC, a))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| bad(line, e.to_string()))?;
        let mut edges = Vec::with_capacity(row.bonds.len() * 2);
        for b in row.bonds {
            let (src, dst, text) = match b {
                BondRow::Tuple(s, d, t) => (s, d, t),
                BondRow::Record { src, dst, text } => (src, dst, text),
            };
            if src >= n || dst >= n {
                return Err(bad(line, format!("bond {src}-{dst} outside {n} atoms")));
            }
            let text =
                feature_text(TextPrefix::FeatureEdge, MOL_BOND_DESC, &text).map_err(|e| bad(line, e.to_string()))?;
            for (s, d) in [(src, dst), (dst, src)] {
                edges.push(EdgeRecord {
                    src: s,
                    dst: d,
                    rel: 0,
                    text: text.clone(),
                });
            }
        }
        let mut graph = TaGraph::from_texts(atoms, edges, vec![MOL_BOND_DESC.to_string()]);
        graph.directed = false;
        graphs.push(graph);
        let mut classes = Vec::new();
        for (c, l) in row.labels.iter().enumerate() {
            let positive = match l {
                None => false,
                Some(LabelValue::Flag(f)) => *f,
                Some(LabelValue::Number(v)) if *v == 0.0 || *v == 1.0 => *v == 1.0,
                Some(LabelValue::Number(v)) => return Err(bad(line, format!("label {v} is not 0 or 1"))),
            };
            if positive {
                classes.push(c);
            }
        }
        samples.push(Sample {
            target: Vec::new(),
            classes,
            graph: g,
        });
        match row.split.as_deref() {
            Some("train") => given.train.push(g),
            Some("val") | Some("valid") => given.val.push(g),
            Some("test") => given.test.push(g),
            Some(other) => return Err(bad(line, format!("unknown split {other:?}"))),
            None => all_given = false,
        }
    }
    if samples.is_empty() {
        return Err(Error::Convert("molecules.jsonl holds no molecules".into()));
    }
    let splits = if all_given {
        given
    } else {
        random_splits(samples.len(), opts.split_ratios, opts.seed)
    };
    let manifest = DatasetManifest {
        name: dataset_name(input, opts),
        task_level: TaskLevel::Graph,
        task_text: MOL_TASK.to_string(),
        class_texts,
        relation_texts: vec![MOL_BOND_DESC.to_string()],
        splits,
        negative_class_texts,
        label_splits: None,
        directed: false,
        stats: DatasetStats::default(),
    };
    Ok(Dataset::new(manifest, graphs, samples))
}
