use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::subgraph::{Noi, NoiSubgraph};
use super::PromptRelation;
use crate::error::{Error, Result};
use crate::tag::{normalize_text, TaGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    Input,
    NoiPrompt,
    SupportPrompt,
    Class,
}

/// Relation of a prompted-graph edge. Input relations keep their source
/// graph's id; prompt relations live in a separate namespace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    Graph(usize),
    Prompt(PromptRelation),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptNode {
    pub key: String,
    pub role: NodeRole,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptEdge {
    pub src: usize,
    pub dst: usize,
    pub relation: Relation,
    pub key: String,
}

impl PromptEdge {
    pub fn prompt(src: usize, dst: usize, rel: PromptRelation) -> Self {
        Self {
            src,
            dst,
            relation: Relation::Prompt(rel),
            key: normalize_text(rel.text()),
        }
    }
}

/// How class scores are read off the processed graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Readout {
    /// One score per class node (`class_node_ids`).
    ClassNodes,
    /// No prompt graph: mean-pool the NOI nodes and pair the result with
    /// each class's text.
    Pooled {
        noi_nodes: Vec<usize>,
        task_key: String,
        class_keys: Vec<String>,
    },
}

/// An NOI subgraph (plus support subgraphs) joined with its prompt graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptedGraph {
    pub nodes: Vec<PromptNode>,
    pub edges: Vec<PromptEdge>,
    /// Texts of `Relation::Graph` ids.
    pub graph_relation_texts: Vec<String>,
    pub class_node_ids: Vec<usize>,
    pub query_prompt_node: Option<usize>,
    /// Support prompt nodes, `[class][shot]`.
    pub support_prompt_nodes: Vec<Vec<usize>>,
    /// Local ids of the query NOI nodes.
    pub query_noi_nodes: Vec<usize>,
    /// Local ids of each support's NOI nodes, `[class][shot]`.
    pub support_noi_nodes: Vec<Vec<Vec<usize>>>,
    pub task_key: String,
    pub class_keys: Vec<String>,
    pub readout: Readout,
    /// Nodes and edges copied from input subgraphs.
    pub num_input_nodes: usize,
    pub num_input_edges: usize,
    /// Leading prefix of the input block that belongs to the query subgraph.
    pub num_query_nodes: usize,
    pub num_query_edges: usize,
}

impl PromptedGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_classes(&self) -> usize {
        self.class_keys.len()
    }

    pub fn prompt_node_count(&self) -> usize {
        self.nodes.len() - self.num_input_nodes
    }

    pub fn prompt_edge_count(&self) -> usize {
        self.edges.len() - self.num_input_edges
    }

    pub fn relation_text(&self, rel: Relation) -> &str {
        match rel {
            Relation::Graph(r) => &self.graph_relation_texts[r],
            Relation::Prompt(p) => p.text(),
        }
    }

    pub fn node_feature_keys(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.key.as_str())
    }

    pub fn edge_feature_keys(&self) -> impl Iterator<Item = &str> {
        self.edges.iter().map(|e| e.key.as_str())
    }

    /// JSON-lines dump: one object per node, then one per edge.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, n) in self.nodes.iter().enumerate() {
            let line = json!({"type": "node", "id": i, "key": n.key, "role": n.role});
            writeln!(w, "{line}")?;
        }
        for e in &self.edges {
            let relation = match e.relation {
                Relation::Graph(r) => format!("graph:{r}"),
                Relation::Prompt(p) => p.short().to_string(),
            };
            let line = json!({"type": "edge", "src": e.src, "dst": e.dst, "relation": relation, "key": e.key});
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn dump_string(&self) -> String {
        let mut out = Vec::new();
        self.write_dump(&mut out).expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("dump is utf-8")
    }
}

/// A support example for one class: its graph, NOI subgraph and NOI.
#[derive(Debug, Clone, Copy)]
pub struct SupportExample<'a> {
    pub graph: &'a TaGraph,
    pub subgraph: &'a NoiSubgraph,
    pub noi: &'a Noi,
}

struct Builder {
    g: PromptedGraph,
}

impl Builder {
    fn new(relation_texts: &[String], task_text: &str, class_texts: &[String]) -> Self {
        Self {
            g: PromptedGraph {
                nodes: Vec::new(),
                edges: Vec::new(),
                graph_relation_texts: relation_texts.to_vec(),
                class_node_ids: Vec::new(),
                query_prompt_node: None,
                support_prompt_nodes: Vec::new(),
                query_noi_nodes: Vec::new(),
                support_noi_nodes: Vec::new(),
                task_key: normalize_text(task_text),
                class_keys: class_texts.iter().map(|t| normalize_text(t)).collect(),
                readout: Readout::ClassNodes,
                num_input_nodes: 0,
                num_input_edges: 0,
                num_query_nodes: 0,
                num_query_edges: 0,
            },
        }
    }

    /// Copies a subgraph; returns the local ids of `noi` in the prompted graph.
    fn add_input(&mut self, graph: &TaGraph, sub: &NoiSubgraph, noi: &Noi) -> Result<Vec<usize>> {
        if graph.relation_texts != self.g.graph_relation_texts {
            return Err(Error::Prompt(
                "support and query graphs use different relation vocabularies".into(),
            ));
        }
        let offset = self.g.nodes.len();
        let targets = noi
            .targets
            .iter()
            .map(|t| {
                sub.local(*t)
                    .map(|l| l + offset)
                    .ok_or_else(|| Error::Prompt(format!("NOI node {t} missing from its subgraph")))
            })
            .collect::<Result<Vec<_>>>()?;
        for &orig in &sub.nodes {
            self.g.nodes.push(PromptNode {
                key: normalize_text(&graph.nodes[orig].text),
                role: NodeRole::Input,
            });
        }
        for e in &sub.edges {
            self.g.edges.push(PromptEdge {
                src: e.src + offset,
                dst: e.dst + offset,
                relation: Relation::Graph(e.rel),
                key: normalize_text(&graph.edges[e.edge].text),
            });
        }
        Ok(targets)
    }

    fn add_node(&mut self, key: String, role: NodeRole) -> usize {
        self.g.nodes.push(PromptNode { key, role });
        self.g.nodes.len() - 1
    }

    fn add_edge(&mut self, src: usize, dst: usize, rel: PromptRelation) {
        self.g.edges.push(PromptEdge::prompt(src, dst, rel));
    }

    fn link_prompt(&mut self, targets: &[usize], prompt: usize) {
        for &t in targets {
            self.add_edge(t, prompt, PromptRelation::T2p);
            self.add_edge(prompt, t, PromptRelation::P2t);
        }
    }
}

/// Zero-shot prompted graph: the query subgraph, its NOI prompt node and
/// one class node per class text.
pub fn build_zero_shot(
    graph: &TaGraph,
    query: &NoiSubgraph,
    noi: &Noi,
    task_text: &str,
    class_texts: &[String],
) -> Result<PromptedGraph> {
    build_few_shot(graph, query, noi, &[], task_text, class_texts)
}

/// Few-shot prompted graph. `supports[i]` holds the K examples of class i;
/// an empty slice (or all-empty classes) builds the zero-shot graph.
pub fn build_few_shot(
    graph: &TaGraph,
    query: &NoiSubgraph,
    noi: &Noi,
    supports: &[Vec<SupportExample<'_>>],
    task_text: &str,
    class_texts: &[String],
) -> Result<PromptedGraph> {
    let n = class_texts.len();
    if n == 0 {
        return Err(Error::Prompt("at least one class is required".into()));
    }
    if noi.targets.is_empty() {
        return Err(Error::Prompt("empty NOI".into()));
    }
    let k = supports.first().map_or(0, Vec::len);
    if !supports.is_empty() {
        if supports.len() != n {
            return Err(Error::Prompt(format!(
                "supports given for {} classes, expected {n}",
                supports.len()
            )));
        }
        if let Some((i, s)) = supports.iter().enumerate().find(|(_, s)| s.len() != k) {
            return Err(Error::Prompt(format!(
                "ragged supports: class {i} has {} shots, class 0 has {k}",
                s.len()
            )));
        }
    }

    let mut b = Builder::new(&graph.relation_texts, task_text, class_texts);
    let query_targets = b.add_input(graph, query, noi)?;
    b.g.num_query_nodes = b.g.nodes.len();
    b.g.num_query_edges = b.g.edges.len();
    let mut support_targets = vec![Vec::with_capacity(k); if k > 0 { n } else { 0 }];
    if k > 0 {
        for (i, shots) in supports.iter().enumerate() {
            for s in shots {
                let t = b.add_input(s.graph, s.subgraph, s.noi)?;
                support_targets[i].push(t);
            }
        }
    }
    b.g.num_input_nodes = b.g.nodes.len();
    b.g.num_input_edges = b.g.edges.len();

    let task_key = b.g.task_key.clone();
    let pq = b.add_node(task_key.clone(), NodeRole::NoiPrompt);
    let support_prompts: Vec<Vec<usize>> = support_targets
        .iter()
        .map(|shots| {
            shots
                .iter()
                .map(|_| b.add_node(task_key.clone(), NodeRole::SupportPrompt))
                .collect()
        })
        .collect();
    let class_keys = b.g.class_keys.clone();
    let classes: Vec<usize> = class_keys
        .into_iter()
        .map(|key| b.add_node(key, NodeRole::Class))
        .collect();

    b.link_prompt(&query_targets, pq);
    for &c in &classes {
        b.add_edge(pq, c, PromptRelation::Q2c);
        b.add_edge(c, pq, PromptRelation::C2q);
    }
    for (i, shots) in support_targets.iter().enumerate() {
        for (s, targets) in shots.iter().enumerate() {
            b.link_prompt(targets, support_prompts[i][s]);
        }
    }
    for (i, prompts) in support_prompts.iter().enumerate() {
        for &p in prompts {
            b.add_edge(p, classes[i], PromptRelation::S2c);
        }
    }

    b.g.query_prompt_node = Some(pq);
    b.g.support_prompt_nodes = support_prompts;
    b.g.class_node_ids = classes;
    b.g.query_noi_nodes = query_targets;
    b.g.support_noi_nodes = support_targets;
    Ok(b.g)
}
