//! Text-attributed graphs and the text feature protocol.
//!
//! Every node, edge and relation of a [`TaGraph`] carries a sentence. Input
//! node sentences start with `feature node.`, input edge sentences with
//! `feature edge.`, and everything added by prompting with `prompt node.` or
//! `prompt edge.`. Feature parts are rendered as `description: content` and
//! joined with `"; "`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Leading marker of a rendered text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextPrefix {
    FeatureNode,
    FeatureEdge,
    PromptNode,
}

impl TextPrefix {
    pub const ALL: [TextPrefix; 3] = [TextPrefix::FeatureNode, TextPrefix::FeatureEdge, TextPrefix::PromptNode];

    pub fn as_str(self) -> &'static str {
        match self {
            TextPrefix::FeatureNode => "feature node",
            TextPrefix::FeatureEdge => "feature edge",
            TextPrefix::PromptNode => "prompt node",
        }
    }

    fn is_feature(self) -> bool {
        !matches!(self, TextPrefix::PromptNode)
    }
}

impl fmt::Display for TextPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A prefix plus an ordered list of `(description, content)` feature parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextTemplate {
    pub prefix: TextPrefix,
    pub parts: Vec<(String, String)>,
}

impl TextTemplate {
    pub fn new(prefix: TextPrefix) -> Self {
        Self {
            prefix,
            parts: Vec::new(),
        }
    }

    pub fn part(mut self, description: impl Into<String>, content: impl Into<String>) -> Self {
        self.parts.push((description.into(), content.into()));
        self
    }

    pub fn render(&self) -> Result<String> {
        render_text(self)
    }
}

/// Renders `"<prefix>. <desc1>: <content1>; <desc2>: <content2>; ..."`.
///
/// Descriptions are lowercased, contents are copied verbatim. A part with an
/// empty content renders as the bare description (`feature edge. co-citation`).
pub fn render_text(template: &TextTemplate) -> Result<String> {
    if template.parts.is_empty() && template.prefix.is_feature() {
        return Err(Error::Template(format!(
            "a {} text needs at least one feature part",
            template.prefix
        )));
    }
    let mut out = String::from(template.prefix.as_str());
    out.push('.');
    for (i, (desc, content)) in template.parts.iter().enumerate() {
        let desc = collapse_whitespace(desc).to_lowercase();
        if desc.is_empty() {
            return Err(Error::Template(format!("part {i} has an empty description")));
        }
        out.push_str(if i == 0 { " " } else { "; " });
        out.push_str(&desc);
        let content = collapse_whitespace(content);
        if !content.is_empty() {
            out.push_str(": ");
            out.push_str(&content);
        }
    }
    Ok(out)
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

const PREFIX_MARKERS: [&str; 4] = ["feature node.", "feature edge.", "prompt node.", "prompt edge."];

/// Canonical embedding key for a text: whitespace runs collapsed to one
/// space, ends trimmed, and a leading protocol marker lowercased.
pub fn normalize_text(text: &str) -> String {
    let collapsed = collapse_whitespace(text);
    for marker in PREFIX_MARKERS {
        if collapsed.len() >= marker.len()
            && collapsed.is_char_boundary(marker.len())
            && collapsed[..marker.len()].eq_ignore_ascii_case(marker)
        {
            return format!("{marker}{}", &collapsed[marker.len()..]);
        }
    }
    collapsed
}

/// Case-insensitive check of the leading protocol marker.
pub fn has_prefix(text: &str, prefix: TextPrefix) -> bool {
    let marker = format!("{}.", prefix.as_str());
    let t = text.trim_start();
    t.len() >= marker.len() && t.is_char_boundary(marker.len()) && t[..marker.len()].eq_ignore_ascii_case(&marker)
}

/// Granularity of a classification task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskLevel {
    Node,
    Link,
    Graph,
}

impl TaskLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskLevel::Node => "node",
            TaskLevel::Link => "link",
            TaskLevel::Graph => "graph",
        }
    }
}

impl fmt::Display for TaskLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TaskLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "node" => Ok(TaskLevel::Node),
            "link" => Ok(TaskLevel::Link),
            "graph" => Ok(TaskLevel::Graph),
            other => Err(Error::InvalidDataset(format!("unknown task level {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub src: usize,
    pub dst: usize,
    pub rel: usize,
    pub text: String,
}

/// Directed multigraph with a sentence on every node, edge and relation.
///
/// Node ids are dense: `nodes[i].id == i`. Undirected sources are stored as
/// two directed edges sharing one relation id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TaGraph {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    pub relation_texts: Vec<String>,
    pub directed: bool,
}

impl TaGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_text(&self, id: usize) -> &str {
        &self.nodes[id].text
    }

    /// Builds a graph from node texts, assigning dense ids in order.
    pub fn from_texts(
        node_texts: impl IntoIterator<Item = String>,
        edges: Vec<EdgeRecord>,
        relation_texts: Vec<String>,
    ) -> Self {
        let nodes = node_texts
            .into_iter()
            .enumerate()
            .map(|(id, text)| NodeRecord { id, text })
            .collect();
        Self {
            nodes,
            edges,
            relation_texts,
            directed: true,
        }
    }

    /// Structural invariant violations, as human-readable strings.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            out.push("empty graph: no nodes".to_string());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                out.push(format!("non-dense node id: position {i} has id {}", node.id));
            }
            if node.text.trim().is_empty() {
                out.push(format!("empty text on node {i}"));
            }
        }
        let n = self.nodes.len();
        for (i, edge) in self.edges.iter().enumerate() {
            if edge.src >= n || edge.dst >= n {
                out.push(format!(
                    "dangling endpoint: edge {i} ({} -> {}) with {n} nodes",
                    edge.src, edge.dst
                ));
            }
            if edge.rel >= self.relation_texts.len() {
                out.push(format!(
                    "unknown relation: edge {i} uses relation {} of {}",
                    edge.rel,
                    self.relation_texts.len()
                ));
            }
            if edge.text.trim().is_empty() {
                out.push(format!("empty text on edge {i}"));
            }
        }
        out
    }
}
