use std::fmt;

use serde::{Deserialize, Serialize};

use super::graph::{NodeRole, PromptEdge, PromptedGraph, Readout};
use super::PromptRelation;
use crate::error::{Error, Result};

/// Prompt-design variant used for a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    #[default]
    Full,
    /// Class nodes wired straight to the NOI nodes.
    NoNoiPromptNode,
    /// No prompt graph; mean-pooled NOI readout paired with class texts.
    NoClassNode,
}

impl AblationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AblationMode::Full => "full",
            AblationMode::NoNoiPromptNode => "no-noi-prompt",
            AblationMode::NoClassNode => "no-class-node",
        }
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(AblationMode::Full),
            "no-noi-prompt" | "no_noi_prompt_node" | "no-noi-prompt-node" => Ok(AblationMode::NoNoiPromptNode),
            "no-class-node" | "no_class_node" => Ok(AblationMode::NoClassNode),
            other => Err(Error::Prompt(format!("unknown ablation mode {other:?}"))),
        }
    }
}

/// Rewrites a full prompted graph into the requested variant.
pub fn apply_ablation(prompted: &PromptedGraph, mode: AblationMode) -> Result<PromptedGraph> {
    if prompted.readout != Readout::ClassNodes || prompted.query_prompt_node.is_none() {
        return Err(Error::Prompt("ablation expects a full-mode prompted graph".into()));
    }
    match mode {
        AblationMode::Full => Ok(prompted.clone()),
        AblationMode::NoNoiPromptNode => Ok(without_noi_prompt(prompted)),
        AblationMode::NoClassNode => Ok(without_class_nodes(prompted)),
    }
}

fn without_noi_prompt(p: &PromptedGraph) -> PromptedGraph {
    // Input and class nodes keep their relative order; prompt nodes go.
    let mut remap = vec![usize::MAX; p.nodes.len()];
    let mut nodes = Vec::new();
    for (i, n) in p.nodes.iter().enumerate() {
        if matches!(n.role, NodeRole::Input | NodeRole::Class) {
            remap[i] = nodes.len();
            nodes.push(n.clone());
        }
    }
    let mut edges: Vec<PromptEdge> = p.edges[..p.num_input_edges].to_vec();
    let classes: Vec<usize> = p.class_node_ids.iter().map(|&c| remap[c]).collect();
    for &t in &p.query_noi_nodes {
        for &c in &classes {
            edges.push(PromptEdge::prompt(t, c, PromptRelation::Q2c));
            edges.push(PromptEdge::prompt(c, t, PromptRelation::C2q));
        }
    }
    for (i, shots) in p.support_noi_nodes.iter().enumerate() {
        for targets in shots {
            for &t in targets {
                edges.push(PromptEdge::prompt(t, classes[i], PromptRelation::S2c));
            }
        }
    }
    PromptedGraph {
        nodes,
        edges,
        class_node_ids: classes,
        query_prompt_node: None,
        support_prompt_nodes: Vec::new(),
        ..p.clone()
    }
}

fn without_class_nodes(p: &PromptedGraph) -> PromptedGraph {
    PromptedGraph {
        nodes: p.nodes[..p.num_query_nodes].to_vec(),
        edges: p.edges[..p.num_query_edges].to_vec(),
        class_node_ids: Vec::new(),
        query_prompt_node: None,
        support_prompt_nodes: Vec::new(),
        support_noi_nodes: Vec::new(),
        readout: Readout::Pooled {
            noi_nodes: p.query_noi_nodes.clone(),
            task_key: p.task_key.clone(),
            class_keys: p.class_keys.clone(),
        },
        num_input_nodes: p.num_query_nodes,
        num_input_edges: p.num_query_edges,
        ..p.clone()
    }
}
