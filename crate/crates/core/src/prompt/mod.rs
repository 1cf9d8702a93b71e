//! NOI subgraphs and prompted-graph assembly.

mod ablation;
mod graph;
mod subgraph;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use ablation::{apply_ablation, AblationMode};
pub use graph::{
    build_few_shot, build_zero_shot, NodeRole, PromptEdge, PromptNode, PromptedGraph, Readout, Relation, SupportExample,
};
pub use subgraph::{extract_ego, extract_noi_subgraph, GraphIndex, Noi, NoiSubgraph, SubEdge};

/// The five relations introduced by prompting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptRelation {
    /// NOI node to its prompt node.
    T2p,
    /// Prompt node to an NOI node.
    P2t,
    /// Query prompt node to a class node.
    Q2c,
    /// Class node to the query prompt node.
    C2q,
    /// Support prompt node to its class node.
    S2c,
}

impl PromptRelation {
    pub const ALL: [PromptRelation; 5] = [
        PromptRelation::T2p,
        PromptRelation::P2t,
        PromptRelation::Q2c,
        PromptRelation::C2q,
        PromptRelation::S2c,
    ];

    /// Fixed edge sentence, embedded like any other text.
    pub fn text(self) -> &'static str {
        match self {
            PromptRelation::T2p => "prompt edge. connection from nodes of interest to the prompt node",
            PromptRelation::P2t => "prompt edge. connection from the prompt node to nodes of interest",
            PromptRelation::Q2c => "prompt edge. connection from the query prompt node to a class node",
            PromptRelation::C2q => "prompt edge. connection from a class node to the query prompt node",
            PromptRelation::S2c => "prompt edge. connection from a support prompt node to its class node",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            PromptRelation::T2p => "t2p",
            PromptRelation::P2t => "p2t",
            PromptRelation::Q2c => "q2c",
            PromptRelation::C2q => "c2q",
            PromptRelation::S2c => "s2c",
        }
    }
}

impl fmt::Display for PromptRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl std::str::FromStr for PromptRelation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        PromptRelation::ALL
            .into_iter()
            .find(|r| r.short() == s)
            .ok_or_else(|| Error::Prompt(format!("unknown prompt relation {s:?}")))
    }
}

/// Default ego radius per task level; graph-level tasks use the whole graph.
pub fn default_hops(level: crate::tag::TaskLevel) -> usize {
    match level {
        crate::tag::TaskLevel::Node => 3,
        crate::tag::TaskLevel::Link => 2,
        crate::tag::TaskLevel::Graph => 0,
    }
}
