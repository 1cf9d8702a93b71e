use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::tag::{TaGraph, TaskLevel};

/// Nodes of interest: the targets a task predicts about.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Noi {
    pub targets: Vec<usize>,
    pub level: TaskLevel,
}

impl Noi {
    pub fn node(v: usize) -> Self {
        Self {
            targets: vec![v],
            level: TaskLevel::Node,
        }
    }

    pub fn link(a: usize, b: usize) -> Self {
        Self {
            targets: vec![a, b],
            level: TaskLevel::Link,
        }
    }

    /// All nodes of a graph with `num_nodes` nodes.
    pub fn graph(num_nodes: usize) -> Self {
        Self {
            targets: (0..num_nodes).collect(),
            level: TaskLevel::Graph,
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn check(&self, graph: &TaGraph) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::Prompt("empty NOI".into()));
        }
        let ok = match self.level {
            TaskLevel::Node => self.targets.len() == 1,
            TaskLevel::Link => self.targets.len() == 2,
            TaskLevel::Graph => self.targets.len() == graph.num_nodes(),
        };
        if !ok {
            return Err(Error::Prompt(format!(
                "{} targets do not fit a {}-level NOI",
                self.targets.len(),
                self.level
            )));
        }
        if let Some(&bad) = self.targets.iter().find(|&&t| t >= graph.num_nodes()) {
            return Err(Error::Prompt(format!(
                "NOI node {bad} outside graph of {} nodes",
                graph.num_nodes()
            )));
        }
        Ok(())
    }
}

/// An edge of a subgraph, with endpoints in local ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubEdge {
    /// Index into the source graph's edge list.
    pub edge: usize,
    pub src: usize,
    pub dst: usize,
    pub rel: usize,
}

/// Union of h-hop ego subgraphs, referencing its source graph by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiSubgraph {
    /// Original node ids, ascending; position is the local id.
    pub nodes: Vec<usize>,
    /// Edges ordered by original edge index.
    pub edges: Vec<SubEdge>,
    pub id_map: HashMap<usize, usize>,
}

impl NoiSubgraph {
    fn from_sets(graph: &TaGraph, nodes: BTreeSet<usize>, edges: BTreeSet<usize>) -> Self {
        let nodes: Vec<usize> = nodes.into_iter().collect();
        let id_map: HashMap<usize, usize> = nodes.iter().enumerate().map(|(l, &o)| (o, l)).collect();
        let edges = edges
            .into_iter()
            .map(|e| {
                let rec = &graph.edges[e];
                SubEdge {
                    edge: e,
                    src: id_map[&rec.src],
                    dst: id_map[&rec.dst],
                    rel: rec.rel,
                }
            })
            .collect();
        Self { nodes, edges, id_map }
    }

    /// The whole graph as a subgraph.
    pub fn whole(graph: &TaGraph) -> Self {
        Self::from_sets(
            graph,
            (0..graph.num_nodes()).collect(),
            (0..graph.num_edges()).collect(),
        )
    }

    pub fn local(&self, original: usize) -> Option<usize> {
        self.id_map.get(&original).copied()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Drops every edge joining `a` and `b` in either direction.
    pub fn remove_edges_between(&mut self, a: usize, b: usize) {
        let (Some(la), Some(lb)) = (self.local(a), self.local(b)) else {
            return;
        };
        self.edges
            .retain(|e| !((e.src == la && e.dst == lb) || (e.src == lb && e.dst == la)));
    }
}

/// Undirected reachability index over a graph's edges.
#[derive(Debug, Clone)]
pub struct GraphIndex {
    neighbors: Vec<Vec<usize>>,
    out_edges: Vec<Vec<usize>>,
}

impl GraphIndex {
    pub fn new(graph: &TaGraph) -> Self {
        let n = graph.num_nodes();
        let mut neighbors = vec![Vec::new(); n];
        let mut out_edges = vec![Vec::new(); n];
        for (i, e) in graph.edges.iter().enumerate() {
            neighbors[e.src].push(e.dst);
            neighbors[e.dst].push(e.src);
            out_edges[e.src].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Self { neighbors, out_edges }
    }

    fn ball(&self, v: usize, hops: usize, cut: Option<(usize, usize)>) -> HashSet<usize> {
        let mut seen = HashSet::from([v]);
        let mut frontier = VecDeque::from([(v, 0usize)]);
        while let Some((u, d)) = frontier.pop_front() {
            if d == hops {
                continue;
            }
            for &w in &self.neighbors[u] {
                if is_cut(cut, u, w) {
                    continue;
                }
                if seen.insert(w) {
                    frontier.push_back((w, d + 1));
                }
            }
        }
        seen
    }

    fn ego_sets(
        &self,
        v: usize,
        hops: usize,
        cut: Option<(usize, usize)>,
        nodes: &mut BTreeSet<usize>,
        edges: &mut BTreeSet<usize>,
        graph: &TaGraph,
    ) {
        let ball = self.ball(v, hops, cut);
        for &u in &ball {
            for &e in &self.out_edges[u] {
                let dst = graph.edges[e].dst;
                if ball.contains(&dst) && !is_cut(cut, u, dst) {
                    edges.insert(e);
                }
            }
        }
        nodes.extend(ball);
    }

    pub fn ego(&self, graph: &TaGraph, v: usize, hops: usize) -> Result<NoiSubgraph> {
        if v >= graph.num_nodes() {
            return Err(Error::Prompt(format!(
                "node {v} outside graph of {} nodes",
                graph.num_nodes()
            )));
        }
        let (mut nodes, mut edges) = (BTreeSet::new(), BTreeSet::new());
        self.ego_sets(v, hops, None, &mut nodes, &mut edges, graph);
        Ok(NoiSubgraph::from_sets(graph, nodes, edges))
    }

    /// Union of the ego subgraphs of every target (node, edge and relation
    /// union). Edges appear only if some single ego contains both endpoints.
    pub fn noi_subgraph(&self, graph: &TaGraph, noi: &Noi, hops: usize) -> Result<NoiSubgraph> {
        self.noi_subgraph_cut(graph, noi, hops, None)
    }

    /// Like [`GraphIndex::noi_subgraph`], but for a link NOI the edges
    /// joining the two targets are ignored, both for reachability and in the
    /// result, so the link being asked about is not visible.
    pub fn link_query_subgraph(&self, graph: &TaGraph, noi: &Noi, hops: usize) -> Result<NoiSubgraph> {
        let cut = match noi.targets.as_slice() {
            [a, b] if noi.level == TaskLevel::Link => Some((*a, *b)),
            _ => None,
        };
        self.noi_subgraph_cut(graph, noi, hops, cut)
    }

    fn noi_subgraph_cut(
        &self,
        graph: &TaGraph,
        noi: &Noi,
        hops: usize,
        cut: Option<(usize, usize)>,
    ) -> Result<NoiSubgraph> {
        if noi.targets.is_empty() {
            return Err(Error::Prompt("empty NOI".into()));
        }
        if noi.level == TaskLevel::Graph && noi.targets.len() == graph.num_nodes() {
            return Ok(NoiSubgraph::whole(graph));
        }
        let (mut nodes, mut edges) = (BTreeSet::new(), BTreeSet::new());
        for &t in &noi.targets {
            if t >= graph.num_nodes() {
                return Err(Error::Prompt(format!(
                    "NOI node {t} outside graph of {} nodes",
                    graph.num_nodes()
                )));
            }
            self.ego_sets(t, hops, cut, &mut nodes, &mut edges, graph);
        }
        Ok(NoiSubgraph::from_sets(graph, nodes, edges))
    }
}

fn is_cut(cut: Option<(usize, usize)>, u: usize, w: usize) -> bool {
    matches!(cut, Some((a, b)) if (u == a && w == b) || (u == b && w == a))
}

/// Nodes within `hops` undirected hops of `v`, plus every directed edge
/// among them.
pub fn extract_ego(graph: &TaGraph, v: usize, hops: usize) -> Result<NoiSubgraph> {
    GraphIndex::new(graph).ego(graph, v, hops)
}

pub fn extract_noi_subgraph(graph: &TaGraph, noi: &Noi, hops: usize) -> Result<NoiSubgraph> {
    GraphIndex::new(graph).noi_subgraph(graph, noi, hops)
}
