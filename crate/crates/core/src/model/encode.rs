use std::collections::HashMap;

use ndarray::{Array1, Array2};

use super::params::{ModelParams, Scalar};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::prompt::{PromptedGraph, Readout};

/// In-edges of one relation, grouped by receiving node.
#[derive(Debug, Clone)]
pub struct RelationGroup<T> {
    /// Model relation id.
    pub relation: usize,
    /// Receiving nodes; row `k` of the group aggregate belongs to `receivers[k]`.
    pub receivers: Vec<usize>,
    /// `(source node, receiver row, edge feature row)`.
    pub edges: Vec<(usize, usize, usize)>,
    /// `1 / in-degree` per receiver row.
    pub inv_degree: Vec<T>,
}

#[derive(Debug, Clone)]
pub enum ReadoutPlan<T> {
    ClassNodes(Vec<usize>),
    /// Mean over `noi` paired with one text vector per class.
    Pooled {
        noi: Vec<usize>,
        class_vectors: Array2<T>,
    },
}

impl<T> ReadoutPlan<T> {
    pub fn num_classes(&self) -> usize {
        match self {
            ReadoutPlan::ClassNodes(c) => c.len(),
            ReadoutPlan::Pooled { class_vectors, .. } => class_vectors.nrows(),
        }
    }
}

/// A prompted graph resolved against an embedding table and a relation
/// vocabulary, ready for the model.
#[derive(Debug, Clone)]
pub struct EncodedGraph<T> {
    /// Node features, `n x d`.
    pub x: Array2<T>,
    /// Distinct edge features, one row per key.
    pub edge_features: Array2<T>,
    pub groups: Vec<RelationGroup<T>>,
    pub readout: ReadoutPlan<T>,
    /// Node whose readout represents the sample (the query prompt node, if any).
    pub anchor: Option<usize>,
}

impl<T> EncodedGraph<T> {
    pub fn num_nodes(&self) -> usize {
        self.x.nrows()
    }
}

fn lookup<'a>(table: &'a EmbeddingTable, key: &str, what: impl FnOnce() -> String) -> Result<&'a [f32]> {
    table
        .get(key)
        .or_else(|| table.lookup(key))
        .ok_or_else(|| Error::MissingKey(format!("{} ({key:?})", what())))
}

fn row<T: Scalar>(dst: &mut Array2<T>, i: usize, v: &[f32]) {
    for (d, s) in dst.row_mut(i).iter_mut().zip(v) {
        *d = T::of(*s as f64);
    }
}

impl<T: Scalar> EncodedGraph<T> {
    pub fn new(pg: &PromptedGraph, table: &EmbeddingTable, params: &ModelParams<T>) -> Result<Self> {
        let d = params.config.dim;
        if table.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: table.dim(),
            });
        }
        let n = pg.num_nodes();
        let mut x = Array2::zeros((n, d));
        for (i, node) in pg.nodes.iter().enumerate() {
            let v = lookup(table, &node.key, || format!("node {i}"))?;
            row(&mut x, i, v);
        }

        let mut feature_rows: HashMap<&str, usize> = HashMap::new();
        let mut feature_vecs: Vec<&[f32]> = Vec::new();
        let mut by_relation: HashMap<usize, Vec<(usize, usize, usize)>> = HashMap::new();
        for (k, e) in pg.edges.iter().enumerate() {
            if e.src >= n || e.dst >= n {
                return Err(Error::Model(format!("edge {k} has an endpoint outside the graph")));
            }
            let text = pg.relation_text(e.relation);
            let rel = params
                .relation(text)
                .ok_or_else(|| Error::UnknownRelation(text.to_string()))?;
            let frow = match feature_rows.get(e.key.as_str()) {
                Some(r) => *r,
                None => {
                    let v = lookup(table, &e.key, || format!("edge {k} ({} -> {})", e.src, e.dst))?;
                    feature_vecs.push(v);
                    feature_rows.insert(e.key.as_str(), feature_vecs.len() - 1);
                    feature_vecs.len() - 1
                }
            };
            by_relation.entry(rel).or_default().push((e.src, e.dst, frow));
        }
        let mut edge_features = Array2::zeros((feature_vecs.len(), d));
        for (i, v) in feature_vecs.iter().enumerate() {
            row(&mut edge_features, i, v);
        }

        let mut relations: Vec<usize> = by_relation.keys().copied().collect();
        relations.sort_unstable();
        let groups = relations
            .into_iter()
            .map(|rel| {
                let raw = &by_relation[&rel];
                let mut receivers = Vec::new();
                let mut row_of = HashMap::new();
                let mut counts: Vec<usize> = Vec::new();
                let mut edges = Vec::with_capacity(raw.len());
                for &(src, dst, f) in raw {
                    let r = *row_of.entry(dst).or_insert_with(|| {
                        receivers.push(dst);
                        counts.push(0);
                        receivers.len() - 1
                    });
                    counts[r] += 1;
                    edges.push((src, r, f));
                }
                RelationGroup {
                    relation: rel,
                    receivers,
                    edges,
                    inv_degree: counts.iter().map(|&c| T::one() / T::of(c as f64)).collect(),
                }
            })
            .collect();

        let readout = match &pg.readout {
            Readout::ClassNodes => {
                if pg.class_node_ids.is_empty() {
                    return Err(Error::Model("prompted graph has no class nodes".into()));
                }
                ReadoutPlan::ClassNodes(pg.class_node_ids.clone())
            }
            Readout::Pooled {
                noi_nodes,
                task_key,
                class_keys,
            } => {
                if noi_nodes.is_empty() || class_keys.is_empty() {
                    return Err(Error::Model("pooled readout needs NOI nodes and classes".into()));
                }
                let task = lookup(table, task_key, || "task text".into())?;
                let mut class_vectors = Array2::zeros((class_keys.len(), d));
                for (c, key) in class_keys.iter().enumerate() {
                    let v = lookup(table, key, || format!("class {c}"))?;
                    for ((dst, a), b) in class_vectors.row_mut(c).iter_mut().zip(task).zip(v) {
                        *dst = T::of(*a as f64 + *b as f64);
                    }
                }
                ReadoutPlan::Pooled {
                    noi: noi_nodes.clone(),
                    class_vectors,
                }
            }
        };
        if params.config.head_input_dim() != head_width(&readout, d) {
            return Err(Error::Model(format!(
                "model built for ablation {} cannot read out this prompted graph",
                params.config.ablation
            )));
        }

        Ok(Self {
            x,
            edge_features,
            groups,
            readout,
            anchor: pg.query_prompt_node,
        })
    }
}

fn head_width<T>(readout: &ReadoutPlan<T>, d: usize) -> usize {
    match readout {
        ReadoutPlan::ClassNodes(_) => d,
        ReadoutPlan::Pooled { .. } => 2 * d,
    }
}

/// Labels for one prompted graph, one entry per class.
pub fn label_vector<T: Scalar>(positives: &[usize], num_classes: usize) -> Array1<T> {
    let mut y = Array1::zeros(num_classes);
    for &p in positives {
        if p < num_classes {
            y[p] = T::one();
        }
    }
    y
}
