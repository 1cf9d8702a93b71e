use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;

use super::encode::{EncodedGraph, ReadoutPlan};
use super::params::{ModelParams, Scalar};
use crate::error::{Error, Result};

/// Attention summary of one node's layer outputs.
#[derive(Debug, Clone)]
pub struct NodeReadout<T> {
    pub node: usize,
    /// `W_k^T W_q x_i`; the logits are `h^l_i . u`.
    pub u: Array1<T>,
    pub alpha: Array1<T>,
    pub h: Array1<T>,
}

/// Head activations for one class.
#[derive(Debug, Clone)]
pub struct HeadTrace<T> {
    pub input: Array1<T>,
    pub pre: Array1<T>,
    pub score: T,
}

/// Everything backward needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    /// `h^0 .. h^L`, each `n x d`.
    pub states: Vec<Array2<T>>,
    /// Per layer, per relation group: aggregated messages.
    pub aggregates: Vec<Vec<Array2<T>>>,
    /// Per layer dropout scale (`0` or `1/(1-p)`); `None` in eval mode.
    pub masks: Vec<Option<Array2<T>>>,
    pub readouts: Vec<NodeReadout<T>>,
    pub heads: Vec<HeadTrace<T>>,
    /// Raw head outputs, one per class.
    pub scores: Vec<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn probabilities(&self) -> Vec<T> {
        self.scores.iter().map(|&s| sigmoid(s)).collect()
    }

    pub fn num_layers(&self) -> usize {
        self.states.len() - 1
    }
}

pub fn sigmoid<T: Scalar>(s: T) -> T {
    if s >= T::zero() {
        T::one() / (T::one() + (-s).exp())
    } else {
        let e = s.exp();
        e / (T::one() + e)
    }
}

fn relu<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}

/// Mean of relu(h_j + x_ji) over in-edges, per receiver of each group.
fn aggregate<T: Scalar>(g: &EncodedGraph<T>, h: &Array2<T>) -> Vec<Array2<T>> {
    let d = h.ncols();
    g.groups
        .iter()
        .map(|grp| {
            let mut agg = Array2::<T>::zeros((grp.receivers.len(), d));
            for &(src, r, f) in &grp.edges {
                let w = grp.inv_degree[r];
                let hs = h.row(src);
                let ef = g.edge_features.row(f);
                let mut dst = agg.row_mut(r);
                for k in 0..d {
                    dst[k] += w * relu(hs[k] + ef[k]);
                }
            }
            agg
        })
        .collect()
}

fn combine<T: Scalar>(
    params: &ModelParams<T>,
    layer: usize,
    g: &EncodedGraph<T>,
    h: &Array2<T>,
    aggs: &[Array2<T>],
) -> Array2<T> {
    let mut out = h.dot(&params.w_self[layer].t());
    for (grp, agg) in g.groups.iter().zip(aggs) {
        let msg = agg.dot(&params.w_rel[layer][grp.relation].t());
        for (k, &i) in grp.receivers.iter().enumerate() {
            let mut dst = out.row_mut(i);
            dst += &msg.row(k);
        }
    }
    out
}

fn check_shapes<T: Scalar>(params: &ModelParams<T>, g: &EncodedGraph<T>) -> Result<()> {
    let d = params.config.dim;
    if g.x.ncols() != d || (g.edge_features.nrows() > 0 && g.edge_features.ncols() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: g.x.ncols(),
        });
    }
    if let Some(grp) = g
        .groups
        .iter()
        .find(|grp| grp.relation >= params.config.relations.len())
    {
        return Err(Error::UnknownRelation(format!("relation id {}", grp.relation)));
    }
    Ok(())
}

/// One message-passing layer without dropout.
pub fn layer_forward<T: Scalar>(
    params: &ModelParams<T>,
    layer: usize,
    g: &EncodedGraph<T>,
    h: &Array2<T>,
) -> Result<Array2<T>> {
    check_shapes(params, g)?;
    if layer >= params.config.layers {
        return Err(Error::Model(format!("layer {layer} out of range")));
    }
    if h.dim() != g.x.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.x.ncols(),
            found: h.ncols(),
        });
    }
    let aggs = aggregate(g, h);
    Ok(combine(params, layer, g, h, &aggs))
}

/// Attention over the layer outputs `layers` (`L x d`) of one node with
/// input feature `x`. Returns `(h, alpha, u)`.
pub fn attention_readout<T: Scalar>(
    layers: &Array2<T>,
    x: ArrayView1<T>,
    w_key: &Array2<T>,
    w_query: &Array2<T>,
) -> (Array1<T>, Array1<T>, Array1<T>) {
    let q = w_query.dot(&x);
    let u = w_key.t().dot(&q);
    let logits = layers.dot(&u);
    let alpha = softmax(&logits);
    let h = layers.t().dot(&alpha);
    (h, alpha, u)
}

pub fn softmax<T: Scalar>(v: &Array1<T>) -> Array1<T> {
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    let e = v.mapv(|a| (a - m).exp());
    let z = e.sum();
    e / z
}

fn layer_stack<T: Scalar>(states: &[Array2<T>], node: usize) -> Array2<T> {
    let d = states[0].ncols();
    let mut out = Array2::zeros((states.len() - 1, d));
    for (l, st) in states[1..].iter().enumerate() {
        out.row_mut(l).assign(&st.row(node));
    }
    out
}

/// Readout of an arbitrary node from a finished trace.
pub fn node_readout<T: Scalar>(
    params: &ModelParams<T>,
    g: &EncodedGraph<T>,
    trace: &ForwardTrace<T>,
    node: usize,
) -> NodeReadout<T> {
    let stack = layer_stack(&trace.states, node);
    let (h, alpha, u) = attention_readout(&stack, g.x.row(node), &params.w_key, &params.w_query);
    NodeReadout { node, u, alpha, h }
}

/// Vector representing the whole sample: the query prompt node's readout,
/// or the mean NOI readout when there is no prompt node.
pub fn sample_embedding<T: Scalar>(params: &ModelParams<T>, g: &EncodedGraph<T>, trace: &ForwardTrace<T>) -> Array1<T> {
    match (&g.anchor, &g.readout) {
        (Some(p), _) => node_readout(params, g, trace, *p).h,
        (None, ReadoutPlan::Pooled { noi, .. }) => pooled(params, g, trace, noi),
        (None, ReadoutPlan::ClassNodes(classes)) => pooled(params, g, trace, classes),
    }
}

fn pooled<T: Scalar>(
    params: &ModelParams<T>,
    g: &EncodedGraph<T>,
    trace: &ForwardTrace<T>,
    nodes: &[usize],
) -> Array1<T> {
    let mut acc = Array1::zeros(params.config.dim);
    for &i in nodes {
        acc += &node_readout(params, g, trace, i).h;
    }
    acc / T::of(nodes.len() as f64)
}

/// Full forward pass. Dropout is active exactly when `rng` is given.
pub fn forward<T: Scalar, R: Rng + ?Sized>(
    params: &ModelParams<T>,
    g: &EncodedGraph<T>,
    mut rng: Option<&mut R>,
) -> Result<ForwardTrace<T>> {
    check_shapes(params, g)?;
    let layers = params.config.layers;
    let p = params.config.dropout;
    let keep = T::one() / T::of(1.0 - p);
    let mut states = Vec::with_capacity(layers + 1);
    let mut aggregates = Vec::with_capacity(layers);
    let mut masks = Vec::with_capacity(layers);
    states.push(g.x.clone());
    for l in 0..layers {
        let h = &states[l];
        let aggs = aggregate(g, h);
        let mut out = combine(params, l, g, h, &aggs);
        let mask = match rng.as_deref_mut() {
            Some(r) if p > 0.0 => {
                let m = Array2::from_shape_simple_fn(out.dim(), || if r.gen::<f64>() < p { T::zero() } else { keep });
                out *= &m;
                Some(m)
            }
            _ => None,
        };
        states.push(out);
        aggregates.push(aggs);
        masks.push(mask);
    }

    let mut trace = ForwardTrace {
        states,
        aggregates,
        masks,
        readouts: Vec::new(),
        heads: Vec::new(),
        scores: Vec::new(),
    };
    let inputs: Vec<Array1<T>> = match &g.readout {
        ReadoutPlan::ClassNodes(classes) => {
            for &c in classes {
                let r = node_readout(params, g, &trace, c);
                trace.readouts.push(r);
            }
            trace.readouts.iter().map(|r| r.h.clone()).collect()
        }
        ReadoutPlan::Pooled { noi, class_vectors } => {
            for &t in noi {
                let r = node_readout(params, g, &trace, t);
                trace.readouts.push(r);
            }
            let d = params.config.dim;
            let mut mean = Array1::zeros(d);
            for r in &trace.readouts {
                mean += &r.h;
            }
            mean /= T::of(noi.len() as f64);
            class_vectors
                .axis_iter(Axis(0))
                .map(|cv| {
                    let mut v = Array1::zeros(2 * d);
                    v.slice_mut(s![..d]).assign(&mean);
                    v.slice_mut(s![d..]).assign(&cv);
                    v
                })
                .collect()
        }
    };
    for input in inputs {
        let pre = params.head_w1.dot(&input) + &params.head_b1;
        let score = pre
            .iter()
            .zip(params.head_w2.iter())
            .map(|(&a, &w)| relu(a) * w)
            .sum::<T>()
            + params.head_b2[0];
        trace.scores.push(score);
        trace.heads.push(HeadTrace { input, pre, score });
    }
    Ok(trace)
}

/// Index of the largest score; ties go to the lowest index.
pub fn predict_class<T: PartialOrd + Copy>(scores: &[T]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            Some((_, b)) if s.partial_cmp(&b) != Some(std::cmp::Ordering::Greater) => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
}
