//! Brute-force oracles and random case generators shared by the integration
//! tests and the acceptance runner.

#![allow(dead_code)]

use std::collections::BTreeSet;

use ofa_core::embedding::{hash_embed, EmbeddingTable};
use ofa_core::model::{backward, bce_loss, forward, EncodedGraph, ModelConfig, ModelParams};
use ofa_core::prompt::{
    apply_ablation, build_few_shot, extract_noi_subgraph, AblationMode, Noi, NoiSubgraph, PromptedGraph, Readout,
    SupportExample,
};
use ofa_core::tag::{normalize_text, EdgeRecord, TaGraph, TaskLevel};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    rand::SeedableRng::seed_from_u64(seed)
}

/// Random multigraph with `n` nodes, up to `relations` relation ids and
/// self loops and parallel edges allowed.
pub fn random_graph<R: Rng>(r: &mut R, n: usize, relations: usize, density: f64) -> TaGraph {
    let m = ((n * n) as f64 * density).round() as usize;
    let edges = (0..m)
        .map(|_| {
            let rel = r.gen_range(0..relations);
            EdgeRecord {
                src: r.gen_range(0..n),
                dst: r.gen_range(0..n),
                rel,
                text: format!("feature edge. kind {rel} weight {}", r.gen_range(0..3)),
            }
        })
        .collect();
    TaGraph::from_texts(
        (0..n).map(|i| format!("feature node. item {} shade {}", i % 5, r.gen_range(0..4))),
        edges,
        (0..relations).map(|k| format!("relation {k}")).collect(),
    )
}

/// Nodes within `hops` undirected steps of `v`, by repeated edge scans.
pub fn oracle_ball(g: &TaGraph, v: usize, hops: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([v]);
    let mut frontier = BTreeSet::from([v]);
    for _ in 0..hops {
        let mut next = BTreeSet::new();
        for e in &g.edges {
            for (a, b) in [(e.src, e.dst), (e.dst, e.src)] {
                if frontier.contains(&a) && !seen.contains(&b) {
                    next.insert(b);
                }
            }
        }
        seen.extend(next.iter().copied());
        frontier = next;
    }
    seen
}

/// Union over targets of the induced ego subgraphs: `(original node ids,
/// original edge indices)`. A graph-level NOI over every node is the whole
/// graph, whatever `hops` is.
pub fn oracle_noi_subgraph(g: &TaGraph, noi: &Noi, hops: usize) -> (BTreeSet<usize>, BTreeSet<usize>) {
    if noi.level == TaskLevel::Graph && noi.targets.len() == g.num_nodes() {
        return ((0..g.num_nodes()).collect(), (0..g.num_edges()).collect());
    }
    let targets = &noi.targets;
    let mut nodes = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for &t in targets {
        let ball = oracle_ball(g, t, hops);
        for (k, e) in g.edges.iter().enumerate() {
            if ball.contains(&e.src) && ball.contains(&e.dst) {
                edges.insert(k);
            }
        }
        nodes.extend(ball);
    }
    (nodes, edges)
}

pub fn random_targets<R: Rng>(r: &mut R, n: usize) -> (Vec<usize>, TaskLevel) {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(r);
    match r.gen_range(0..3) {
        0 => (vec![ids[0]], TaskLevel::Node),
        1 if n >= 2 => (ids[..2].to_vec(), TaskLevel::Link),
        _ => {
            let k = r.gen_range(1..=n);
            let mut t = ids[..k].to_vec();
            t.sort_unstable();
            (t, TaskLevel::Graph)
        }
    }
}

pub fn noi_of(targets: &[usize], level: TaskLevel) -> Noi {
    Noi {
        targets: targets.to_vec(),
        level,
    }
}

/// Embedding table holding every key of `pg`.
pub fn table_for(pg: &PromptedGraph, dim: usize, seed: u64) -> EmbeddingTable {
    let mut t = EmbeddingTable::new(dim);
    let mut keys: Vec<String> = pg
        .node_feature_keys()
        .chain(pg.edge_feature_keys())
        .map(str::to_string)
        .collect();
    keys.push(pg.task_key.clone());
    keys.extend(pg.class_keys.iter().cloned());
    for k in keys {
        let k = normalize_text(&k);
        if !t.contains(&k) {
            let v = hash_embed(&k, dim, seed);
            t.insert(k, v).unwrap();
        }
    }
    t
}

pub struct Case {
    pub graph: TaGraph,
    pub prompted: PromptedGraph,
    pub mode: AblationMode,
}

/// Random prompted graph over a fresh random graph: 1..=4 classes, 0..=2
/// shots, hops 0..=2, any ablation mode in `modes`.
pub fn random_case<R: Rng>(r: &mut R, modes: &[AblationMode]) -> Case {
    let n = r.gen_range(3..=12);
    let (rels, density) = (r.gen_range(1..=3), r.gen_range(0.05..0.3));
    let graph = random_graph(r, n, rels, density);
    let hops = r.gen_range(0..=2);
    let classes: usize = r.gen_range(1..=4);
    let k: usize = if r.gen_bool(0.5) { 0 } else { r.gen_range(1..=2) };
    let (targets, level) = random_targets(r, n);
    let noi = noi_of(&targets, level);
    let sub = extract_noi_subgraph(&graph, &noi, hops).unwrap();
    let mut support_nois: Vec<Vec<Noi>> = Vec::new();
    for _ in 0..if k > 0 { classes } else { 0 } {
        support_nois.push((0..k).map(|_| noi_of(&[r.gen_range(0..n)], TaskLevel::Node)).collect());
    }
    let support_subs: Vec<Vec<NoiSubgraph>> = support_nois
        .iter()
        .map(|shots| {
            shots
                .iter()
                .map(|s| extract_noi_subgraph(&graph, s, hops).unwrap())
                .collect()
        })
        .collect();
    let supports: Vec<Vec<SupportExample<'_>>> = support_nois
        .iter()
        .zip(&support_subs)
        .map(|(nois, subs)| {
            nois.iter()
                .zip(subs)
                .map(|(noi, subgraph)| SupportExample {
                    graph: &graph,
                    subgraph,
                    noi,
                })
                .collect()
        })
        .collect();
    let class_texts: Vec<String> = (0..classes)
        .map(|c| format!("prompt node. class {c} of {classes}"))
        .collect();
    let full = build_few_shot(&graph, &sub, &noi, &supports, "prompt node. which class", &class_texts).unwrap();
    let mode = *modes.choose(r).unwrap();
    let prompted = apply_ablation(&full, mode).unwrap();
    Case { graph, prompted, mode }
}

pub fn params_for<R: Rng>(
    r: &mut R,
    graph: &TaGraph,
    dim: usize,
    layers: usize,
    mode: AblationMode,
) -> ModelParams<f64> {
    let cfg = ModelConfig::new(dim, layers, 0.0, mode, graph.relation_texts.clone());
    let mut p = ModelParams::<f64>::init(cfg, r).unwrap();
    for v in p.head_b1.iter_mut() {
        *v = r.gen_range(-0.5..0.5);
    }
    p.head_b2[0] = r.gen_range(-0.5..0.5);
    p
}

fn vec_of(table: &EmbeddingTable, key: &str) -> Vec<f64> {
    table
        .get(key)
        .or_else(|| table.lookup(key))
        .unwrap_or_else(|| panic!("missing key {key:?}"))
        .iter()
        .map(|&v| v as f64)
        .collect()
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

fn matvec(w: &ndarray::Array2<f64>, x: &[f64]) -> Vec<f64> {
    (0..w.nrows())
        .map(|a| (0..w.ncols()).map(|b| w[[a, b]] * x[b]).sum())
        .collect()
}

/// Class scores by explicit loops over the prompted graph.
pub fn oracle_forward(pg: &PromptedGraph, table: &EmbeddingTable, p: &ModelParams<f64>) -> Vec<f64> {
    let d = p.config.dim;
    let n = pg.num_nodes();
    let x: Vec<Vec<f64>> = pg.nodes.iter().map(|v| vec_of(table, &v.key)).collect();
    let rels: Vec<usize> = pg
        .edges
        .iter()
        .map(|e| {
            p.relation(pg.relation_text(e.relation))
                .expect("relation in vocabulary")
        })
        .collect();
    let feats: Vec<Vec<f64>> = pg.edges.iter().map(|e| vec_of(table, &e.key)).collect();
    let mut states = vec![x.clone()];
    for l in 0..p.config.layers {
        let h = states.last().unwrap();
        let mut out = vec![vec![0.0; d]; n];
        for i in 0..n {
            out[i] = matvec(&p.w_self[l], &h[i]);
            for (k, e) in pg.edges.iter().enumerate() {
                if e.dst != i {
                    continue;
                }
                let deg = pg
                    .edges
                    .iter()
                    .zip(&rels)
                    .filter(|(f, &r)| f.dst == i && r == rels[k])
                    .count() as f64;
                let m: Vec<f64> = (0..d).map(|b| relu(h[e.src][b] + feats[k][b])).collect();
                let msg = matvec(&p.w_rel[l][rels[k]], &m);
                for a in 0..d {
                    out[i][a] += msg[a] / deg;
                }
            }
        }
        states.push(out);
    }
    let readout = |i: usize| -> Vec<f64> {
        let q = matvec(&p.w_query, &x[i]);
        let u: Vec<f64> = (0..d).map(|b| (0..d).map(|a| p.w_key[[a, b]] * q[a]).sum()).collect();
        let logits: Vec<f64> = states[1..]
            .iter()
            .map(|s| (0..d).map(|b| s[i][b] * u[b]).sum())
            .collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|v| (v - m).exp()).sum();
        let mut r = vec![0.0; d];
        for (l, s) in states[1..].iter().enumerate() {
            let a = (logits[l] - m).exp() / z;
            for b in 0..d {
                r[b] += a * s[i][b];
            }
        }
        r
    };
    let head = |input: &[f64]| -> f64 {
        let mut s = p.head_b2[0];
        for j in 0..p.head_w1.nrows() {
            let pre: f64 = (0..input.len()).map(|k| p.head_w1[[j, k]] * input[k]).sum::<f64>() + p.head_b1[j];
            s += relu(pre) * p.head_w2[j];
        }
        s
    };
    match &pg.readout {
        Readout::ClassNodes => pg.class_node_ids.iter().map(|&c| head(&readout(c))).collect(),
        Readout::Pooled {
            noi_nodes,
            task_key,
            class_keys,
        } => {
            let mut mean = vec![0.0; d];
            for &t in noi_nodes {
                for (m, v) in mean.iter_mut().zip(readout(t)) {
                    *m += v / noi_nodes.len() as f64;
                }
            }
            let task = vec_of(table, task_key);
            class_keys
                .iter()
                .map(|k| {
                    let c = vec_of(table, k);
                    let mut input = mean.clone();
                    input.extend((0..d).map(|b| task[b] + c[b]));
                    head(&input)
                })
                .collect()
        }
    }
}

/// Area under the ROC curve by comparing every positive with every negative.
pub fn oracle_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Mean over positives of the precision among all points scoring at least
/// as high.
pub fn oracle_ap(scores: &[f64], labels: &[bool]) -> f64 {
    let mut total = 0.0;
    let mut positives = 0.0;
    for i in 0..scores.len() {
        if !labels[i] {
            continue;
        }
        positives += 1.0;
        let above: Vec<usize> = (0..scores.len()).filter(|&j| scores[j] >= scores[i]).collect();
        let hits = above.iter().filter(|&&j| labels[j]).count();
        total += hits as f64 / above.len() as f64;
    }
    total / positives
}

/// Quantized random scores (so ties occur) with both labels present.
pub fn random_metric_instance<R: Rng>(r: &mut R, max_len: usize) -> (Vec<f64>, Vec<bool>) {
    loop {
        let n = r.gen_range(2..=max_len);
        let levels = r.gen_range(2..=50);
        let rate = r.gen_range(0.05..0.95);
        let scores: Vec<f64> = (0..n).map(|_| r.gen_range(0..levels) as f64 / levels as f64).collect();
        let labels: Vec<bool> = (0..n).map(|_| r.gen_bool(rate)).collect();
        if labels.iter().any(|&y| y) && labels.iter().any(|&y| !y) {
            return (scores, labels);
        }
    }
}

pub struct GradReport {
    pub checked: usize,
    pub max_rel: f64,
    pub worst: String,
    pub groups: Vec<String>,
}

/// Central differences against the analytic gradient for every entry of
/// every parameter block.
pub fn gradient_check(p: &ModelParams<f64>, g: &EncodedGraph<f64>, y: &[f64], step: f64) -> GradReport {
    let loss = |q: &ModelParams<f64>| {
        let t = forward::<f64, Rng64>(q, g, None).unwrap();
        bce_loss(&t.probabilities(), y).unwrap()
    };
    let trace = forward::<f64, Rng64>(p, g, None).unwrap();
    let (_, grads) = backward(p, g, &trace, y, 1.0).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads.blocks().into_iter().map(|(n, b)| (n, b.to_vec())).collect();
    let mut probe = p.clone();
    let mut report = GradReport {
        checked: 0,
        max_rel: 0.0,
        worst: String::new(),
        groups: analytic.iter().map(|(n, _)| n.clone()).collect(),
    };
    for (bi, (name, ga)) in analytic.iter().enumerate() {
        for (k, &a) in ga.iter().enumerate() {
            let orig = probe.blocks_mut()[bi][k];
            probe.blocks_mut()[bi][k] = orig + step;
            let up = loss(&probe);
            probe.blocks_mut()[bi][k] = orig - step;
            let down = loss(&probe);
            probe.blocks_mut()[bi][k] = orig;
            let num = (up - down) / (2.0 * step);
            let rel = (a - num).abs() / a.abs().max(num.abs()).max(1e-6);
            report.checked += 1;
            if rel > report.max_rel {
                report.max_rel = rel;
                report.worst = format!("{name}[{k}]: analytic {a:.3e}, numeric {num:.3e}");
            }
        }
    }
    report
}

/// Subgraph node and edge counts used for counting identities.
pub fn sizes(sub: &NoiSubgraph) -> (usize, usize) {
    (sub.num_nodes(), sub.edges.len())
}
