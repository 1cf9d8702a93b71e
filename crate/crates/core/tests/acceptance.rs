//! Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use common::*;
use ofa_core::convert::{convert, ConvertFormat, ConvertOptions};
use ofa_core::dataset::{Dataset, SplitName};
use ofa_core::embedding::{embed_all, Provider, ProviderSpec};
use ofa_core::model::{forward, EncodedGraph};
use ofa_core::prompt::{
    build_few_shot, build_zero_shot, extract_noi_subgraph, AblationMode, Noi, NoiSubgraph, SupportExample,
};
use ofa_core::synthetic;
use ofa_core::tag::TaskLevel;
use ofa_core::tasks::Hops;
use ofa_core::train::{self, average_precision, roc_auc, DatasetEntry, MetricKind, RunConfig, Session};
use rand::seq::SliceRandom;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

type Check = (&'static str, fn() -> Verdict);

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn subgraph_oracle() -> Verdict {
    let start = Instant::now();
    let mut r = rng(101);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = r.gen_range(1..=30);
        let (rels, density) = (r.gen_range(1..=4), r.gen_range(0.0..0.15));
        let g = random_graph(&mut r, n, rels, density);
        let hops = r.gen_range(0..=3);
        let (targets, level) = random_targets(&mut r, n);
        let noi = noi_of(&targets, level);
        let sub = extract_noi_subgraph(&g, &noi, hops).unwrap();
        let (nodes, edges) = oracle_noi_subgraph(&g, &noi, hops);
        let got_nodes: Vec<usize> = sub.nodes.clone();
        let got_edges: Vec<usize> = sub.edges.iter().map(|e| e.edge).collect();
        if got_nodes != nodes.into_iter().collect::<Vec<_>>() || got_edges != edges.into_iter().collect::<Vec<_>>() {
            mismatches += 1;
        }
    }
    let t = start.elapsed();
    verdict(
        mismatches == 0 && within(t, 10.0),
        format!(
            "1000 graphs, {mismatches} mismatches, {:.2}s (limit 10s)",
            t.as_secs_f64()
        ),
    )
}

fn noi_with(r: &mut Rng64, n: usize, size: usize) -> Noi {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(r);
    let mut t = ids[..size].to_vec();
    t.sort_unstable();
    let level = match size {
        1 => TaskLevel::Node,
        2 => TaskLevel::Link,
        _ => TaskLevel::Graph,
    };
    noi_of(&t, level)
}

fn counting_identities() -> Verdict {
    let start = Instant::now();
    let mut r = rng(202);
    let g = random_graph(&mut r, 14, 2, 0.08);
    let mut failures = Vec::new();
    let mut checked = 0;
    for t in [1usize, 2, 5] {
        let noi = noi_with(&mut r, 14, t);
        let sub = extract_noi_subgraph(&g, &noi, 1).unwrap();
        let (qn, qe) = sizes(&sub);
        for n in 1..=10 {
            let classes: Vec<String> = (0..n).map(|c| format!("prompt node. class {c}")).collect();
            let zs = build_zero_shot(&g, &sub, &noi, "prompt node. task", &classes).unwrap();
            checked += 1;
            if zs.num_nodes() - qn != n + 1 || zs.edges.len() - qe != 2 * t + 2 * n {
                failures.push(format!("zero-shot N={n} |T|={t}"));
            }
            for k in 1..=10 {
                let nois: Vec<Vec<Noi>> = (0..n)
                    .map(|_| {
                        (0..k)
                            .map(|_| {
                                let size = [1, 2, 5][r.gen_range(0..3)];
                                noi_with(&mut r, 14, size)
                            })
                            .collect()
                    })
                    .collect();
                let subs: Vec<Vec<NoiSubgraph>> = nois
                    .iter()
                    .map(|c| c.iter().map(|s| extract_noi_subgraph(&g, s, 1).unwrap()).collect())
                    .collect();
                let supports: Vec<Vec<SupportExample<'_>>> = nois
                    .iter()
                    .zip(&subs)
                    .map(|(ns, ss)| {
                        ns.iter()
                            .zip(ss)
                            .map(|(noi, subgraph)| SupportExample {
                                graph: &g,
                                subgraph,
                                noi,
                            })
                            .collect()
                    })
                    .collect();
                let fs = build_few_shot(&g, &sub, &noi, &supports, "prompt node. task", &classes).unwrap();
                let input_nodes = qn + subs.iter().flatten().map(|s| s.num_nodes()).sum::<usize>();
                let input_edges = qe + subs.iter().flatten().map(|s| s.edges.len()).sum::<usize>();
                let support_targets: usize = nois.iter().flatten().map(|s| s.targets.len()).sum();
                checked += 1;
                if fs.num_nodes() - input_nodes != 1 + n * k + n
                    || fs.edges.len() - input_edges != 2 * t + 2 * n + 2 * support_targets + n * k
                {
                    failures.push(format!("few-shot N={n} K={k} |T|={t}"));
                }
            }
        }
    }
    let t = start.elapsed();
    verdict(
        failures.is_empty() && within(t, 5.0),
        format!(
            "{checked} graphs, {} violations{}, {:.2}s (limit 5s)",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default(),
            t.as_secs_f64()
        ),
    )
}

fn gradient_check_criterion() -> Verdict {
    let start = Instant::now();
    let mut r = rng(303);
    let g = random_graph(&mut r, 10, 2, 0.3);
    let noi = Noi::node(0);
    let sub = extract_noi_subgraph(&g, &noi, 1).unwrap();
    let shot_nois = [Noi::node(3), Noi::node(7)];
    let shot_subs: Vec<NoiSubgraph> = shot_nois
        .iter()
        .map(|s| extract_noi_subgraph(&g, s, 1).unwrap())
        .collect();
    let supports: Vec<Vec<SupportExample<'_>>> = shot_nois
        .iter()
        .zip(&shot_subs)
        .map(|(noi, subgraph)| {
            vec![SupportExample {
                graph: &g,
                subgraph,
                noi,
            }]
        })
        .collect();
    let classes = vec![
        "prompt node. first class".to_string(),
        "prompt node. second class".to_string(),
    ];
    let full = build_few_shot(&g, &sub, &noi, &supports, "prompt node. task", &classes).unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for mode in [
        AblationMode::Full,
        AblationMode::NoNoiPromptNode,
        AblationMode::NoClassNode,
    ] {
        let pg = ofa_core::prompt::apply_ablation(&full, mode).unwrap();
        let table = table_for(&pg, 4, 3);
        let params = params_for(&mut r, &g, 4, 2, mode);
        let enc = EncodedGraph::new(&pg, &table, &params).unwrap();
        let rep = gradient_check(&params, &enc, &[0.0, 1.0], 1e-5);
        pass &= rep.max_rel < 1e-4;
        lines.push(format!(
            "{mode}: {} entries in {} groups, max rel {:.2e}",
            rep.checked,
            rep.groups.len(),
            rep.max_rel
        ));
    }
    let t = start.elapsed();
    verdict(
        pass && within(t, 60.0),
        format!("{}; {:.2}s (limit 60s)", lines.join("; "), t.as_secs_f64()),
    )
}

fn forward_oracle() -> Verdict {
    let start = Instant::now();
    let mut r = rng(404);
    let modes = [
        AblationMode::Full,
        AblationMode::NoNoiPromptNode,
        AblationMode::NoClassNode,
    ];
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let case = random_case(&mut r, &modes);
        let d = r.gen_range(2..=6);
        let table = table_for(&case.prompted, d, r.gen());
        let layers = r.gen_range(1..=3);
        let params = params_for(&mut r, &case.graph, d, layers, case.mode);
        let enc = EncodedGraph::new(&case.prompted, &table, &params).unwrap();
        let got = forward::<f64, Rng64>(&params, &enc, None).unwrap().scores;
        let want = oracle_forward(&case.prompted, &table, &params);
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    let t = start.elapsed();
    verdict(
        worst < 1e-6 && within(t, 30.0),
        format!(
            "100 graphs, max |diff| {worst:.2e}, {:.2}s (limit 30s)",
            t.as_secs_f64()
        ),
    )
}

fn class_permutation() -> Verdict {
    let mut r = rng(505);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = r.gen_range(3..=12);
        let g = random_graph(&mut r, n, 2, 0.2);
        let classes = r.gen_range(2..=5);
        let k = r.gen_range(0..=2);
        let noi = noi_with(&mut r, n, 1);
        let sub = extract_noi_subgraph(&g, &noi, 1).unwrap();
        let texts: Vec<String> = (0..classes).map(|c| format!("prompt node. option {c}")).collect();
        let shot_nois: Vec<Vec<Noi>> = (0..if k > 0 { classes } else { 0 })
            .map(|_| (0..k).map(|_| noi_with(&mut r, n, 1)).collect())
            .collect();
        let shot_subs: Vec<Vec<NoiSubgraph>> = shot_nois
            .iter()
            .map(|c| c.iter().map(|s| extract_noi_subgraph(&g, s, 1).unwrap()).collect())
            .collect();
        let mut perm: Vec<usize> = (0..classes).collect();
        perm.shuffle(&mut r);
        let build = |order: &[usize]| {
            let t: Vec<String> = order.iter().map(|&i| texts[i].clone()).collect();
            let s: Vec<Vec<SupportExample<'_>>> = if k == 0 {
                Vec::new()
            } else {
                order
                    .iter()
                    .map(|&i| {
                        shot_nois[i]
                            .iter()
                            .zip(&shot_subs[i])
                            .map(|(noi, subgraph)| SupportExample {
                                graph: &g,
                                subgraph,
                                noi,
                            })
                            .collect()
                    })
                    .collect()
            };
            build_few_shot(&g, &sub, &noi, &s, "prompt node. pick one", &t).unwrap()
        };
        let identity: Vec<usize> = (0..classes).collect();
        let base = build(&identity);
        let permuted = build(&perm);
        let table = table_for(&base, 5, 1);
        let params = params_for(&mut r, &g, 5, 2, AblationMode::Full);
        let score = |pg| {
            let enc = EncodedGraph::new(pg, &table, &params).unwrap();
            forward::<f64, Rng64>(&params, &enc, None).unwrap().scores
        };
        let a = score(&base);
        let b = score(&permuted);
        for (pos, &orig) in perm.iter().enumerate() {
            worst = worst.max((b[pos] - a[orig]).abs());
        }
    }
    verdict(worst <= 1e-6, format!("100 cases, max |diff| {worst:.2e}"))
}

fn metric_oracles() -> Verdict {
    let mut r = rng(606);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (s, y) = random_metric_instance(&mut r, 500);
        worst = worst.max((roc_auc(&s, &y).unwrap() - oracle_auc(&s, &y)).abs());
        worst = worst.max((average_precision(&s, &y).unwrap() - oracle_ap(&s, &y)).abs());
    }
    verdict(
        worst <= 1e-9,
        format!("100 instances (<=500 points), max |diff| {worst:.2e}"),
    )
}

fn joint_config(datasets: &[Dataset], seed: u64, mode: AblationMode) -> RunConfig {
    let mut cfg = RunConfig::new(datasets.iter().map(|d| DatasetEntry::supervised(d.name())).collect());
    cfg.provider = ProviderSpec::hash(64, 0);
    cfg.layers = Some(4);
    cfg.lr = Some(2e-3);
    cfg.dropout = 0.0;
    cfg.batch_size = 32;
    cfg.epochs = Some(1000);
    cfg.max_steps = Some(500);
    cfg.hops = Hops::uniform(1);
    cfg.eval_every = 0;
    cfg.seed = seed;
    cfg.ablation = mode;
    cfg
}

/// Train accuracy per dataset after joint training, plus the step count.
fn joint_run(seed: u64, mode: AblationMode) -> (Vec<f64>, usize) {
    let datasets = synthetic::joint_suite(seed);
    let cfg = joint_config(&datasets, seed, mode);
    let table = embed_all(&datasets, &Provider::from_spec(&cfg.provider()).unwrap()).unwrap();
    let out = train::train_with(&cfg, &datasets, &table).unwrap();
    let session = Session::new(&datasets, &table, cfg.hops, mode, 1).unwrap();
    let accs = (0..datasets.len())
        .map(|d| {
            session
                .evaluate_supervised(&out.checkpoint.params, d, SplitName::Train, MetricKind::Acc)
                .unwrap()
                .value
        })
        .collect();
    (accs, out.steps)
}

fn joint_overfit() -> Verdict {
    let start = Instant::now();
    let (accs, steps) = joint_run(0, AblationMode::Full);
    let t = start.elapsed();
    let names = ["node", "link", "graph"];
    let shown: Vec<String> = accs.iter().zip(names).map(|(a, n)| format!("{n} {a:.4}")).collect();
    verdict(
        accs.iter().all(|&a| a >= 0.99) && steps <= 500 && within(t, 300.0),
        format!(
            "train acc {} after {steps} steps, {:.1}s (limit 300s)",
            shown.join(", "),
            t.as_secs_f64()
        ),
    )
}

fn cora() -> Verdict {
    let start = Instant::now();
    let raw = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/cora");
    let dir = tempfile::tempdir().unwrap();
    let ds = convert(ConvertFormat::CoraLike, &raw, dir.path(), &ConvertOptions::default()).unwrap();
    let (nodes, edges, classes) = (ds.graphs[0].num_nodes(), ds.graphs[0].num_edges(), ds.num_classes());
    let shape_ok = (nodes, edges, classes) == (2708, 10556, 7);
    let mut cfg = RunConfig::new(vec![DatasetEntry::supervised(dir.path())]);
    cfg.provider = ProviderSpec::hash(128, 0);
    cfg.layers = Some(3);
    cfg.epochs = Some(30);
    cfg.lr = Some(1e-3);
    cfg.batch_size = 64;
    cfg.hops = Hops::uniform(2);
    cfg.eval_every = 5;
    let (datasets, table) = train::prepare(&cfg).unwrap();
    let out = train::train_with(&cfg, &datasets, &table).unwrap();
    let session = Session::new(&datasets, &table, cfg.hops, cfg.ablation, 1).unwrap();
    let acc = session
        .evaluate_supervised(&out.checkpoint.params, 0, SplitName::Test, MetricKind::Acc)
        .unwrap()
        .value;
    let t = start.elapsed();
    verdict(
        shape_ok && acc >= 0.60 && within(t, 900.0),
        format!(
            "{nodes} nodes, {edges} edges, {classes} classes; test acc {acc:.4} after {} epochs (best epoch {}), {:.0}s (limit 900s)",
            cfg.epochs(),
            out.best_epoch.map_or("none".to_string(), |e| e.to_string()),
            t.as_secs_f64()
        ),
    )
}

fn zero_shot() -> Verdict {
    let start = Instant::now();
    let datasets = vec![synthetic::zero_shot_matching(200, 10, 4, 0)];
    let mut entry = DatasetEntry::episodic("syn-topics", (2, 2), (0, 0));
    entry.episodes = 2000;
    let mut cfg = RunConfig::new(vec![entry]);
    cfg.provider = ProviderSpec::hash(64, 0);
    cfg.layers = Some(3);
    cfg.lr = Some(1e-3);
    cfg.dropout = 0.0;
    cfg.epochs = Some(30);
    cfg.batch_size = 32;
    cfg.hops = Hops::uniform(1);
    let table = embed_all(&datasets, &Provider::from_spec(&cfg.provider()).unwrap()).unwrap();
    let out = train::train_with(&cfg, &datasets, &table).unwrap();
    let session = Session::new(&datasets, &table, cfg.hops, cfg.ablation, 1).unwrap();
    let split = datasets[0].manifest.label_splits.as_ref().unwrap();
    let report = session
        .evaluate_episodes(&out.checkpoint.params, 0, &split.test, (2, 2), (0, 0), 500, 7)
        .unwrap();
    let t = start.elapsed();
    verdict(
        report.value >= 0.9,
        format!(
            "2-way K=0 on {} unseen classes ({} train classes): acc {:.4} over 500 episodes, {:.0}s",
            split.test.len(),
            split.train.len(),
            report.value,
            t.as_secs_f64()
        ),
    )
}

fn ablation_direction() -> Verdict {
    let mut rows = Vec::new();
    let mut pass = true;
    for seed in 0..3 {
        let mean = |a: Vec<f64>| a.iter().sum::<f64>() / a.len() as f64;
        let full = mean(joint_run(seed, AblationMode::Full).0);
        let no_noi = mean(joint_run(seed, AblationMode::NoNoiPromptNode).0);
        pass &= full >= no_noi;
        rows.push(format!("seed {seed}: full {full:.4} vs no-noi-prompt {no_noi:.4}"));
    }
    verdict(pass, rows.join("; "))
}

fn main() {
    let checks: [Check; 10] = [
        ("subgraph-oracle", subgraph_oracle),
        ("prompt-counting", counting_identities),
        ("gradient-check", gradient_check_criterion),
        ("forward-oracle", forward_oracle),
        ("class-permutation", class_permutation),
        ("metric-oracles", metric_oracles),
        ("joint-overfit", joint_overfit),
        ("cora-desk-scale", cora),
        ("zero-shot-matching", zero_shot),
        ("ablation-direction", ablation_direction),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in checks {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        ran += 1;
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {}/{ran} passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
