//! Acceptance checks. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use clom_core::annotation::parse_trial;
use clom_core::corpusgen::{generate_corpus, random_state, random_trials, GeneratorConfig, GroundTruth, GroundTruthEdge};
use clom_core::export::{export_dot, DotOptions};
use clom_core::graph::{build_graph, filter_graph, rank_strategies, subgraph_by_label, BuildOptions};
use clom_core::model::{CloMGraph, ManipulationPrimitive, MotionLabel, Occurrence, SceneState, Trial};
use clom_core::motion::{detect_clap, kinematics, MotionSlice, MotionTrack};
use clom_core::stateparse::{parse_state, StateParser, Vocabulary};
use clom_core::symmetry::{canonicalize, mirror_lr, rotate_180, SymmetryConfig};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn st(s: &str) -> SceneState {
    parse_state(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

fn label_key(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn paperlike_files() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(data_dir().join("paperlike"))
        .expect("paperlike corpus present")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "clom"))
        .collect();
    files.sort();
    files
}

fn paperlike_graph() -> CloMGraph {
    let trials: Vec<Trial> = paperlike_files()
        .iter()
        .map(|p| parse_trial(&std::fs::read_to_string(p).unwrap()).unwrap())
        .collect();
    build_graph(&trials, &BuildOptions::default()).0
}

fn occ(n: usize) -> Occurrence {
    Occurrence {
        task_id: "t".into(),
        subject_id: format!("s{n}"),
        trial_index: 1,
        segment_index: n,
    }
}

fn add(g: &mut CloMGraph, o: &SceneState, d: &SceneState, label: &str, times: usize) {
    let p = ManipulationPrimitive::new(o.clone(), d.clone(), MotionLabel::new(label).unwrap()).unwrap();
    let base = g.edge(&p).map_or(0, |r| r.multiplicity());
    for i in 0..times {
        g.add_occurrence(p.clone(), occ(base + i));
    }
}

// 1
fn grammar_round_trip() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let parser = StateParser::new(Vocabulary::with_extras(["ML", "MR", "C3"]));
    let mut failures = 0;
    for _ in 0..10_000 {
        let s = random_state(&mut rng, &parser.vocabulary);
        let text = s.to_string();
        match parser.parse_state(&text) {
            Ok(back) if back == s && back.to_string() == text => {}
            _ => failures += 1,
        }
    }
    let elapsed = t0.elapsed();
    ensure!(failures == 0, "{failures} of 10000 states failed to round-trip");
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("10000 states, 0 failures, {:.2?}", elapsed))
}

/// Distinct-triple tally written without the graph module: canonical texts,
/// adjacent duplicates collapsed, labels folded by hand.
fn oracle_tally(trials: &[Trial], cfg: &SymmetryConfig) -> HashMap<(String, String, String), usize> {
    let mut tally = HashMap::new();
    for t in trials {
        let mut seq: Vec<(String, Option<String>)> = Vec::new();
        for seg in &t.segments {
            let c = canonicalize(&seg.state, cfg).to_string();
            let action = seg.action.as_ref().map(|a| a.as_str().to_string());
            match seq.last_mut() {
                Some(last) if last.0 == c => last.1 = action,
                _ => seq.push((c, action)),
            }
        }
        for w in seq.windows(2) {
            let label = label_key(w[0].1.as_deref().expect("non-final segment has an action"));
            *tally.entry((w[0].0.clone(), w[1].0.clone(), label)).or_insert(0) += 1;
        }
    }
    tally
}

// 2
fn oracle_equivalence() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..100 {
        let n_trials = rng.gen_range(0..=50);
        let n_states = rng.gen_range(2..=12);
        let trials = random_trials(&mut rng, n_trials, n_states, &Vocabulary::default());
        let cfg = if i % 2 == 0 { SymmetryConfig::IDENTITY } else { SymmetryConfig::default() };
        let (g, _) = build_graph(&trials, &BuildOptions { symmetry: cfg, task_filter: None });
        let tally = oracle_tally(&trials, &cfg);
        let nodes: BTreeSet<&String> = tally.keys().flat_map(|(o, d, _)| [o, d]).collect();
        ensure!(g.node_count() == nodes.len(), "corpus {i}: {} nodes, oracle {}", g.node_count(), nodes.len());
        ensure!(g.edge_count() == tally.len(), "corpus {i}: {} edges, oracle {}", g.edge_count(), tally.len());
        for (p, r) in g.edges() {
            let key = (p.origin.to_string(), p.destination.to_string(), label_key(p.motion.as_str()));
            ensure!(
                tally.get(&key) == Some(&r.multiplicity()),
                "corpus {i}: edge {key:?} has multiplicity {}, oracle {:?}",
                r.multiplicity(),
                tally.get(&key)
            );
        }
        ensure!(g.total_multiplicity() == tally.values().sum::<usize>(), "corpus {i}: total multiplicity");
    }
    let elapsed = t0.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("100 corpora match, {:.2?}", elapsed))
}

fn check_filter_laws(g: &CloMGraph) -> Result<(), String> {
    let max = g.edges().values().map(|r| r.multiplicity()).max().unwrap_or(0);
    for k in 0..=max + 1 {
        let f = filter_graph(g, k);
        ensure!(filter_graph(&f, k) == f, "not idempotent at {k}");
        let next = filter_graph(g, k + 1);
        ensure!(
            next.edges().keys().all(|p| f.edges().contains_key(p)) && next.nodes().is_subset(f.nodes()),
            "not monotone between {k} and {}",
            k + 1
        );
        for n in f.nodes() {
            ensure!(
                f.edges().keys().any(|p| &p.origin == n || &p.destination == n),
                "isolated node `{n}` at {k}"
            );
        }
        for (p, r) in g.edges() {
            let keep = r.multiplicity() >= k.max(1);
            ensure!(f.edges().contains_key(p) == keep, "edge {p} wrongly kept/dropped at {k}");
            if keep {
                ensure!(f.edges()[p] == *r, "edge {p} record changed at {k}");
            }
        }
    }
    Ok(())
}

// 3
fn filter_laws() -> Outcome {
    let paperlike = paperlike_graph();
    check_filter_laws(&paperlike).map_err(|e| format!("paperlike: {e}"))?;
    let three = filter_graph(&paperlike, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..50 {
        let n_states = rng.gen_range(3..=10);
        let trials = random_trials(&mut rng, 40, n_states, &Vocabulary::default());
        let (g, _) = build_graph(&trials, &BuildOptions::default());
        check_filter_laws(&g).map_err(|e| format!("random graph {i}: {e}"))?;
    }
    Ok(format!(
        "paperlike {}/{} -> {}/{} at support 3, plus 50 random graphs",
        paperlike.node_count(),
        paperlike.edge_count(),
        three.node_count(),
        three.edge_count()
    ))
}

// 4
fn threshold_reproduction() -> Outcome {
    let a = st("Pie | - | Crumpled");
    let b = st("PP | LC | Crumpled");
    let mut g = CloMGraph::new(24, SymmetryConfig::default());
    for c in 1..=24 {
        add(&mut g, &a, &b, &format!("motion {c:02}"), c);
    }
    let dot = export_dot(&g, &DotOptions::default());
    let mut colors = BTreeMap::new();
    for line in dot.lines().filter(|l| l.contains("->")) {
        let count: usize = line
            .split("motion ")
            .nth(1)
            .and_then(|r| r.get(..2))
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| format!("unparsable edge line {line}"))?;
        let color = line
            .split("color=")
            .nth(1)
            .and_then(|r| r.split([',', ']']).next())
            .ok_or_else(|| format!("no color in {line}"))?;
        colors.insert(count, color.to_string());
    }
    ensure!(colors.len() == 24, "expected 24 edges, found {}", colors.len());
    for (c, color) in &colors {
        let want = if *c >= 12 {
            "red"
        } else if *c >= 6 {
            "orange"
        } else {
            "black"
        };
        ensure!(color == want, "count {c}: {color}, expected {want}");
    }
    let first_orange = colors.iter().find(|(_, v)| *v == "orange").map(|(c, _)| *c);
    let first_red = colors.iter().find(|(_, v)| *v == "red").map(|(c, _)| *c);
    ensure!(first_orange == Some(6) && first_red == Some(12), "switch points {first_orange:?}/{first_red:?}");
    Ok("orange from 6, red from 12 at trial_count 24".into())
}

// 5
fn symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vocab = Vocabulary::with_extras(["ML"]);
    let configs: Vec<SymmetryConfig> = SymmetryConfig::all_combinations().collect();
    ensure!(configs.len() == 16, "expected 16 configurations");
    for i in 0..10_000 {
        let s = random_state(&mut rng, &vocab);
        for cfg in &configs {
            let c = canonicalize(&s, cfg);
            ensure!(canonicalize(&c, cfg) == c, "state {i} `{s}`: not idempotent under {cfg:?}");
            let mut images = Vec::new();
            if cfg.mirror_lr {
                images.push(mirror_lr(&s));
            }
            if cfg.rotate_180 {
                images.push(rotate_180(&s));
            }
            if cfg.mirror_lr && cfg.rotate_180 {
                images.push(mirror_lr(&rotate_180(&s)));
            }
            for img in images {
                ensure!(canonicalize(&img, cfg) == c, "state {i} `{s}`: orbit member `{img}` differs under {cfg:?}");
            }
        }
    }
    let cfg = SymmetryConfig::default();
    // one corner held: left and right are the same situation
    let (l, r) = (st("PP | LC@LH | Crumpled"), st("PP | RC@RH | Crumpled"));
    ensure!(canonicalize(&l, &cfg) == canonicalize(&r, &cfg), "single-corner merge failed");
    ensure!(
        canonicalize(&l, &SymmetryConfig::IDENTITY) != canonicalize(&r, &SymmetryConfig::IDENTITY),
        "identity config merged single-corner states"
    );
    // two points along the same edge, on either side
    let (l, r) = (st("2PP | LC+FL | Flat"), st("2PP | RC+FR | Flat"));
    ensure!(canonicalize(&l, &cfg) == canonicalize(&r, &cfg), "same-edge two-point merge failed");
    ensure!(
        canonicalize(&l, &SymmetryConfig::IDENTITY) != canonicalize(&r, &SymmetryConfig::IDENTITY),
        "identity config merged same-edge states"
    );
    Ok("10000 states x 16 configs; both side merges hold".into())
}

fn slice(times: Vec<f64>, left: Vec<[f64; 3]>, right: Vec<[f64; 3]>) -> MotionSlice {
    MotionSlice {
        segment_index: 0,
        times,
        left,
        right,
        dt: 0.01,
    }
}

// 6
fn kinematics_oracles() -> Outcome {
    let (a, f, rate) = (0.3, 0.5, 100.0);
    let times: Vec<f64> = (0..=1000).map(|i| i as f64 / rate).collect();
    let pos = |t: f64| [a * (2.0 * std::f64::consts::PI * f * t).sin(), 0.2, 1.0];
    let s = kinematics(&slice(times.clone(), times.iter().map(|&t| pos(t)).collect(), times.iter().map(|&t| pos(t)).collect()), 2)
        .map_err(|e| e.to_string())?;
    let v_peak = 2.0 * std::f64::consts::PI * f * a;
    let v_avg = 2.0 / std::f64::consts::PI * v_peak;
    let rel = |x: f64, y: f64| (x - y).abs() / y;
    ensure!(rel(s.left.v_max, v_peak) <= 0.03, "v_max {} vs {v_peak}", s.left.v_max);
    ensure!(rel(s.left.v_mean, v_avg) <= 0.03, "v_mean {} vs {v_avg}", s.left.v_mean);

    let constant = kinematics(&slice(times.clone(), vec![[0.1, 0.2, 0.3]; times.len()], vec![[-0.4, 0.5, 1.1]; times.len()]), 2)
        .map_err(|e| e.to_string())?;
    for k in [constant.left, constant.right] {
        ensure!(k.v_max == 0.0 && k.v_mean == 0.0 && k.a_max == 0.0 && k.a_mean == 0.0, "constant track moved: {k:?}");
    }

    let center = 3.337;
    let bump = |t: f64| 0.05 * (-(t - center).powi(2) / (2.0 * 0.02f64.powi(2))).exp();
    let track = MotionTrack::new(
        times.clone(),
        times.iter().map(|&t| [bump(t) + 0.1 * t, 0.2, 1.0]).collect(),
        times.iter().map(|&t| [-bump(t), 0.3, 1.0]).collect(),
    )
    .map_err(|e| e.to_string())?;
    let (sync, _) = detect_clap(&track, None).map_err(|e| e.to_string())?;
    ensure!((sync.peak_time - center).abs() <= 1.0 / rate, "clap at {} vs {center}", sync.peak_time);
    Ok(format!(
        "v_max {:.4} (oracle {v_peak:.4}), v_mean {:.4} (oracle {v_avg:.4}), clap {:.2} s",
        s.left.v_max, s.left.v_mean, sync.peak_time
    ))
}

// 7
fn recovery() -> Outcome {
    let states = [
        "Pie | - | Crumpled",
        "PP | LC | Crumpled",
        "2PP | LC+RC | Crumpled",
        "2PP | LC+RC | Flat",
        "Pie | - | Flat",
    ]
    .map(st);
    let e = |o: usize, d: usize, label: &str, prob: f64| GroundTruthEdge {
        primitive: ManipulationPrimitive::new(states[o].clone(), states[d].clone(), MotionLabel::new(label).unwrap()).unwrap(),
        prob,
    };
    let gt = GroundTruth {
        task_id: "chain".into(),
        cloth: None,
        start: vec![(states[0].clone(), 1.0)],
        edges: vec![
            e(0, 1, "Grasp corner", 1.0),
            e(1, 2, "Trace edge", 0.6),
            e(1, 0, "Release", 0.4),
            e(2, 3, "Unfold in the air", 1.0),
            e(3, 4, "Place flat on table", 0.7),
            e(3, 2, "Lift", 0.3),
        ],
        absorbing: BTreeSet::from([states[4].clone()]),
    };
    let seed = 20_241_017;
    let cfg = GeneratorConfig {
        n_trials: 200,
        seed,
        mirror_probability: 0.5,
        annotate_hands: true,
        ..Default::default()
    };
    let corpus = generate_corpus(&gt, &cfg).map_err(|e| e.to_string())?;
    let trials: Vec<Trial> = corpus
        .iter()
        .map(|c| parse_trial(&c.annotation).map_err(|e| format!("{}: {e}", c.file_stem)))
        .collect::<Result<_, _>>()?;
    let (g, _) = build_graph(&trials, &BuildOptions::default());
    let truth: BTreeSet<&ManipulationPrimitive> = gt.edges.iter().map(|e| &e.primitive).collect();
    let got: BTreeSet<&ManipulationPrimitive> = g.edges().keys().collect();
    ensure!(got == truth, "edge sets differ: recovered {got:?}");
    let probs = gt.transition_probabilities();
    let mut worst: f64 = 0.0;
    for (p, r) in g.edges() {
        let empirical = r.multiplicity() as f64 / g.out_multiplicity(&p.origin) as f64;
        let dev = (empirical - probs[p]).abs() / probs[p];
        worst = worst.max(dev);
        ensure!(dev <= 0.10, "{p}: empirical {empirical:.3} vs {:.3}", probs[p]);
    }
    Ok(format!("seed {seed}: edge set exact, worst relative deviation {:.1}%", worst * 100.0))
}

// 8
fn trace_edge_subgraph() -> Outcome {
    let [a, b, c, d, e, f] = [
        "Pie | - | Crumpled",
        "PP | LC | Crumpled",
        "2PP | LC+RC | Crumpled",
        "2PP | LC+RC | Flat",
        "Pie | - | Flat",
        "2PP+Pie | FL+FR | SemiFolded",
    ]
    .map(st);
    let mut g = CloMGraph::new(6, SymmetryConfig::default());
    add(&mut g, &a, &b, "Grasp corner", 4);
    add(&mut g, &b, &c, "Trace edge", 3);
    add(&mut g, &a, &c, "Trace  EDGE", 1);
    add(&mut g, &c, &d, "Unfold in the air", 4);
    add(&mut g, &d, &e, "Place flat on table", 2);
    add(&mut g, &d, &f, "Fold on table", 2);
    add(&mut g, &e, &f, "Fold on table", 2);
    add(&mut g, &f, &a, "Release", 1);
    add(&mut g, &b, &a, "Release", 1);

    let triples = |g: &CloMGraph| -> BTreeSet<(SceneState, SceneState, String)> {
        g.edges()
            .keys()
            .map(|p| (p.origin.clone(), p.destination.clone(), p.motion.key().to_string()))
            .collect()
    };
    let t = |o: &SceneState, d: &SceneState, l: &str| (o.clone(), d.clone(), l.to_string());

    // D absorbing: the closure stops there
    let (sub, _) = subgraph_by_label(&g, "trace edge", &BTreeSet::from([d.clone()]));
    let want = BTreeSet::from([t(&b, &c, "trace edge"), t(&a, &c, "trace edge"), t(&c, &d, "unfold in the air")]);
    ensure!(triples(&sub) == want, "absorbing closure {:?}", triples(&sub));
    ensure!(sub.nodes() == &BTreeSet::from([a.clone(), b.clone(), c.clone(), d.clone()]), "absorbing nodes");
    ensure!(sub.edges().values().zip(sub.edges().keys()).all(|(r, p)| g.edges()[p] == *r), "records altered");

    // nothing absorbing: everything reachable from C, which is the whole graph
    let (full, _) = subgraph_by_label(&g, "Trace edge", &BTreeSet::new());
    ensure!(triples(&full) == triples(&g), "open closure {:?}", triples(&full));

    // F absorbing: the release back to A is never followed, so A's own
    // out-edges stay out even though A starts a seed edge
    let (cut, _) = subgraph_by_label(&g, "trace edge", &BTreeSet::from([f.clone()]));
    let want = BTreeSet::from([
        t(&b, &c, "trace edge"),
        t(&a, &c, "trace edge"),
        t(&c, &d, "unfold in the air"),
        t(&d, &e, "place flat on table"),
        t(&d, &f, "fold on table"),
        t(&e, &f, "fold on table"),
    ]);
    ensure!(triples(&cut) == want, "closure stopping at F {:?}", triples(&cut));
    Ok("3 closures match hand enumeration".into())
}

#[derive(Clone)]
struct OraclePath {
    edges: Vec<ManipulationPrimitive>,
    likelihood: BigRational,
}

fn oracle_paths(g: &CloMGraph, start: &SceneState, goal: &SceneState) -> Vec<OraclePath> {
    fn dfs(
        g: &CloMGraph,
        at: &SceneState,
        goal: &SceneState,
        visited: &mut Vec<SceneState>,
        path: &mut Vec<ManipulationPrimitive>,
        out: &mut Vec<Vec<ManipulationPrimitive>>,
    ) {
        if at == goal {
            out.push(path.clone());
            return;
        }
        for p in g.edges().keys().filter(|p| &p.origin == at) {
            if visited.contains(&p.destination) {
                continue;
            }
            visited.push(p.destination.clone());
            path.push(p.clone());
            dfs(g, &p.destination, goal, visited, path, out);
            path.pop();
            visited.pop();
        }
    }
    let mut raw = Vec::new();
    if start != goal {
        dfs(g, start, goal, &mut vec![start.clone()], &mut Vec::new(), &mut raw);
    }
    raw.into_iter()
        .map(|edges| {
            let mut likelihood = BigRational::one();
            for p in &edges {
                let total: usize = g.edges().iter().filter(|(q, _)| q.origin == p.origin).map(|(_, r)| r.multiplicity()).sum();
                likelihood *= BigRational::new(BigInt::from(g.edges()[p].multiplicity()), BigInt::from(total));
            }
            OraclePath { edges, likelihood }
        })
        .collect()
}

fn oracle_order(a: &OraclePath, b: &OraclePath) -> Ordering {
    b.likelihood
        .cmp(&a.likelihood)
        .then(a.edges.len().cmp(&b.edges.len()))
        .then_with(|| {
            let ka: Vec<String> = a.edges.iter().map(|e| label_key(e.motion.as_str())).collect();
            let kb: Vec<String> = b.edges.iter().map(|e| label_key(e.motion.as_str())).collect();
            ka.cmp(&kb)
        })
        .then_with(|| a.edges.cmp(&b.edges))
}

// 9
fn strategy_ranking() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let labels = ["Grasp corner", "Trace edge", "Fold on table", "Release"];
    let mut graphs = 0;
    let mut queries = 0;
    let mut paths_checked = 0;
    for _ in 0..150 {
        let n = rng.gen_range(2..=8);
        let mut pool: Vec<SceneState> = Vec::new();
        while pool.len() < n {
            let s = random_state(&mut rng, &Vocabulary::default());
            if !pool.contains(&s) {
                pool.push(s);
            }
        }
        let mut g = CloMGraph::new(10, SymmetryConfig::default());
        for _ in 0..rng.gen_range(1..=2 * n) {
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if i != j {
                add(&mut g, &pool[i], &pool[j], labels[rng.gen_range(0..labels.len())], rng.gen_range(1..=4));
            }
        }
        graphs += 1;
        let nodes: Vec<SceneState> = g.nodes().iter().cloned().collect();
        let mut pairs: Vec<(usize, usize)> = (0..nodes.len()).flat_map(|i| (0..nodes.len()).map(move |j| (i, j))).collect();
        pairs.shuffle(&mut rng);
        for (i, j) in pairs.into_iter().take(6) {
            let (s, t) = (&nodes[i], &nodes[j]);
            let mut want = oracle_paths(&g, s, t);
            want.sort_by(oracle_order);
            let got = rank_strategies(&g, s, t, usize::MAX);
            ensure!(got.len() == want.len(), "{} paths, oracle {}", got.len(), want.len());
            for (x, y) in got.iter().zip(&want) {
                ensure!(x.edges == y.edges && x.likelihood == y.likelihood, "order differs from `{s}` to `{t}`");
            }
            let top = rank_strategies(&g, s, t, 3);
            ensure!(top.len() == want.len().min(3), "top-3 truncation");
            ensure!(top.iter().zip(&got).all(|(a, b)| a == b), "top-3 is not a prefix");
            queries += 1;
            paths_checked += want.len();
        }
    }
    let paperlike = paperlike_graph();
    let (from, to) = (st("Pie | - | Crumpled"), st("Pie | - | Folded"));
    let mut want = oracle_paths(&paperlike, &from, &to);
    want.sort_by(oracle_order);
    let got = rank_strategies(&paperlike, &from, &to, usize::MAX);
    ensure!(
        got.len() == want.len() && got.iter().zip(&want).all(|(x, y)| x.edges == y.edges && x.likelihood == y.likelihood),
        "paperlike plan differs from enumeration"
    );
    Ok(format!(
        "{graphs} graphs, {queries} queries, {paths_checked} paths; paperlike plan {} paths",
        got.len()
    ))
}

fn run_stage(args: &[&str], input: Option<&[u8]>) -> Result<Vec<u8>, String> {
    let mut child = Command::new(env!("CARGO_BIN_EXE_clom"))
        .args(args)
        .env_remove("CLOM_CONFIG")
        .stdin(if input.is_some() { Stdio::piped() } else { Stdio::null() })
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    if let Some(bytes) = input {
        child.stdin.take().unwrap().write_all(bytes).map_err(|e| e.to_string())?;
    }
    let out = child.wait_with_output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("clom {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn pipeline(files: &[PathBuf], motion_dir: &Path) -> Result<Vec<u8>, String> {
    let mut args = vec!["build".to_string()];
    args.extend(files.iter().map(|p| p.display().to_string()));
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let g = run_stage(&args, None)?;
    let g = run_stage(&["filter", "--min-support", "3"], Some(&g))?;
    let dir = motion_dir.display().to_string();
    let g = run_stage(&["stats", "--motion-dir", &dir], Some(&g))?;
    run_stage(&["export-dot"], Some(&g))
}

// 10
fn determinism() -> Outcome {
    let files = paperlike_files();
    let dir = data_dir().join("paperlike");
    let first = pipeline(&files, &dir)?;
    let second = pipeline(&files, &dir)?;
    ensure!(first == second, "two runs differ");
    let mut reversed = files.clone();
    reversed.reverse();
    ensure!(pipeline(&reversed, &dir)? == first, "reversed input order differs");
    let mut shuffled = files.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(10));
    ensure!(pipeline(&shuffled, &dir)? == first, "shuffled input order differs");
    let text = String::from_utf8(first).map_err(|e| e.to_string())?;
    ensure!(text.contains("color=red") && text.contains("LH v "), "DOT lacks colored, annotated edges");
    Ok(format!("4 runs byte-identical ({} bytes of DOT)", text.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("grammar round-trip", grammar_round_trip),
        ("oracle equivalence", oracle_equivalence),
        ("filter laws", filter_laws),
        ("threshold reproduction", threshold_reproduction),
        ("symmetry", symmetry),
        ("kinematics", kinematics_oracles),
        ("recovery", recovery),
        ("trace-edge subgraph", trace_edge_subgraph),
        ("strategy ranking", strategy_ranking),
        ("end-to-end determinism", determinism),
    ];
    let t0 = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{:.2?}]", i + 1, start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{:.2?}]", i + 1, start.elapsed());
            }
        }
    }
    println!("{} of {} criteria passed in {:.2?}", criteria.len() - failed, criteria.len(), t0.elapsed());
    if failed > 0 {
        std::process::exit(1);
    }
}
