//! Graph construction from trials and queries over the result.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::diag::Warning;
use crate::model::{CloMGraph, ManipulationPrimitive, Occurrence, SceneState, Trial};
use crate::symmetry::{canonicalize_trial, SymmetryConfig};

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    pub symmetry: SymmetryConfig,
    /// When set, only trials whose task id is listed are ingested.
    pub task_filter: Option<Vec<String>>,
}

/// Counts every distinct (origin, destination, label) triple across the
/// canonicalized trials. An empty corpus yields an empty graph and a warning.
pub fn build_graph(trials: &[Trial], opts: &BuildOptions) -> (CloMGraph, Vec<Warning>) {
    let selected: Vec<&Trial> = trials
        .iter()
        .filter(|t| {
            opts.task_filter
                .as_ref()
                .is_none_or(|tasks| tasks.contains(&t.task_id))
        })
        .collect();
    if selected.is_empty() {
        return (CloMGraph::new(0, opts.symmetry), vec![Warning::EmptyCorpus]);
    }
    let mut warnings = Vec::new();
    let graph = selected
        .into_iter()
        .map(|t| trial_graph(t, &opts.symmetry, &mut warnings))
        .fold(CloMGraph::new(0, opts.symmetry), CloMGraph::merge);
    (graph, warnings)
}

fn trial_graph(t: &Trial, symmetry: &SymmetryConfig, warnings: &mut Vec<Warning>) -> CloMGraph {
    let (canon, report) = canonicalize_trial(t, symmetry);
    if !report.is_empty() {
        warnings.push(Warning::SegmentsMerged {
            trial: t.key(),
            count: report.merges.len(),
        });
    }
    if canon.segments.len() < 2 {
        warnings.push(Warning::TrialCollapsed { trial: t.key() });
    }
    let mut g = CloMGraph::new(1, *symmetry);
    for (i, w) in canon.segments.windows(2).enumerate() {
        let Some(motion) = w[0].action.clone() else {
            continue;
        };
        let Some(p) = ManipulationPrimitive::new(w[0].state.clone(), w[1].state.clone(), motion) else {
            continue;
        };
        g.add_occurrence(p, Occurrence {
            task_id: t.task_id.clone(),
            subject_id: t.subject_id.clone(),
            trial_index: t.trial_index,
            segment_index: i,
        });
    }
    g
}

/// Keeps edges observed at least `min_support` times (0 behaves as 1) and
/// the nodes they touch.
pub fn filter_graph(g: &CloMGraph, min_support: usize) -> CloMGraph {
    let mut out = CloMGraph::new(g.trial_count(), g.symmetry());
    out.edges = g
        .edges()
        .iter()
        .filter(|(_, r)| r.multiplicity() >= min_support.max(1))
        .map(|(p, r)| (p.clone(), r.clone()))
        .collect();
    out.prune_isolated();
    out
}

/// Edges whose label matches `label`, plus everything reachable forward from
/// their destinations. Nodes in `absorbing` are kept but never expanded.
pub fn subgraph_by_label(
    g: &CloMGraph,
    label: &str,
    absorbing: &BTreeSet<SceneState>,
) -> (CloMGraph, Vec<Warning>) {
    let mut out = CloMGraph::new(g.trial_count(), g.symmetry());
    let seeds: Vec<&ManipulationPrimitive> = g.edges().keys().filter(|p| p.motion.matches(label)).collect();
    if seeds.is_empty() {
        return (
            out,
            vec![Warning::LabelNotFound {
                label: label.to_string(),
            }],
        );
    }
    let mut queue: VecDeque<&SceneState> = VecDeque::new();
    let mut expanded: BTreeSet<&SceneState> = BTreeSet::new();
    let mut keep: BTreeSet<&ManipulationPrimitive> = BTreeSet::new();
    for p in seeds {
        keep.insert(p);
        queue.push_back(&p.destination);
    }
    while let Some(node) = queue.pop_front() {
        if absorbing.contains(node) || !expanded.insert(node) {
            continue;
        }
        for (p, _) in g.out_edges(node) {
            keep.insert(p);
            queue.push_back(&p.destination);
        }
    }
    out.edges = keep
        .into_iter()
        .map(|p| (p.clone(), g.edges()[p].clone()))
        .collect();
    out.prune_isolated();
    (out, Vec::new())
}

/// Empirical probability of taking `p` when leaving its origin:
/// multiplicity over the origin's total out-multiplicity.
pub fn transition_probability(g: &CloMGraph, p: &ManipulationPrimitive) -> Option<BigRational> {
    let m = g.edge(p)?.multiplicity();
    let total = g.out_multiplicity(&p.origin);
    Some(BigRational::new(BigInt::from(m), BigInt::from(total)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyPath {
    pub edges: Vec<ManipulationPrimitive>,
    /// Product of the empirical transition probabilities along the path.
    pub likelihood: BigRational,
    /// Smallest edge multiplicity on the path.
    pub bottleneck_support: usize,
}

impl StrategyPath {
    pub fn length(&self) -> usize {
        self.edges.len()
    }

    pub fn likelihood_f64(&self) -> f64 {
        self.likelihood.to_f64().unwrap_or(0.0)
    }

    /// Ranking order: likelier first, then shorter, then by label sequence,
    /// then by the full edge sequence.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .likelihood
            .cmp(&self.likelihood)
            .then(self.length().cmp(&other.length()))
            .then_with(|| {
                let a = self.edges.iter().map(|e| e.motion.key());
                let b = other.edges.iter().map(|e| e.motion.key());
                a.cmp(b)
            })
            .then_with(|| self.edges.cmp(&other.edges))
    }
}

#[derive(Debug, Clone)]
pub struct RankOptions {
    pub k: usize,
    /// Stop after this many complete start-to-goal paths.
    pub max_paths: usize,
}

impl RankOptions {
    pub const DEFAULT_MAX_PATHS: usize = 10_000;

    pub fn top(k: usize) -> Self {
        Self {
            k,
            max_paths: Self::DEFAULT_MAX_PATHS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub paths: Vec<StrategyPath>,
    /// Number of complete paths enumerated before ranking.
    pub enumerated: usize,
    /// True when enumeration hit `max_paths`.
    pub truncated: bool,
}

/// Top `k` simple paths from `start` to `goal`. Empty when unreachable or
/// when `start == goal`.
pub fn rank_strategies(g: &CloMGraph, start: &SceneState, goal: &SceneState, k: usize) -> Vec<StrategyPath> {
    rank_strategies_with(g, start, goal, &RankOptions::top(k)).paths
}

pub fn rank_strategies_with(
    g: &CloMGraph,
    start: &SceneState,
    goal: &SceneState,
    opts: &RankOptions,
) -> Ranking {
    let mut ranking = Ranking {
        paths: Vec::new(),
        enumerated: 0,
        truncated: false,
    };
    if start == goal || !g.nodes().contains(start) || !g.nodes().contains(goal) {
        return ranking;
    }

    let mut out_adj: BTreeMap<&SceneState, Vec<(&ManipulationPrimitive, BigRational, usize)>> = BTreeMap::new();
    let mut in_adj: BTreeMap<&SceneState, Vec<&SceneState>> = BTreeMap::new();
    let mut totals: BTreeMap<&SceneState, usize> = BTreeMap::new();
    for (p, r) in g.edges() {
        *totals.entry(&p.origin).or_default() += r.multiplicity();
    }
    for (p, r) in g.edges() {
        let prob = BigRational::new(BigInt::from(r.multiplicity()), BigInt::from(totals[&p.origin]));
        out_adj.entry(&p.origin).or_default().push((p, prob, r.multiplicity()));
        in_adj.entry(&p.destination).or_default().push(&p.origin);
    }

    // nodes from which the goal is reachable
    let mut useful: BTreeSet<&SceneState> = BTreeSet::new();
    let mut queue = VecDeque::from([goal]);
    useful.insert(goal);
    while let Some(n) = queue.pop_front() {
        for &pred in in_adj.get(n).map(Vec::as_slice).unwrap_or(&[]) {
            if useful.insert(pred) {
                queue.push_back(pred);
            }
        }
    }
    if !useful.contains(start) {
        return ranking;
    }

    struct Search<'a> {
        out_adj: &'a BTreeMap<&'a SceneState, Vec<(&'a ManipulationPrimitive, BigRational, usize)>>,
        useful: &'a BTreeSet<&'a SceneState>,
        goal: &'a SceneState,
        max_paths: usize,
        on_path: BTreeSet<&'a SceneState>,
        edges: Vec<&'a ManipulationPrimitive>,
        found: Vec<StrategyPath>,
        truncated: bool,
    }

    impl<'a> Search<'a> {
        fn dfs(&mut self, node: &'a SceneState, likelihood: &BigRational, bottleneck: usize) {
            let Some(next) = self.out_adj.get(node) else {
                return;
            };
            for (p, prob, mult) in next {
                if self.truncated {
                    return;
                }
                let dest = &p.destination;
                if self.on_path.contains(dest) || !self.useful.contains(dest) {
                    continue;
                }
                let lik = likelihood * prob;
                let bn = bottleneck.min(*mult);
                self.edges.push(p);
                if dest == self.goal {
                    self.found.push(StrategyPath {
                        edges: self.edges.iter().map(|e| (*e).clone()).collect(),
                        likelihood: lik,
                        bottleneck_support: bn,
                    });
                    if self.found.len() >= self.max_paths {
                        self.truncated = true;
                    }
                } else {
                    self.on_path.insert(dest);
                    self.dfs(dest, &lik, bn);
                    self.on_path.remove(dest);
                }
                self.edges.pop();
            }
        }
    }

    let mut search = Search {
        out_adj: &out_adj,
        useful: &useful,
        goal,
        max_paths: opts.max_paths.max(1),
        on_path: BTreeSet::from([start]),
        edges: Vec::new(),
        found: Vec::new(),
        truncated: false,
    };
    search.dfs(start, &BigRational::one(), usize::MAX);

    ranking.enumerated = search.found.len();
    ranking.truncated = search.truncated;
    let mut paths = search.found;
    paths.sort_by(StrategyPath::rank_cmp);
    paths.truncate(opts.k);
    ranking.paths = paths;
    ranking
}

/// Size and branching measures of a graph. Ratios are taken over non-sink
/// nodes (those with at least one out-edge) and are `None` when undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityMetrics {
    pub node_count: usize,
    pub edge_count: usize,
    pub total_multiplicity: usize,
    pub sink_count: usize,
    /// Out-edges per non-sink node.
    pub mean_out_degree: Option<f64>,
    /// Shannon entropy (bits) of each non-sink node's out-edge distribution,
    /// averaged with weights proportional to the node's out-multiplicity.
    pub mean_out_entropy_bits: Option<f64>,
    pub edges_per_trial: Option<f64>,
}

impl ComplexityMetrics {
    /// Orders by node count, then edge count, then branching entropy.
    pub fn compare_complexity(&self, other: &Self) -> Ordering {
        self.node_count
            .cmp(&other.node_count)
            .then(self.edge_count.cmp(&other.edge_count))
            .then_with(|| {
                let a = self.mean_out_entropy_bits.unwrap_or(0.0);
                let b = other.mean_out_entropy_bits.unwrap_or(0.0);
                a.total_cmp(&b)
            })
    }
}

pub fn complexity_metrics(g: &CloMGraph) -> ComplexityMetrics {
    let mut out_counts: BTreeMap<&SceneState, Vec<usize>> = BTreeMap::new();
    for (p, r) in g.edges() {
        out_counts.entry(&p.origin).or_default().push(r.multiplicity());
    }
    let non_sink = out_counts.len();
    let total_multiplicity = g.total_multiplicity();

    let mut weighted_entropy = 0.0;
    let mut weight = 0usize;
    for counts in out_counts.values() {
        let n: usize = counts.iter().sum();
        if n == 0 {
            continue;
        }
        let h: f64 = counts
            .iter()
            .filter(|c| **c > 0)
            .map(|&c| {
                let p = c as f64 / n as f64;
                -p * p.log2()
            })
            .sum();
        weighted_entropy += h * n as f64;
        weight += n;
    }

    ComplexityMetrics {
        node_count: g.node_count(),
        edge_count: g.edge_count(),
        total_multiplicity,
        sink_count: g.node_count() - non_sink,
        mean_out_degree: (non_sink > 0).then(|| g.edge_count() as f64 / non_sink as f64),
        mean_out_entropy_bits: (weight > 0).then(|| weighted_entropy / weight as f64),
        edges_per_trial: (g.trial_count() > 0).then(|| g.edge_count() as f64 / g.trial_count() as f64),
    }
}

/// Sum of outgoing transition probabilities of `state`; exactly one for
/// every non-sink node.
pub fn out_probability_sum(g: &CloMGraph, state: &SceneState) -> BigRational {
    g.out_edges(state)
        .filter_map(|(p, _)| transition_probability(g, p))
        .fold(BigRational::zero(), |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MotionLabel, Segment};
    use crate::stateparse::parse_state;

    fn st(s: &str) -> SceneState {
        parse_state(s).unwrap()
    }

    fn trial(idx: u32, rows: &[(&str, Option<&str>)]) -> Trial {
        Trial {
            subject_id: "s".into(),
            task_id: "napkin".into(),
            trial_index: idx,
            clap_video_time: None,
            cloth: None,
            metadata: Default::default(),
            segments: rows
                .iter()
                .enumerate()
                .map(|(i, (s, a))| Segment {
                    t_start: i as f64,
                    state: st(s),
                    action: a.and_then(MotionLabel::new),
                })
                .collect(),
        }
    }

    fn hand_graph(edges: &[(&str, &str, &str, usize)]) -> CloMGraph {
        let mut g = CloMGraph::new(24, SymmetryConfig::IDENTITY);
        let mut n = 0;
        for (o, d, m, mult) in edges {
            let p = ManipulationPrimitive::new(st(o), st(d), MotionLabel::new(m).unwrap()).unwrap();
            for _ in 0..*mult {
                n += 1;
                g.add_occurrence(p.clone(), Occurrence {
                    task_id: "t".into(),
                    subject_id: "s".into(),
                    trial_index: n,
                    segment_index: 0,
                });
            }
        }
        g
    }

    const A: &str = "Pie | - | Crumpled";
    const B: &str = "PP | LC | Crumpled";
    const C: &str = "2PP | LC+RC | Crumpled";
    const D: &str = "2PP | LC+RC | Flat";

    #[test]
    fn identical_tuples_accumulate() {
        let t1 = trial(1, &[(A, Some("Grasp")), (B, None)]);
        let t2 = trial(2, &[(A, Some("grasp")), (B, None)]);
        let (g, w) = build_graph(&[t1, t2], &BuildOptions::default());
        assert!(w.is_empty());
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.total_multiplicity(), 2);
        assert_eq!(g.trial_count(), 2);
    }

    #[test]
    fn empty_corpus_warns() {
        let (g, w) = build_graph(&[], &BuildOptions::default());
        assert_eq!(g.node_count(), 0);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(w, vec![Warning::EmptyCorpus]);
    }

    #[test]
    fn task_filter_selects_trials() {
        let mut t2 = trial(2, &[(A, Some("Grasp")), (C, None)]);
        t2.task_id = "tablecloth".into();
        let opts = BuildOptions {
            task_filter: Some(vec!["tablecloth".into()]),
            ..Default::default()
        };
        let (g, _) = build_graph(&[trial(1, &[(A, Some("Grasp")), (B, None)]), t2], &opts);
        assert_eq!(g.trial_count(), 1);
        assert!(g.nodes().contains(&st(C)));
        assert!(!g.nodes().contains(&st(B)));
    }

    #[test]
    fn collapsed_trial_leaves_no_isolated_node() {
        let t = trial(1, &[("PP | LC@LH | Crumpled", Some("Swap hands")), ("PP | LC@RH | Crumpled", None)]);
        let (g, w) = build_graph(&[t], &BuildOptions::default());
        assert!(g.nodes().is_empty());
        assert!(w.iter().any(|w| matches!(w, Warning::TrialCollapsed { .. })));
        assert_eq!(g.trial_count(), 1);
    }

    #[test]
    fn filter_examples() {
        let g = hand_graph(&[(A, B, "x", 5), (C, D, "y", 2)]);
        let f = filter_graph(&g, 3);
        assert_eq!(f.edge_count(), 1);
        assert_eq!(f.nodes(), &BTreeSet::from([st(A), st(B)]));
        assert_eq!(filter_graph(&g, 1), g);
        assert!(filter_graph(&g, 6).is_empty());
        assert!(filter_graph(&g, 6).nodes().is_empty());
    }

    #[test]
    fn chain_single_path() {
        let g = hand_graph(&[(A, B, "x", 2), (B, C, "y", 1)]);
        let paths = rank_strategies(&g, &st(A), &st(C), 5);
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].likelihood, BigRational::one());
        assert_eq!(paths[0].bottleneck_support, 1);
        assert!(rank_strategies(&g, &st(A), &st(A), 5).is_empty());
        assert!(rank_strategies(&g, &st(C), &st(A), 5).is_empty());
    }

    #[test]
    fn diamond_ranking() {
        let g = hand_graph(&[(A, B, "ab", 3), (A, C, "ac", 1), (B, D, "bd", 3), (C, D, "cd", 1)]);
        let paths = rank_strategies(&g, &st(A), &st(D), 5);
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].likelihood, BigRational::new(3.into(), 4.into()));
        assert_eq!(paths[0].edges[0].destination, st(B));
        assert_eq!(paths[1].likelihood, BigRational::new(1.into(), 4.into()));
        assert_eq!(rank_strategies(&g, &st(A), &st(D), 1).len(), 1);
    }

    #[test]
    fn cap_truncates() {
        let g = hand_graph(&[(A, B, "ab", 3), (A, C, "ac", 1), (B, D, "bd", 3), (C, D, "cd", 1)]);
        let r = rank_strategies_with(&g, &st(A), &st(D), &RankOptions { k: 10, max_paths: 1 });
        assert!(r.truncated);
        assert_eq!(r.paths.len(), 1);
    }

    #[test]
    fn metrics_single_edge_and_branch() {
        let g = hand_graph(&[(A, B, "x", 4)]);
        let m = complexity_metrics(&g);
        assert_eq!(m.mean_out_entropy_bits, Some(0.0));
        assert_eq!(m.mean_out_degree, Some(1.0));
        assert_eq!(m.sink_count, 1);

        let g = hand_graph(&[(A, B, "x", 2), (A, C, "y", 2)]);
        let m = complexity_metrics(&g);
        assert_eq!(m.mean_out_entropy_bits, Some(1.0));
        assert_eq!(m.mean_out_degree, Some(2.0));

        let m = complexity_metrics(&CloMGraph::default());
        assert_eq!(m.mean_out_degree, None);
        assert_eq!(m.edges_per_trial, None);
    }

    #[test]
    fn subgraph_absent_label() {
        let g = hand_graph(&[(A, B, "x", 2)]);
        let (s, w) = subgraph_by_label(&g, "Trace edge", &BTreeSet::new());
        assert!(s.is_empty());
        assert_eq!(w.len(), 1);
    }
}
