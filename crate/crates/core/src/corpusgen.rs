//! Synthetic demonstrations sampled from a ground-truth transition graph.
//!
//! Each trial is a random walk from a start state to an absorbing state.
//! The generator writes the walk as a `.clom` annotation and a matching
//! motion table: hands follow cosine blends between random waypoints, one
//! per segment, with a sharp opposing bump of both hands (the clap) before
//! the first segment. All randomness comes from one seeded ChaCha stream.

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotation::write_trial;
use crate::export::{ranked_parser, ExportError, SCHEMA};
use crate::model::{
    ClothConfig, GraspBinding, GraspGeometry, GraspType, GraspUnit, Hand, Layer, Location,
    ManipulationPrimitive, MotionLabel, SceneState, Segment, Shape, Trial,
};
use crate::motion::{write_motion, MotionTrack, Vec3};
use crate::stateparse::Vocabulary;
use crate::symmetry::mirror_lr;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("ground truth has no absorbing state")]
    NoAbsorbingState,
    #[error("ground truth has no start state")]
    NoStartState,
    #[error("state `{0}` is not absorbing but has no out-edge")]
    DeadEnd(String),
    #[error("invalid probabilities at `{0}`")]
    InvalidProbabilities(String),
    #[error("walk exceeded {0} steps without reaching an absorbing state")]
    WalkTooLong(usize),
    #[error(transparent)]
    Document(#[from] ExportError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthEdge {
    pub primitive: ManipulationPrimitive,
    /// Relative weight among the origin's out-edges.
    pub prob: f64,
}

/// Transition model the generator samples from.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub task_id: String,
    pub cloth: Option<String>,
    pub start: Vec<(SceneState, f64)>,
    pub edges: Vec<GroundTruthEdge>,
    pub absorbing: BTreeSet<SceneState>,
}

impl GroundTruth {
    /// Out-edges with probabilities normalized per origin.
    pub fn transition_probabilities(&self) -> BTreeMap<ManipulationPrimitive, f64> {
        let mut totals: BTreeMap<&SceneState, f64> = BTreeMap::new();
        for e in &self.edges {
            *totals.entry(&e.primitive.origin).or_default() += e.prob;
        }
        self.edges
            .iter()
            .map(|e| (e.primitive.clone(), e.prob / totals[&e.primitive.origin]))
            .collect()
    }

    pub fn edge_set(&self) -> BTreeSet<ManipulationPrimitive> {
        self.edges
            .iter()
            .filter(|e| e.prob > 0.0)
            .map(|e| e.primitive.clone())
            .collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GroundTruthDoc {
    schema: String,
    task: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cloth: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    extra_locations: BTreeMap<String, u32>,
    start: Vec<StartDoc>,
    absorbing: Vec<String>,
    edges: Vec<GtEdgeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StartDoc {
    state: String,
    prob: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct GtEdgeDoc {
    origin: String,
    destination: String,
    label: String,
    prob: f64,
}

/// Reads a ground-truth document: the graph schema with a `prob` on each
/// edge plus `start` and `absorbing` state lists.
pub fn import_ground_truth(text: &str) -> Result<GroundTruth, CorpusError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(ExportError::from)?;
    let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("");
    if found != SCHEMA {
        return Err(ExportError::SchemaMismatch {
            found: found.to_string(),
        }
        .into());
    }
    let doc: GroundTruthDoc = serde_json::from_value(value).map_err(ExportError::from)?;
    let parser = ranked_parser(&doc.extra_locations)?;
    let parse = |text: &str| {
        parser.parse_state(text).map_err(|source| {
            CorpusError::from(ExportError::State {
                text: text.to_string(),
                source,
            })
        })
    };
    let start = doc
        .start
        .iter()
        .map(|s| Ok((parse(&s.state)?, s.prob)))
        .collect::<Result<Vec<_>, CorpusError>>()?;
    let absorbing = doc.absorbing.iter().map(|s| parse(s)).collect::<Result<_, _>>()?;
    let mut edges = Vec::with_capacity(doc.edges.len());
    for e in &doc.edges {
        let origin = parse(&e.origin)?;
        let destination = parse(&e.destination)?;
        let motion = MotionLabel::new(&e.label)
            .ok_or_else(|| ExportError::Invalid("empty edge label".into()))?;
        let primitive = ManipulationPrimitive::new(origin, destination, motion)
            .ok_or_else(|| ExportError::Invalid(format!("self-loop on `{}`", e.origin)))?;
        edges.push(GroundTruthEdge { primitive, prob: e.prob });
    }
    Ok(GroundTruth {
        task_id: doc.task,
        cloth: doc.cloth,
        start,
        edges,
        absorbing,
    })
}

pub fn export_ground_truth(gt: &GroundTruth) -> String {
    let extra_locations = gt
        .edges
        .iter()
        .flat_map(|e| [&e.primitive.origin, &e.primitive.destination])
        .chain(gt.start.iter().map(|(s, _)| s))
        .chain(&gt.absorbing)
        .flat_map(|s| s.bindings())
        .filter_map(|b| match &b.location {
            Location::Extra { rank, token } => Some((token.clone(), *rank)),
            _ => None,
        })
        .collect();
    let doc = GroundTruthDoc {
        schema: SCHEMA.to_string(),
        task: gt.task_id.clone(),
        cloth: gt.cloth.clone(),
        extra_locations,
        start: gt
            .start
            .iter()
            .map(|(s, p)| StartDoc {
                state: s.to_string(),
                prob: *p,
            })
            .collect(),
        absorbing: gt.absorbing.iter().map(|s| s.to_string()).collect(),
        edges: gt
            .edges
            .iter()
            .map(|e| GtEdgeDoc {
                origin: e.primitive.origin.to_string(),
                destination: e.primitive.destination.to_string(),
                label: e.primitive.motion.as_str().to_string(),
                prob: e.prob,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("ground truth always serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub n_trials: usize,
    pub seed: u64,
    /// Trials are assigned to subjects round-robin.
    pub subjects: usize,
    /// Segment duration range in seconds.
    pub segment_duration: (f64, f64),
    pub rate_hz: f64,
    /// Chance of mirroring a whole walk left/right.
    pub mirror_probability: f64,
    /// Record which hand holds each corner.
    pub annotate_hands: bool,
    pub max_steps: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_trials: 24,
            seed: 7,
            subjects: 8,
            segment_duration: (1.0, 3.0),
            rate_hz: 100.0,
            mirror_probability: 0.0,
            annotate_hands: false,
            max_steps: 200,
        }
    }
}

/// One generated demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTrial {
    /// `<task>_<subject>_t<index>`; the annotation goes to `.clom`, the
    /// motion table to `.csv`.
    pub file_stem: String,
    pub annotation: String,
    pub motion: String,
}

struct Sampler<'a> {
    start_states: Vec<&'a SceneState>,
    start_dist: WeightedIndex<f64>,
    out: BTreeMap<&'a SceneState, (Vec<&'a ManipulationPrimitive>, WeightedIndex<f64>)>,
    absorbing: &'a BTreeSet<SceneState>,
}

impl<'a> Sampler<'a> {
    fn new(gt: &'a GroundTruth) -> Result<Self, CorpusError> {
        if gt.absorbing.is_empty() {
            return Err(CorpusError::NoAbsorbingState);
        }
        if gt.start.is_empty() {
            return Err(CorpusError::NoStartState);
        }
        let start_dist = WeightedIndex::new(gt.start.iter().map(|(_, p)| *p))
            .map_err(|_| CorpusError::InvalidProbabilities("start".into()))?;
        let mut grouped: BTreeMap<&SceneState, (Vec<&ManipulationPrimitive>, Vec<f64>)> = BTreeMap::new();
        for e in &gt.edges {
            let slot = grouped.entry(&e.primitive.origin).or_default();
            slot.0.push(&e.primitive);
            slot.1.push(e.prob);
        }
        let mut out = BTreeMap::new();
        for (origin, (prims, weights)) in grouped {
            let dist = WeightedIndex::new(&weights)
                .map_err(|_| CorpusError::InvalidProbabilities(origin.to_string()))?;
            out.insert(origin, (prims, dist));
        }
        Ok(Self {
            start_states: gt.start.iter().map(|(s, _)| s).collect(),
            start_dist,
            out,
            absorbing: &gt.absorbing,
        })
    }

    /// States and the actions leaving them, ending at an absorbing state.
    fn walk(&self, rng: &mut ChaCha8Rng, max_steps: usize) -> Result<Vec<(SceneState, Option<MotionLabel>)>, CorpusError> {
        let mut state = self.start_states[self.start_dist.sample(rng)];
        let mut steps = Vec::new();
        while !self.absorbing.contains(state) {
            if steps.len() >= max_steps {
                return Err(CorpusError::WalkTooLong(max_steps));
            }
            let (prims, dist) = self
                .out
                .get(state)
                .ok_or_else(|| CorpusError::DeadEnd(state.to_string()))?;
            let p = prims[dist.sample(rng)];
            steps.push((state.clone(), Some(p.motion.clone())));
            state = &p.destination;
        }
        steps.push((state.clone(), None));
        Ok(steps)
    }
}

/// Assigns hands by side: left-side corners to the left hand, right-side
/// corners to the right hand, anything else to whichever hand is free.
fn with_hands(s: &SceneState) -> SceneState {
    let holds = s
        .grasp_type()
        .units()
        .iter()
        .any(|u| u.is_prehensile() && u.involves_subject());
    if !holds {
        return s.clone();
    }
    let mut used: Vec<Hand> = Vec::new();
    let mut bindings: Vec<GraspBinding> = Vec::new();
    let side = |l: &Location| match l {
        Location::LeftCorner | Location::FarLeft => Some(Hand::Left),
        Location::RightCorner | Location::FarRight => Some(Hand::Right),
        _ => None,
    };
    for b in s.bindings() {
        let hand = side(&b.location).or_else(|| {
            [Hand::Left, Hand::Right].into_iter().find(|h| !used.contains(h))
        });
        if let Some(h) = hand {
            used.push(h);
        }
        bindings.push(GraspBinding {
            hand,
            ..b.clone()
        });
    }
    SceneState::new(s.grasp_type().clone(), bindings, s.config())
}

fn round_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

fn waypoint(rng: &mut ChaCha8Rng, left: bool) -> Vec3 {
    let x = if left { rng.gen_range(-0.45..0.05) } else { rng.gen_range(-0.05..0.45) };
    [x, rng.gen_range(0.1..0.6), rng.gen_range(0.75..1.3)]
}

fn blend(a: Vec3, b: Vec3, u: f64) -> Vec3 {
    let w = (1.0 - (std::f64::consts::PI * u.clamp(0.0, 1.0)).cos()) / 2.0;
    std::array::from_fn(|k| a[k] + (b[k] - a[k]) * w)
}

const CLAP_AMPLITUDE: f64 = 0.05;
const CLAP_SIGMA: f64 = 0.02;

fn synth_motion(
    rng: &mut ChaCha8Rng,
    cfg: &GeneratorConfig,
    boundaries: &[f64],
    clap_motion_time: f64,
) -> MotionTrack {
    // boundaries: motion-clock segment starts plus the end of the last segment
    let left_pts: Vec<Vec3> = (0..boundaries.len()).map(|_| waypoint(rng, true)).collect();
    let right_pts: Vec<Vec3> = (0..boundaries.len()).map(|_| waypoint(rng, false)).collect();
    let end = *boundaries.last().expect("at least two boundaries");
    let n = (end * cfg.rate_hz).floor() as usize + 1;
    let mut times = Vec::with_capacity(n);
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / cfg.rate_hz;
        let k = boundaries.partition_point(|b| *b <= t);
        let (mut l, mut r) = if k == 0 {
            (left_pts[0], right_pts[0])
        } else if k >= boundaries.len() {
            (left_pts[k - 1], right_pts[k - 1])
        } else {
            let u = (t - boundaries[k - 1]) / (boundaries[k] - boundaries[k - 1]);
            (blend(left_pts[k - 1], left_pts[k], u), blend(right_pts[k - 1], right_pts[k], u))
        };
        let z = (t - clap_motion_time) / CLAP_SIGMA;
        let bump = CLAP_AMPLITUDE * (-0.5 * z * z).exp();
        l[0] += bump;
        r[0] -= bump;
        times.push(t);
        left.push(l);
        right.push(r);
    }
    MotionTrack::new(times, left, right).expect("uniform synthetic track")
}

/// Samples `cfg.n_trials` demonstrations. Byte-identical output for equal
/// inputs.
pub fn generate_corpus(gt: &GroundTruth, cfg: &GeneratorConfig) -> Result<Vec<GeneratedTrial>, CorpusError> {
    let sampler = Sampler::new(gt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let subjects = cfg.subjects.max(1);
    let (dmin, dmax) = cfg.segment_duration;
    let mut out = Vec::with_capacity(cfg.n_trials);
    for k in 0..cfg.n_trials {
        let subject_id = format!("s{:02}", k % subjects + 1);
        let trial_index = (k / subjects + 1) as u32;
        let walk = sampler.walk(&mut rng, cfg.max_steps)?;
        let mirrored = cfg.mirror_probability > 0.0 && rng.gen_bool(cfg.mirror_probability.min(1.0));

        let clap_video = round_ms(rng.gen_range(0.5..1.5));
        let mut t = round_ms(clap_video + rng.gen_range(1.0..2.0));
        let mut segments = Vec::with_capacity(walk.len());
        for (state, action) in walk {
            let state = if mirrored { mirror_lr(&state) } else { state };
            let state = if cfg.annotate_hands { with_hands(&state) } else { state };
            segments.push(Segment {
                t_start: t,
                state,
                action,
            });
            t = round_ms(t + rng.gen_range(dmin..=dmax));
        }
        let video_end = t;

        let clap_motion = (rng.gen_range(0.5..1.5) * cfg.rate_hz).round() / cfg.rate_hz;
        let to_motion = |v: f64| v - clap_video + clap_motion;
        let mut boundaries: Vec<f64> = segments.iter().map(|s| to_motion(s.t_start)).collect();
        boundaries.push(to_motion(video_end));
        let track = synth_motion(&mut rng, cfg, &boundaries, clap_motion);

        let trial = Trial {
            subject_id: subject_id.clone(),
            task_id: gt.task_id.clone(),
            trial_index,
            clap_video_time: Some(clap_video),
            cloth: gt.cloth.clone(),
            metadata: BTreeMap::new(),
            segments,
        };
        out.push(GeneratedTrial {
            file_stem: format!("{}_{}_t{}", gt.task_id, subject_id, trial_index),
            annotation: write_trial(&trial),
            motion: write_motion(&track),
        });
    }
    Ok(out)
}

/// A random scene state over `vocab`: one to three grasp units, zero to three
/// bindings with optional layers and hands.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, vocab: &Vocabulary) -> SceneState {
    let shape = |rng: &mut R| match rng.gen_range(0..3) {
        0 => Shape::Point,
        1 => Shape::Line,
        _ => Shape::Plane,
    };
    let geom = |rng: &mut R| GraspGeometry::new(shape(rng), rng.gen_bool(0.3));
    let units = (0..rng.gen_range(1..=3))
        .map(|_| {
            if rng.gen_bool(0.7) {
                GraspUnit::pair(geom(rng), geom(rng))
            } else {
                GraspUnit::single(geom(rng))
            }
        })
        .collect();
    let tokens: Vec<&str> = vocab.tokens().collect();
    let bindings = (0..rng.gen_range(0..=3))
        .map(|_| {
            let location = vocab
                .lookup(tokens[rng.gen_range(0..tokens.len())])
                .expect("token from vocabulary");
            let layer = if rng.gen_bool(0.7) {
                Layer::All
            } else {
                Layer::Index(rng.gen_range(1..=3))
            };
            let hand = match rng.gen_range(0..3) {
                0 => None,
                1 => Some(Hand::Left),
                _ => Some(Hand::Right),
            };
            GraspBinding { location, layer, hand }
        })
        .collect();
    let config = ClothConfig::ALL[rng.gen_range(0..ClothConfig::ALL.len())];
    SceneState::new(GraspType::new(units).expect("at least one unit"), bindings, config)
}

/// Random ground truth over `n_states` distinct states (at least 2): a
/// forward chain to the single absorbing last state, plus up to two extra
/// edges per state (parallel labels and back edges included) with smaller
/// weights.
pub fn random_ground_truth<R: Rng + ?Sized>(rng: &mut R, n_states: usize, task_id: &str) -> GroundTruth {
    let n = n_states.max(2);
    let vocab = Vocabulary::default();
    let mut states: Vec<SceneState> = Vec::with_capacity(n);
    while states.len() < n {
        let s = random_state(rng, &vocab);
        if !states.contains(&s) {
            states.push(s);
        }
    }
    let labels = ["Grasp corner", "Trace edge", "Place flat on table", "Fold on table", "Release"];
    let label = |rng: &mut R| MotionLabel::new(labels[rng.gen_range(0..labels.len())]).expect("non-empty");
    let mut edges: Vec<GroundTruthEdge> = Vec::new();
    for i in 0..n - 1 {
        let mut out: Vec<GroundTruthEdge> = Vec::new();
        let forward = ManipulationPrimitive::new(states[i].clone(), states[i + 1].clone(), label(rng))
            .expect("distinct states");
        out.push(GroundTruthEdge {
            primitive: forward,
            prob: rng.gen_range(2.0..4.0),
        });
        for _ in 0..rng.gen_range(0..=2) {
            let j = rng.gen_range(0..n);
            if j == i {
                continue;
            }
            let Some(p) = ManipulationPrimitive::new(states[i].clone(), states[j].clone(), label(rng)) else {
                continue;
            };
            if out.iter().any(|e| e.primitive == p) {
                continue;
            }
            out.push(GroundTruthEdge {
                primitive: p,
                prob: rng.gen_range(0.3..1.0),
            });
        }
        edges.extend(out);
    }
    GroundTruth {
        task_id: task_id.to_string(),
        cloth: None,
        start: vec![(states[0].clone(), 1.0)],
        edges,
        absorbing: BTreeSet::from([states[n - 1].clone()]),
    }
}

/// Label spellings used by the random generators. Some differ only in case
/// or spacing and so name the same motion.
pub const RANDOM_LABELS: [&str; 7] = [
    "Grasp corner",
    "grasp  CORNER",
    "Trace edge",
    "Place flat on table",
    "Fold on table",
    "Release",
    "release",
];

/// Random trials drawn from a pool of at most `max_states` states: walks of
/// 2 to 9 segments that never repeat a state in consecutive segments.
/// Subjects and trial indices are unique per trial.
pub fn random_trials<R: Rng + ?Sized>(
    rng: &mut R,
    n_trials: usize,
    max_states: usize,
    vocab: &Vocabulary,
) -> Vec<Trial> {
    let n = max_states.max(2);
    let mut pool: Vec<SceneState> = Vec::with_capacity(n);
    while pool.len() < n {
        let s = random_state(rng, vocab);
        if !pool.contains(&s) {
            pool.push(s);
        }
    }
    (0..n_trials)
        .map(|k| {
            let len = rng.gen_range(2..=9);
            let mut t = rng.gen_range(0.5..2.0);
            let mut segments: Vec<Segment> = Vec::with_capacity(len);
            let mut prev: Option<usize> = None;
            for i in 0..len {
                let mut j = rng.gen_range(0..n);
                while Some(j) == prev {
                    j = rng.gen_range(0..n);
                }
                prev = Some(j);
                let action = (i + 1 < len)
                    .then(|| MotionLabel::new(RANDOM_LABELS[rng.gen_range(0..RANDOM_LABELS.len())]).expect("non-empty"));
                segments.push(Segment {
                    t_start: round_ms(t),
                    state: pool[j].clone(),
                    action,
                });
                t += rng.gen_range(0.5..3.0);
            }
            Trial {
                subject_id: format!("s{:02}", k % 10 + 1),
                task_id: "random".into(),
                trial_index: (k / 10 + 1) as u32,
                clap_video_time: Some(0.5),
                cloth: None,
                metadata: BTreeMap::new(),
                segments,
            }
        })
        .collect()
}
