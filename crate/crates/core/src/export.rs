//! Graph serialization: Graphviz DOT for reading, JSON for pipelines.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{
    CloMGraph, EdgeRecord, HandStats, KinematicStats, Location, ManipulationPrimitive, MotionLabel,
    Occurrence, SceneState,
};
use crate::stateparse::{ParseError, StateParser, Vocabulary};
use crate::symmetry::SymmetryConfig;

pub const SCHEMA: &str = "clom-graph/1";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema mismatch: expected `{SCHEMA}`, found `{found}`")]
    SchemaMismatch { found: String },
    #[error("invalid state `{text}`: {source}")]
    State {
        text: String,
        #[source]
        source: ParseError,
    },
    #[error("inconsistent graph: {0}")]
    Invalid(String),
}

/// Edge colors by support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeColor {
    Red,
    Orange,
    Black,
}

impl EdgeColor {
    pub fn name(self) -> &'static str {
        match self {
            EdgeColor::Red => "red",
            EdgeColor::Orange => "orange",
            EdgeColor::Black => "black",
        }
    }

    fn penwidth(self) -> u8 {
        match self {
            EdgeColor::Red => 3,
            EdgeColor::Orange => 2,
            EdgeColor::Black => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DotOptions {
    pub red_threshold: Option<usize>,
    pub orange_threshold: Option<usize>,
}

impl DotOptions {
    /// Red defaults to half the trial count and orange to a quarter, both
    /// rounded up and at least 1.
    pub fn thresholds(&self, trial_count: usize) -> (usize, usize) {
        let red = self.red_threshold.unwrap_or(trial_count.div_ceil(2).max(1));
        let orange = self.orange_threshold.unwrap_or(trial_count.div_ceil(4).max(1));
        (red, orange)
    }
}

/// Inclusive thresholds: `count >= red` is red, else `count >= orange` is orange.
pub fn edge_color(count: usize, red: usize, orange: usize) -> EdgeColor {
    if count >= red {
        EdgeColor::Red
    } else if count >= orange {
        EdgeColor::Orange
    } else {
        EdgeColor::Black
    }
}

/// Stable DOT identifier derived from the canonical state text.
pub fn node_id(s: &SceneState) -> String {
    let digest = Sha256::digest(s.to_string().as_bytes());
    let mut id = String::from("n");
    for b in digest.iter().take(6) {
        let _ = write!(id, "{b:02x}");
    }
    id
}

fn dot_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

fn stats_line(s: &HandStats) -> String {
    let k = |h: &KinematicStats| format!("v {:.2}/{:.2}, a {:.2}/{:.2}", h.v_max, h.v_mean, h.a_max, h.a_mean);
    format!("LH {}; RH {}", k(&s.left), k(&s.right))
}

pub fn export_dot(g: &CloMGraph, opts: &DotOptions) -> String {
    let (red, orange) = opts.thresholds(g.trial_count());
    let mut out = String::from("digraph clom {\n");
    for n in g.nodes() {
        let _ = writeln!(out, "  {} [label=\"{}\"];", node_id(n), dot_escape(&n.to_string()));
    }
    for (p, r) in g.edges() {
        let count = r.multiplicity();
        let color = edge_color(count, red, orange);
        let mut label = format!("{} ({count})", p.motion);
        if let Some(s) = &r.stats {
            label.push('\n');
            label.push_str(&stats_line(s));
        }
        let _ = writeln!(
            out,
            "  {} -> {} [label=\"{}\", color={}, penwidth={}];",
            node_id(&p.origin),
            node_id(&p.destination),
            dot_escape(&label),
            color.name(),
            color.penwidth()
        );
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphDoc {
    schema: String,
    trial_count: usize,
    symmetry: SymmetryConfig,
    /// Extra location tokens and their sort rank.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    extra_locations: BTreeMap<String, u32>,
    nodes: Vec<String>,
    edges: Vec<EdgeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeDoc {
    origin: String,
    destination: String,
    label: String,
    multiplicity: usize,
    occurrences: Vec<OccurrenceDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stats: Option<StatsDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct OccurrenceDoc {
    task: String,
    subject: String,
    trial: u32,
    segment: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct StatsDoc {
    lh: KinDoc,
    rh: KinDoc,
}

#[derive(Debug, Serialize, Deserialize)]
struct KinDoc {
    v_max: f64,
    v_mean: f64,
    a_max: f64,
    a_mean: f64,
}

impl From<&KinematicStats> for KinDoc {
    fn from(k: &KinematicStats) -> Self {
        Self {
            v_max: k.v_max,
            v_mean: k.v_mean,
            a_max: k.a_max,
            a_mean: k.a_mean,
        }
    }
}

impl From<&KinDoc> for KinematicStats {
    fn from(k: &KinDoc) -> Self {
        Self {
            v_max: k.v_max,
            v_mean: k.v_mean,
            a_max: k.a_max,
            a_mean: k.a_mean,
        }
    }
}

fn extra_locations(g: &CloMGraph) -> BTreeMap<String, u32> {
    g.nodes()
        .iter()
        .flat_map(|n| n.bindings())
        .filter_map(|b| match &b.location {
            Location::Extra { rank, token } => Some((token.clone(), *rank)),
            _ => None,
        })
        .collect()
}

pub fn export_json(g: &CloMGraph) -> String {
    let doc = GraphDoc {
        schema: SCHEMA.to_string(),
        trial_count: g.trial_count(),
        symmetry: g.symmetry(),
        extra_locations: extra_locations(g),
        nodes: g.nodes().iter().map(|n| n.to_string()).collect(),
        edges: g
            .edges()
            .iter()
            .map(|(p, r)| EdgeDoc {
                origin: p.origin.to_string(),
                destination: p.destination.to_string(),
                label: p.motion.as_str().to_string(),
                multiplicity: r.multiplicity(),
                occurrences: r
                    .occurrences
                    .iter()
                    .map(|o| OccurrenceDoc {
                        task: o.task_id.clone(),
                        subject: o.subject_id.clone(),
                        trial: o.trial_index,
                        segment: o.segment_index,
                    })
                    .collect(),
                stats: r.stats.as_ref().map(|s| StatsDoc {
                    lh: (&s.left).into(),
                    rh: (&s.right).into(),
                }),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("graph documents always serialize");
    s.push('\n');
    s
}

/// Builds a parser whose vocabulary reproduces the given token ranks.
pub(crate) fn ranked_parser(extra: &BTreeMap<String, u32>) -> Result<StateParser, ExportError> {
    let max = extra.values().copied().max().map_or(0, |m| m as usize + 1);
    if max > 4096 {
        return Err(ExportError::Invalid("location rank out of range".into()));
    }
    let mut slots: Vec<Option<&str>> = vec![None; max];
    for (token, rank) in extra {
        slots[*rank as usize] = Some(token);
    }
    // gaps are filled with names the grammar can never produce
    let vocab = Vocabulary::from_slots(slots.iter().map(|s| s.map(str::to_string)));
    Ok(StateParser::new(vocab))
}

pub fn import_json(text: &str) -> Result<CloMGraph, ExportError> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("");
    if found != SCHEMA {
        return Err(ExportError::SchemaMismatch {
            found: found.to_string(),
        });
    }
    let doc: GraphDoc = serde_json::from_value(value)?;
    let parser = ranked_parser(&doc.extra_locations)?;
    let parse = |text: &str| {
        parser.parse_state(text).map_err(|source| ExportError::State {
            text: text.to_string(),
            source,
        })
    };

    let mut g = CloMGraph::new(doc.trial_count, doc.symmetry);
    let declared: BTreeSet<SceneState> = doc.nodes.iter().map(|n| parse(n)).collect::<Result<_, _>>()?;
    for e in &doc.edges {
        let origin = parse(&e.origin)?;
        let destination = parse(&e.destination)?;
        let motion = MotionLabel::new(&e.label).ok_or_else(|| ExportError::Invalid("empty edge label".into()))?;
        let p = ManipulationPrimitive::new(origin, destination, motion)
            .ok_or_else(|| ExportError::Invalid(format!("self-loop on `{}`", e.origin)))?;
        if g.edges.contains_key(&p) {
            return Err(ExportError::Invalid(format!("duplicate edge {p}")));
        }
        if e.multiplicity != e.occurrences.len() || e.multiplicity == 0 {
            return Err(ExportError::Invalid(format!(
                "edge {p}: multiplicity {} but {} occurrences",
                e.multiplicity,
                e.occurrences.len()
            )));
        }
        let mut occurrences: Vec<Occurrence> = e
            .occurrences
            .iter()
            .map(|o| Occurrence {
                task_id: o.task.clone(),
                subject_id: o.subject.clone(),
                trial_index: o.trial,
                segment_index: o.segment,
            })
            .collect();
        occurrences.sort();
        let stats = e.stats.as_ref().map(|s| HandStats {
            left: (&s.lh).into(),
            right: (&s.rh).into(),
        });
        g.nodes.insert(p.origin.clone());
        g.nodes.insert(p.destination.clone());
        g.edges.insert(p, EdgeRecord { occurrences, stats });
    }
    if g.nodes != declared {
        return Err(ExportError::Invalid(
            "node list differs from the set of edge endpoints".into(),
        ));
    }
    Ok(g)
}
