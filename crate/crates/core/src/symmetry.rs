//! Left/right simplifications: projections and a small symmetry group over
//! grasp locations, with the lexicographically least serialization as the
//! canonical representative of each orbit.

use serde::{Deserialize, Serialize};

use crate::model::{GraspBinding, Layer, Location, SceneState, Segment, Trial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct SymmetryConfig {
    /// Forget which hand holds each location.
    pub drop_hands: bool,
    /// Identify states that differ by a left/right swap.
    pub mirror_lr: bool,
    /// Identify states that differ by turning the cloth around (near-left with far-right).
    pub rotate_180: bool,
    /// Forget layer subscripts.
    pub drop_layers: bool,
}

impl Default for SymmetryConfig {
    fn default() -> Self {
        Self {
            drop_hands: true,
            mirror_lr: true,
            rotate_180: false,
            drop_layers: false,
        }
    }
}

impl SymmetryConfig {
    /// No projection, trivial group.
    pub const IDENTITY: SymmetryConfig = SymmetryConfig {
        drop_hands: false,
        mirror_lr: false,
        rotate_180: false,
        drop_layers: false,
    };

    /// All 16 flag combinations.
    pub fn all_combinations() -> impl Iterator<Item = SymmetryConfig> {
        (0u8..16).map(|bits| SymmetryConfig {
            drop_hands: bits & 1 != 0,
            mirror_lr: bits & 2 != 0,
            rotate_180: bits & 4 != 0,
            drop_layers: bits & 8 != 0,
        })
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

fn mirror_location(l: &Location) -> Location {
    match l {
        Location::LeftCorner => Location::RightCorner,
        Location::RightCorner => Location::LeftCorner,
        Location::FarLeft => Location::FarRight,
        Location::FarRight => Location::FarLeft,
        other => other.clone(),
    }
}

fn rotate_location(l: &Location) -> Location {
    match l {
        Location::LeftCorner => Location::FarRight,
        Location::FarRight => Location::LeftCorner,
        Location::RightCorner => Location::FarLeft,
        Location::FarLeft => Location::RightCorner,
        other => other.clone(),
    }
}

/// Swaps LC/RC, FL/FR and LH/RH. An involution.
pub fn mirror_lr(s: &SceneState) -> SceneState {
    s.map_bindings(|b| GraspBinding {
        location: mirror_location(&b.location),
        layer: b.layer,
        hand: b.hand.map(|h| h.other()),
    })
}

/// Turns the cloth half a turn in its plane: LC/FR and RC/FL swap, hands stay.
pub fn rotate_180(s: &SceneState) -> SceneState {
    s.map_bindings(|b| GraspBinding {
        location: rotate_location(&b.location),
        layer: b.layer,
        hand: b.hand,
    })
}

fn project(s: &SceneState, cfg: &SymmetryConfig) -> SceneState {
    if !cfg.drop_hands && !cfg.drop_layers {
        return s.clone();
    }
    s.map_bindings(|b| GraspBinding {
        location: b.location.clone(),
        layer: if cfg.drop_layers { Layer::All } else { b.layer },
        hand: if cfg.drop_hands { None } else { b.hand },
    })
}

/// Orbit of `s` under the enabled group, without projections.
pub fn orbit(s: &SceneState, cfg: &SymmetryConfig) -> Vec<SceneState> {
    let mut out = vec![s.clone()];
    if cfg.mirror_lr {
        out.push(mirror_lr(s));
    }
    if cfg.rotate_180 {
        let r = rotate_180(s);
        if cfg.mirror_lr {
            out.push(mirror_lr(&r));
        }
        out.push(r);
    }
    out
}

/// Projects away hands/layers as configured, then picks the orbit member
/// with the least canonical text.
pub fn canonicalize(s: &SceneState, cfg: &SymmetryConfig) -> SceneState {
    let projected = project(s, cfg);
    orbit(&projected, cfg)
        .into_iter()
        .map(|m| (m.to_string(), m))
        .min_by(|a, b| a.0.cmp(&b.0))
        .map(|(_, m)| m)
        .expect("orbit contains the identity")
}

/// Adjacent segments that canonicalize to the same state were merged into one.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMerge {
    /// Index in the input trial of the segment absorbed into its predecessor.
    pub absorbed_index: usize,
    pub t_start: f64,
    /// Action that became a self-transition and was dropped.
    pub dropped_action: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MergeReport {
    pub merges: Vec<SegmentMerge>,
}

impl MergeReport {
    pub fn is_empty(&self) -> bool {
        self.merges.is_empty()
    }
}

/// Canonicalizes every segment state. A run of equal adjacent states becomes
/// one segment that keeps the earliest start time and the action leaving
/// the run.
pub fn canonicalize_trial(t: &Trial, cfg: &SymmetryConfig) -> (Trial, MergeReport) {
    let mut report = MergeReport::default();
    let mut segments: Vec<Segment> = Vec::with_capacity(t.segments.len());
    for (i, seg) in t.segments.iter().enumerate() {
        let state = canonicalize(&seg.state, cfg);
        match segments.last_mut() {
            Some(prev) if prev.state == state => {
                report.merges.push(SegmentMerge {
                    absorbed_index: i,
                    t_start: seg.t_start,
                    dropped_action: prev.action.as_ref().map(|a| a.to_string()),
                });
                prev.action = seg.action.clone();
            }
            _ => segments.push(Segment {
                t_start: seg.t_start,
                state,
                action: seg.action.clone(),
            }),
        }
    }
    let mut out = t.clone();
    out.segments = segments;
    (out, report)
}
