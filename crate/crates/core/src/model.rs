//! Domain values: grasp geometry, scene states, manipulation primitives,
//! trials and the graph they are counted into.
//!
//! Every multiset-valued field is kept sorted, so derived `Eq`/`Ord` agree
//! with equality of canonical serializations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::symmetry::SymmetryConfig;

/// Prehension geometry shape. Declaration order is the canonical token order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Shape {
    Point,
    Line,
    Plane,
}

impl Shape {
    pub fn token(self) -> &'static str {
        match self {
            Shape::Point => "P",
            Shape::Line => "L",
            Shape::Plane => "Pi",
        }
    }
}

/// One virtual finger. `extrinsic` marks a contact provided by the
/// environment (the table) rather than the subject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GraspGeometry {
    pub shape: Shape,
    pub extrinsic: bool,
}

impl GraspGeometry {
    pub const fn new(shape: Shape, extrinsic: bool) -> Self {
        Self { shape, extrinsic }
    }
}

impl fmt::Display for GraspGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.shape.token())?;
        if self.extrinsic {
            f.write_str("e")?;
        }
        Ok(())
    }
}

/// A grasp unit: two opposing geometries (prehensile) or a single supporting
/// contact opposed by gravity (non-prehensile).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GraspUnit {
    geometries: Vec<GraspGeometry>,
}

impl GraspUnit {
    pub fn single(g: GraspGeometry) -> Self {
        Self { geometries: vec![g] }
    }

    /// Builds a prehensile unit; the pair is stored in canonical order.
    pub fn pair(a: GraspGeometry, b: GraspGeometry) -> Self {
        let mut geometries = vec![a, b];
        geometries.sort();
        Self { geometries }
    }

    pub fn geometries(&self) -> &[GraspGeometry] {
        &self.geometries
    }

    pub fn is_prehensile(&self) -> bool {
        self.geometries.len() == 2
    }

    /// True when at least one geometry is supplied by the subject.
    pub fn involves_subject(&self) -> bool {
        self.geometries.iter().any(|g| !g.extrinsic)
    }
}

impl fmt::Display for GraspUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.geometries {
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

/// Non-empty multiset of grasp units.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GraspType {
    units: Vec<GraspUnit>,
}

impl GraspType {
    /// Returns `None` for an empty unit list: every state realizes a grasp.
    pub fn new(mut units: Vec<GraspUnit>) -> Option<Self> {
        if units.is_empty() {
            return None;
        }
        units.sort();
        Some(Self { units })
    }

    pub fn units(&self) -> &[GraspUnit] {
        &self.units
    }
}

impl fmt::Display for GraspType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut i = 0;
        while i < self.units.len() {
            let run = self.units[i..]
                .iter()
                .take_while(|u| **u == self.units[i])
                .count();
            if !first {
                f.write_str("+")?;
            }
            first = false;
            if run >= 2 {
                write!(f, "{run}")?;
            }
            write!(f, "{}", self.units[i])?;
            i += run;
        }
        Ok(())
    }
}

/// Grasped location on the cloth, relative to the subject.
///
/// The five built-in tokens come first in canonical order; extra tokens
/// declared in a [`crate::stateparse::Vocabulary`] follow in declaration
/// order (`rank`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Location {
    /// Near corner on the subject's left.
    LeftCorner,
    /// Near corner on the subject's right.
    RightCorner,
    FarLeft,
    FarRight,
    Interior,
    Extra { rank: u32, token: String },
}

impl Location {
    pub fn token(&self) -> &str {
        match self {
            Location::LeftCorner => "LC",
            Location::RightCorner => "RC",
            Location::FarLeft => "FL",
            Location::FarRight => "FR",
            Location::Interior => "I",
            Location::Extra { token, .. } => token,
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Which fabric layers are held. Unsubscripted locations hold all layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Layer {
    #[default]
    All,
    /// 1-based layer index counted from the top.
    Index(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub fn token(self) -> &'static str {
        match self {
            Hand::Left => "LH",
            Hand::Right => "RH",
        }
    }

    pub fn other(self) -> Hand {
        match self {
            Hand::Left => Hand::Right,
            Hand::Right => Hand::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GraspBinding {
    pub location: Location,
    pub layer: Layer,
    pub hand: Option<Hand>,
}

impl GraspBinding {
    pub fn at(location: Location) -> Self {
        Self {
            location,
            layer: Layer::All,
            hand: None,
        }
    }

    pub fn with_layer(mut self, layer: Layer) -> Self {
        self.layer = layer;
        self
    }

    pub fn with_hand(mut self, hand: Hand) -> Self {
        self.hand = Some(hand);
        self
    }
}

impl fmt::Display for GraspBinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.location)?;
        if let Layer::Index(k) = self.layer {
            write!(f, "_{k}")?;
        }
        if let Some(h) = self.hand {
            write!(f, "@{}", h.token())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClothConfig {
    Crumpled,
    Flat,
    Folded,
    SemiFolded,
    SemiFlat,
}

impl ClothConfig {
    pub const ALL: [ClothConfig; 5] = [
        ClothConfig::Crumpled,
        ClothConfig::Flat,
        ClothConfig::Folded,
        ClothConfig::SemiFolded,
        ClothConfig::SemiFlat,
    ];

    pub fn token(self) -> &'static str {
        match self {
            ClothConfig::Crumpled => "Crumpled",
            ClothConfig::Flat => "Flat",
            ClothConfig::Folded => "Folded",
            ClothConfig::SemiFolded => "SemiFolded",
            ClothConfig::SemiFlat => "SemiFlat",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.token() == token)
    }
}

impl fmt::Display for ClothConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Node identity of the graph: grasp type, grasp bindings and cloth
/// configuration.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SceneState {
    grasp_type: GraspType,
    bindings: Vec<GraspBinding>,
    config: ClothConfig,
}

/// Soft consistency findings on a state; never a parse failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateLint {
    /// The grasp uses the subject's fingers but no grasped location is given.
    HandGraspWithoutBindings,
}

impl fmt::Display for StateLint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateLint::HandGraspWithoutBindings => {
                f.write_str("grasp involves the subject's hands but no grasp location is given")
            }
        }
    }
}

impl SceneState {
    pub fn new(grasp_type: GraspType, mut bindings: Vec<GraspBinding>, config: ClothConfig) -> Self {
        bindings.sort();
        Self {
            grasp_type,
            bindings,
            config,
        }
    }

    pub fn grasp_type(&self) -> &GraspType {
        &self.grasp_type
    }

    pub fn bindings(&self) -> &[GraspBinding] {
        &self.bindings
    }

    pub fn config(&self) -> ClothConfig {
        self.config
    }

    /// Rebuilds the state with every binding passed through `f`.
    pub fn map_bindings(&self, f: impl Fn(&GraspBinding) -> GraspBinding) -> Self {
        Self::new(
            self.grasp_type.clone(),
            self.bindings.iter().map(f).collect(),
            self.config,
        )
    }

    pub fn lints(&self) -> Vec<StateLint> {
        let mut out = Vec::new();
        let hand_grasp = self
            .grasp_type
            .units()
            .iter()
            .any(|u| u.is_prehensile() && u.involves_subject());
        if self.bindings.is_empty() && hand_grasp {
            out.push(StateLint::HandGraspWithoutBindings);
        }
        out
    }
}

impl fmt::Display for SceneState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} | ", self.grasp_type)?;
        if self.bindings.is_empty() {
            f.write_str("-")?;
        } else {
            for (i, b) in self.bindings.iter().enumerate() {
                if i > 0 {
                    f.write_str("+")?;
                }
                write!(f, "{b}")?;
            }
        }
        write!(f, " | {}", self.config)
    }
}

/// True iff the canonical serializations of `a` and `b` are identical.
pub fn state_equal(a: &SceneState, b: &SceneState) -> bool {
    a.to_string() == b.to_string()
}

/// Free-form motion label. Identity ignores case and runs of whitespace;
/// the displayed text keeps the author's casing.
#[derive(Debug, Clone)]
pub struct MotionLabel {
    text: String,
    key: String,
}

impl MotionLabel {
    /// Returns `None` when the label is blank.
    pub fn new(raw: &str) -> Option<Self> {
        let text = raw.split_whitespace().collect::<Vec<_>>().join(" ");
        if text.is_empty() {
            return None;
        }
        let key = text.to_lowercase();
        Some(Self { text, key })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    /// Normalized comparison key.
    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn matches(&self, other: &str) -> bool {
        MotionLabel::new(other).is_some_and(|o| o.key == self.key)
    }
}

impl PartialEq for MotionLabel {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for MotionLabel {}

impl PartialOrd for MotionLabel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MotionLabel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

impl std::hash::Hash for MotionLabel {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key.hash(state);
    }
}

impl fmt::Display for MotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Edge identity: origin state, destination state and motion label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ManipulationPrimitive {
    pub origin: SceneState,
    pub destination: SceneState,
    pub motion: MotionLabel,
}

impl ManipulationPrimitive {
    /// Returns `None` for a self-transition, which segmentation never produces.
    pub fn new(origin: SceneState, destination: SceneState, motion: MotionLabel) -> Option<Self> {
        if origin == destination {
            return None;
        }
        Some(Self {
            origin,
            destination,
            motion,
        })
    }
}

impl fmt::Display for ManipulationPrimitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) -[{}]-> ({})", self.origin, self.motion, self.destination)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Seconds from video start.
    pub t_start: f64,
    pub state: SceneState,
    /// Motion performed from this state into the next; absent on the last segment.
    pub action: Option<MotionLabel>,
}

/// One labeled demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub subject_id: String,
    pub task_id: String,
    pub trial_index: u32,
    /// Video time of the synchronization clap, in seconds.
    pub clap_video_time: Option<f64>,
    pub cloth: Option<String>,
    /// Header keys this crate does not interpret, kept verbatim.
    pub metadata: BTreeMap<String, String>,
    pub segments: Vec<Segment>,
}

impl Trial {
    pub fn key(&self) -> TrialKey {
        TrialKey {
            task_id: self.task_id.clone(),
            subject_id: self.subject_id.clone(),
            trial_index: self.trial_index,
        }
    }
}

/// Identifies a trial across a corpus.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrialKey {
    pub task_id: String,
    pub subject_id: String,
    pub trial_index: u32,
}

impl fmt::Display for TrialKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/t{}", self.task_id, self.subject_id, self.trial_index)
    }
}

/// Where one edge occurrence came from. `segment_index` is the 0-based index
/// of the origin segment in the canonicalized trial.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Occurrence {
    pub task_id: String,
    pub subject_id: String,
    pub trial_index: u32,
    pub segment_index: usize,
}

impl Occurrence {
    pub fn trial_key(&self) -> TrialKey {
        TrialKey {
            task_id: self.task_id.clone(),
            subject_id: self.subject_id.clone(),
            trial_index: self.trial_index,
        }
    }
}

/// Speed and acceleration magnitude statistics for one hand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicStats {
    /// m/s
    pub v_max: f64,
    /// m/s
    pub v_mean: f64,
    /// m/s²
    pub a_max: f64,
    /// m/s²
    pub a_mean: f64,
}

impl KinematicStats {
    pub const ZERO: KinematicStats = KinematicStats {
        v_max: 0.0,
        v_mean: 0.0,
        a_max: 0.0,
        a_mean: 0.0,
    };

    /// Equal-weight arithmetic mean of each field. `None` for an empty input.
    pub fn mean_of(items: &[KinematicStats]) -> Option<KinematicStats> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        let sum = |f: fn(&KinematicStats) -> f64| items.iter().map(f).sum::<f64>() / n;
        Some(KinematicStats {
            v_max: sum(|s| s.v_max),
            v_mean: sum(|s| s.v_mean),
            a_max: sum(|s| s.a_max),
            a_mean: sum(|s| s.a_mean),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandStats {
    pub left: KinematicStats,
    pub right: KinematicStats,
}

impl HandStats {
    pub fn mean_of(items: &[HandStats]) -> Option<HandStats> {
        let left: Vec<_> = items.iter().map(|h| h.left).collect();
        let right: Vec<_> = items.iter().map(|h| h.right).collect();
        Some(HandStats {
            left: KinematicStats::mean_of(&left)?,
            right: KinematicStats::mean_of(&right)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeRecord {
    /// Sorted; one entry per observation of the primitive.
    pub occurrences: Vec<Occurrence>,
    pub stats: Option<HandStats>,
}

impl EdgeRecord {
    pub fn multiplicity(&self) -> usize {
        self.occurrences.len()
    }
}

/// Directed multigraph of scene states and manipulation primitives,
/// counted with multiplicity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CloMGraph {
    pub(crate) nodes: BTreeSet<SceneState>,
    pub(crate) edges: BTreeMap<ManipulationPrimitive, EdgeRecord>,
    pub(crate) trial_count: usize,
    pub(crate) symmetry: SymmetryConfig,
}

impl CloMGraph {
    pub fn new(trial_count: usize, symmetry: SymmetryConfig) -> Self {
        Self {
            nodes: BTreeSet::new(),
            edges: BTreeMap::new(),
            trial_count,
            symmetry,
        }
    }

    pub fn nodes(&self) -> &BTreeSet<SceneState> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeMap<ManipulationPrimitive, EdgeRecord> {
        &self.edges
    }

    pub fn edge(&self, p: &ManipulationPrimitive) -> Option<&EdgeRecord> {
        self.edges.get(p)
    }

    pub fn trial_count(&self) -> usize {
        self.trial_count
    }

    /// Symmetry configuration the node states are canonical under.
    pub fn symmetry(&self) -> SymmetryConfig {
        self.symmetry
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn total_multiplicity(&self) -> usize {
        self.edges.values().map(EdgeRecord::multiplicity).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Records one observation of `p`, creating the edge and its endpoints
    /// as needed. When two labels differ only in case or spacing, the
    /// lexicographically smallest spelling is kept for display.
    pub fn add_occurrence(&mut self, p: ManipulationPrimitive, occ: Occurrence) {
        self.nodes.insert(p.origin.clone());
        self.nodes.insert(p.destination.clone());
        self.insert_record(p, EdgeRecord {
            occurrences: vec![occ],
            stats: None,
        });
    }

    pub(crate) fn insert_record(&mut self, p: ManipulationPrimitive, record: EdgeRecord) {
        if let Some((existing, _)) = self.edges.get_key_value(&p) {
            if existing.motion.as_str() > p.motion.as_str() {
                let old = self.edges.remove(&p).unwrap_or_default();
                let merged = merge_records(old, record);
                self.edges.insert(p, merged);
                return;
            }
        }
        match self.edges.get_mut(&p) {
            Some(r) => {
                let old = std::mem::take(r);
                *r = merge_records(old, record);
            }
            None => {
                let mut record = record;
                record.occurrences.sort();
                self.edges.insert(p, record);
            }
        }
    }

    pub fn set_stats(&mut self, p: &ManipulationPrimitive, stats: Option<HandStats>) {
        if let Some(r) = self.edges.get_mut(p) {
            r.stats = stats;
        }
    }

    /// Combines two partial graphs built under the same symmetry
    /// configuration. Associative and commutative on nodes, edges,
    /// occurrences and trial counts.
    pub fn merge(mut self, other: CloMGraph) -> CloMGraph {
        self.trial_count += other.trial_count;
        self.nodes.extend(other.nodes);
        for (p, r) in other.edges {
            self.insert_record(p, r);
        }
        self
    }

    /// Out-edges of `state` in canonical order.
    pub fn out_edges<'a>(
        &'a self,
        state: &'a SceneState,
    ) -> impl Iterator<Item = (&'a ManipulationPrimitive, &'a EdgeRecord)> + 'a {
        self.edges.iter().filter(move |(p, _)| &p.origin == state)
    }

    /// Sum of multiplicities over the out-edges of `state`.
    pub fn out_multiplicity(&self, state: &SceneState) -> usize {
        self.out_edges(state).map(|(_, r)| r.multiplicity()).sum()
    }

    /// Removes nodes without any incident edge.
    pub(crate) fn prune_isolated(&mut self) {
        let mut used = BTreeSet::new();
        for p in self.edges.keys() {
            used.insert(p.origin.clone());
            used.insert(p.destination.clone());
        }
        self.nodes = used;
    }
}

fn merge_records(mut a: EdgeRecord, b: EdgeRecord) -> EdgeRecord {
    a.occurrences.extend(b.occurrences);
    a.occurrences.sort();
    // stats describe the occurrences they were computed from; a merge invalidates them
    a.stats = None;
    a
}
