//! Hand trajectories: loading, clap synchronization, per-segment slicing and
//! kinematic statistics.
//!
//! Positions are smoothed with a centered moving average of `2w + 1`
//! samples. Velocity is the central difference of the smoothed positions
//! and acceleration the central difference of the half-step velocities
//! (the second difference), so both are defined on the same samples
//! `w + 1 ..= n - w - 2`. Samples without a full stencil are excluded.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::diag::Warning;
use crate::model::{CloMGraph, HandStats, KinematicStats, Trial, TrialKey};
use crate::symmetry::canonicalize_trial;

pub const DEFAULT_HALF_WIDTH: usize = 2;
/// Default clap search span from the first sample, in seconds.
pub const DEFAULT_CLAP_WINDOW: f64 = 20.0;
/// Largest tolerated relative deviation of a sample spacing from nominal.
pub const MAX_SPACING_DEVIATION: f64 = 0.01;

const REQUIRED_COLUMNS: [&str; 7] = ["time", "lh_x", "lh_y", "lh_z", "rh_x", "rh_y", "rh_z"];
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MotionError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-uniform sampling at sample {index}: spacing {spacing:.6} s vs nominal {nominal:.6} s")]
    NonUniformSampling {
        index: usize,
        spacing: f64,
        nominal: f64,
    },
    #[error("too few samples: {count} (need at least 2)")]
    TooFewSamples { count: usize },
    #[error("line {line}: invalid number `{text}` in column `{column}`")]
    BadValue {
        line: usize,
        column: String,
        text: String,
    },
    #[error("malformed table: {0}")]
    Table(String),
    #[error("column lengths differ")]
    LengthMismatch,
    #[error("clap search window [{start:.3}, {end:.3}] s does not overlap the track")]
    WindowOutOfRange { start: f64, end: f64 },
    #[error("slice has {samples} samples; {required} required")]
    SliceTooShort { samples: usize, required: usize },
    #[error("trial has no clap time")]
    MissingClap,
}

pub type Vec3 = [f64; 3];

/// Two-hand position track with validated, nominally uniform sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionTrack {
    times: Vec<f64>,
    left: Vec<Vec3>,
    right: Vec<Vec3>,
    rate_hz: f64,
}

impl MotionTrack {
    pub fn new(times: Vec<f64>, left: Vec<Vec3>, right: Vec<Vec3>) -> Result<Self, MotionError> {
        if times.len() != left.len() || times.len() != right.len() {
            return Err(MotionError::LengthMismatch);
        }
        if times.len() < 2 {
            return Err(MotionError::TooFewSamples { count: times.len() });
        }
        let mut spacings: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let nominal = {
            let mut s = spacings.clone();
            s.sort_by(f64::total_cmp);
            s[s.len() / 2]
        };
        if !(nominal > 0.0 && nominal.is_finite()) {
            return Err(MotionError::NonUniformSampling {
                index: 1,
                spacing: spacings[0],
                nominal,
            });
        }
        for (i, sp) in spacings.drain(..).enumerate() {
            if !((sp - nominal).abs() <= MAX_SPACING_DEVIATION * nominal) {
                return Err(MotionError::NonUniformSampling {
                    index: i + 1,
                    spacing: sp,
                    nominal,
                });
            }
        }
        Ok(Self {
            times,
            left,
            right,
            rate_hz: 1.0 / nominal,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn left(&self) -> &[Vec3] {
        &self.left
    }

    pub fn right(&self) -> &[Vec3] {
        &self.right
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }
}

/// Reads a comma-separated table with header
/// `time,lh_x,lh_y,lh_z,rh_x,rh_y,rh_z`. Extra columns are ignored with a
/// warning.
pub fn load_motion(text: &str) -> Result<(MotionTrack, Vec<Warning>), MotionError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| MotionError::Table(e.to_string()))?
        .clone();
    let mut idx = [0usize; 7];
    for (slot, name) in idx.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| MotionError::MissingColumn(name.to_string()))?;
    }
    let extra: Vec<String> = headers
        .iter()
        .filter(|h| !REQUIRED_COLUMNS.contains(h))
        .map(str::to_string)
        .collect();

    let mut times = Vec::new();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| MotionError::Table(e.to_string()))?;
        let line = row + 2;
        let mut vals = [0.0f64; 7];
        for (k, (&col, name)) in idx.iter().zip(REQUIRED_COLUMNS).enumerate() {
            let text = record.get(col).unwrap_or("");
            vals[k] = text
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| MotionError::BadValue {
                    line,
                    column: name.to_string(),
                    text: text.to_string(),
                })?;
        }
        times.push(vals[0]);
        left.push([vals[1], vals[2], vals[3]]);
        right.push([vals[4], vals[5], vals[6]]);
    }
    let track = MotionTrack::new(times, left, right)?;
    let warnings = if extra.is_empty() {
        Vec::new()
    } else {
        vec![Warning::IgnoredColumns { columns: extra }]
    };
    Ok((track, warnings))
}

/// Renders a track in the table format read by [`load_motion`].
pub fn write_motion(track: &MotionTrack) -> String {
    let mut out = String::with_capacity(track.len() * 64);
    out.push_str("time,lh_x,lh_y,lh_z,rh_x,rh_y,rh_z\n");
    for i in 0..track.len() {
        let l = track.left[i];
        let r = track.right[i];
        let _ = writeln!(
            out,
            "{:.4},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            track.times[i], l[0], l[1], l[2], r[0], r[1], r[2]
        );
    }
    out
}

/// Clock alignment between motion and video.
///
/// `video_time = motion_time - offset + clap_video_time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    pub offset: f64,
    /// Summed two-hand acceleration magnitude at the peak, m/s².
    pub peak_value: f64,
    /// Motion-clock time of the peak.
    pub peak_time: f64,
}

impl SyncResult {
    pub fn to_motion_time(&self, video_time: f64, clap_video_time: f64) -> f64 {
        video_time - clap_video_time + self.offset
    }

    pub fn to_video_time(&self, motion_time: f64, clap_video_time: f64) -> f64 {
        motion_time - self.offset + clap_video_time
    }
}

/// Per-sample velocity and acceleration magnitudes of one hand.
struct Derivatives {
    /// Index into the input of the first derived sample.
    first: usize,
    speed: Vec<f64>,
    accel: Vec<f64>,
}

fn required_samples(half_width: usize) -> usize {
    2 * half_width + 3
}

fn derivatives(pos: &[Vec3], dt: f64, w: usize) -> Option<Derivatives> {
    let n = pos.len();
    if n < required_samples(w) {
        return None;
    }
    let width = (2 * w + 1) as f64;
    let smoothed: Vec<Vec3> = (w..n - w)
        .map(|i| {
            let mut acc = [0.0; 3];
            for p in &pos[i - w..=i + w] {
                for k in 0..3 {
                    acc[k] += p[k];
                }
            }
            acc.map(|v| v / width)
        })
        .collect();
    // smoothed[j] is sample j + w
    let m = smoothed.len();
    let mut speed = Vec::with_capacity(m - 2);
    let mut accel = Vec::with_capacity(m - 2);
    for j in 1..m - 1 {
        let (a, b, c) = (smoothed[j - 1], smoothed[j], smoothed[j + 1]);
        let v: Vec3 = std::array::from_fn(|k| (c[k] - a[k]) / (2.0 * dt));
        let acc: Vec3 = std::array::from_fn(|k| (c[k] - 2.0 * b[k] + a[k]) / (dt * dt));
        speed.push(norm(v));
        accel.push(norm(acc));
    }
    Some(Derivatives {
        first: w + 1,
        speed,
        accel,
    })
}

fn norm(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Finds the clap as the global maximum of the summed two-hand acceleration
/// magnitude inside `window` (default: the first 20 s). Ties go to the
/// earliest sample. A rival within 5% of the maximum and more than 0.5 s
/// away is reported as [`Warning::AmbiguousPeak`].
pub fn detect_clap(
    track: &MotionTrack,
    window: Option<(f64, f64)>,
) -> Result<(SyncResult, Vec<Warning>), MotionError> {
    detect_clap_with(track, window, DEFAULT_HALF_WIDTH)
}

pub fn detect_clap_with(
    track: &MotionTrack,
    window: Option<(f64, f64)>,
    half_width: usize,
) -> Result<(SyncResult, Vec<Warning>), MotionError> {
    let (ws, we) = window.unwrap_or((track.start(), track.start() + DEFAULT_CLAP_WINDOW));
    let out_of_range = MotionError::WindowOutOfRange { start: ws, end: we };
    if !(ws <= we) || we < track.start() - TIME_EPS || ws > track.end() + TIME_EPS {
        return Err(out_of_range);
    }
    let dt = track.dt();
    let (Some(l), Some(r)) = (
        derivatives(&track.left, dt, half_width),
        derivatives(&track.right, dt, half_width),
    ) else {
        return Err(MotionError::SliceTooShort {
            samples: track.len(),
            required: required_samples(half_width),
        });
    };
    let candidates: Vec<(f64, f64)> = l
        .accel
        .iter()
        .zip(&r.accel)
        .enumerate()
        .map(|(j, (a, b))| (track.times[j + l.first], a + b))
        .filter(|(t, _)| *t >= ws - TIME_EPS && *t <= we + TIME_EPS)
        .collect();
    let mut best: Option<(f64, f64)> = None;
    for &(t, v) in &candidates {
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((t, v));
        }
    }
    let Some((peak_time, peak_value)) = best else {
        return Err(out_of_range);
    };
    let mut rival: Option<(f64, f64)> = None;
    for &(t, v) in &candidates {
        if (t - peak_time).abs() > 0.5 && v >= 0.95 * peak_value && rival.is_none_or(|(_, rv)| v > rv) {
            rival = Some((t, v));
        }
    }
    let warnings = rival
        .map(|(rival_time, rival_value)| {
            vec![Warning::AmbiguousPeak {
                chosen_time: peak_time,
                rival_time,
                rival_value,
            }]
        })
        .unwrap_or_default();
    Ok((
        SyncResult {
            offset: peak_time,
            peak_value,
            peak_time,
        },
        warnings,
    ))
}

/// Samples of one segment, in motion time.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSlice {
    pub segment_index: usize,
    pub times: Vec<f64>,
    pub left: Vec<Vec3>,
    pub right: Vec<Vec3>,
    /// Nominal sample period of the source track.
    pub dt: f64,
}

impl MotionSlice {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Cuts the track into one slice per trial segment. Segment `i` covers the
/// half-open video interval `[t_i, t_{i+1})`; the final segment runs to the
/// end of the track. Segments reaching outside the track are truncated and
/// reported.
pub fn segment_motion(
    track: &MotionTrack,
    trial: &Trial,
    sync: &SyncResult,
) -> Result<(Vec<MotionSlice>, Vec<Warning>), MotionError> {
    let clap = trial.clap_video_time.ok_or(MotionError::MissingClap)?;
    let dt = track.dt();
    let covered_end = track.end() + dt;
    let mut warnings = Vec::new();
    let mut slices = Vec::with_capacity(trial.segments.len());
    for (i, seg) in trial.segments.iter().enumerate() {
        let start = sync.to_motion_time(seg.t_start, clap);
        let end = trial
            .segments
            .get(i + 1)
            .map(|next| sync.to_motion_time(next.t_start, clap));
        let outside = match end {
            Some(end) => start < track.start() - TIME_EPS || end > covered_end + TIME_EPS,
            None => start > track.end() + TIME_EPS,
        };
        if outside {
            warnings.push(Warning::SegmentOutsideTrack {
                segment: i,
                start,
                end: end.unwrap_or(covered_end),
                track_start: track.start(),
                track_end: track.end(),
            });
        }
        let lo = track.times.partition_point(|t| *t < start - TIME_EPS);
        let hi = match end {
            Some(end) => track.times.partition_point(|t| *t < end - TIME_EPS),
            None => track.len(),
        };
        let hi = hi.max(lo);
        slices.push(MotionSlice {
            segment_index: i,
            times: track.times[lo..hi].to_vec(),
            left: track.left[lo..hi].to_vec(),
            right: track.right[lo..hi].to_vec(),
            dt,
        });
    }
    Ok((slices, warnings))
}

fn hand_stats(d: &Derivatives) -> KinematicStats {
    let n = d.speed.len() as f64;
    KinematicStats {
        v_max: d.speed.iter().copied().fold(0.0, f64::max),
        v_mean: d.speed.iter().sum::<f64>() / n,
        a_max: d.accel.iter().copied().fold(0.0, f64::max),
        a_mean: d.accel.iter().sum::<f64>() / n,
    }
}

/// Speed and acceleration statistics of both hands over a slice, with
/// smoothing half-width `half_width`.
pub fn kinematics(slice: &MotionSlice, half_width: usize) -> Result<HandStats, MotionError> {
    let too_short = MotionError::SliceTooShort {
        samples: slice.len(),
        required: required_samples(half_width),
    };
    let l = derivatives(&slice.left, slice.dt, half_width).ok_or(too_short.clone())?;
    let r = derivatives(&slice.right, slice.dt, half_width).ok_or(too_short)?;
    Ok(HandStats {
        left: hand_stats(&l),
        right: hand_stats(&r),
    })
}

#[derive(Debug, Clone)]
pub struct StatsOptions {
    pub half_width: usize,
    pub clap_window: Option<(f64, f64)>,
}

impl Default for StatsOptions {
    fn default() -> Self {
        Self {
            half_width: DEFAULT_HALF_WIDTH,
            clap_window: None,
        }
    }
}

/// Kinematics of every segment of one trial, keyed by canonical segment
/// index. Failures are returned as warnings.
fn trial_segment_stats(
    trial: &Trial,
    track: &MotionTrack,
    g: &CloMGraph,
    opts: &StatsOptions,
    warnings: &mut Vec<Warning>,
) -> BTreeMap<usize, HandStats> {
    let key = trial.key();
    let mut out = BTreeMap::new();
    if trial.clap_video_time.is_none() {
        warnings.push(Warning::MissingClap { trial: key });
        return out;
    }
    let sync = match detect_clap_with(track, opts.clap_window, opts.half_width) {
        Ok((sync, w)) => {
            warnings.extend(w);
            sync
        }
        Err(e) => {
            warnings.push(Warning::ClapDetectionFailed {
                trial: key,
                reason: e.to_string(),
            });
            return out;
        }
    };
    let (canon, _) = canonicalize_trial(trial, &g.symmetry());
    let slices = match segment_motion(track, &canon, &sync) {
        Ok((slices, w)) => {
            warnings.extend(w);
            slices
        }
        Err(e) => {
            warnings.push(Warning::ClapDetectionFailed {
                trial: key,
                reason: e.to_string(),
            });
            return out;
        }
    };
    for slice in &slices {
        match kinematics(slice, opts.half_width) {
            Ok(stats) => {
                out.insert(slice.segment_index, stats);
            }
            Err(MotionError::SliceTooShort { samples, required }) => {
                warnings.push(Warning::SliceTooShort {
                    trial: key.clone(),
                    segment: slice.segment_index,
                    samples,
                    required,
                });
            }
            Err(e) => warnings.push(Warning::ClapDetectionFailed {
                trial: key.clone(),
                reason: e.to_string(),
            }),
        }
    }
    out
}

/// Computes per-occurrence kinematics on each edge's origin segment and
/// stores their equal-weight mean per hand. Edges without any scorable
/// occurrence get no stats. Never fails; problems come back as warnings.
pub fn attach_stats(
    g: &CloMGraph,
    trials: &[Trial],
    tracks: &BTreeMap<TrialKey, MotionTrack>,
    opts: &StatsOptions,
) -> (CloMGraph, Vec<Warning>) {
    let mut warnings = Vec::new();
    let by_key: BTreeMap<TrialKey, &Trial> = trials.iter().map(|t| (t.key(), t)).collect();
    let needed: std::collections::BTreeSet<TrialKey> = g
        .edges()
        .values()
        .flat_map(|r| r.occurrences.iter().map(|o| o.trial_key()))
        .collect();

    let mut per_trial: BTreeMap<TrialKey, BTreeMap<usize, HandStats>> = BTreeMap::new();
    for key in needed {
        let Some(trial) = by_key.get(&key) else {
            warnings.push(Warning::MissingTrial { trial: key });
            continue;
        };
        let Some(track) = tracks.get(&key) else {
            warnings.push(Warning::MissingTrack { trial: key });
            continue;
        };
        let stats = trial_segment_stats(trial, track, g, opts, &mut warnings);
        per_trial.insert(key, stats);
    }

    let mut out = g.clone();
    for (p, r) in g.edges() {
        let samples: Vec<HandStats> = r
            .occurrences
            .iter()
            .filter_map(|o| per_trial.get(&o.trial_key())?.get(&o.segment_index).copied())
            .collect();
        out.set_stats(p, HandStats::mean_of(&samples));
    }
    (out, warnings)
}
