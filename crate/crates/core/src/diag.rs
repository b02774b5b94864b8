use std::fmt;

use crate::model::TrialKey;

/// Non-fatal findings reported alongside results.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    EmptyCorpus,
    /// Every segment of the trial collapsed into one state after canonicalization.
    TrialCollapsed { trial: TrialKey },
    /// Adjacent segments became equal after canonicalization and were merged.
    SegmentsMerged { trial: TrialKey, count: usize },
    LabelNotFound { label: String },
    /// Second acceleration peak within 5% of the maximum and more than 0.5 s away.
    AmbiguousPeak {
        chosen_time: f64,
        rival_time: f64,
        rival_value: f64,
    },
    /// A segment's video interval maps (partly) outside the recorded motion.
    SegmentOutsideTrack {
        segment: usize,
        start: f64,
        end: f64,
        track_start: f64,
        track_end: f64,
    },
    SliceTooShort {
        trial: TrialKey,
        segment: usize,
        samples: usize,
        required: usize,
    },
    MissingTrack { trial: TrialKey },
    MissingTrial { trial: TrialKey },
    MissingClap { trial: TrialKey },
    ClapDetectionFailed { trial: TrialKey, reason: String },
    IgnoredColumns { columns: Vec<String> },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::EmptyCorpus => f.write_str("no trials to build from; graph is empty"),
            Warning::TrialCollapsed { trial } => {
                write!(f, "{trial}: all segments merged into one state; no edges contributed")
            }
            Warning::SegmentsMerged { trial, count } => {
                write!(f, "{trial}: {count} adjacent segment(s) merged after canonicalization")
            }
            Warning::LabelNotFound { label } => write!(f, "no edge labeled `{label}`"),
            Warning::AmbiguousPeak {
                chosen_time,
                rival_time,
                rival_value,
            } => write!(
                f,
                "ambiguous clap peak: chose t={chosen_time:.3} s, rival at t={rival_time:.3} s ({rival_value:.3} m/s²)"
            ),
            Warning::SegmentOutsideTrack {
                segment,
                start,
                end,
                track_start,
                track_end,
            } => write!(
                f,
                "segment {segment} maps to [{start:.3}, {end:.3}) s, outside motion [{track_start:.3}, {track_end:.3}] s; truncated"
            ),
            Warning::SliceTooShort {
                trial,
                segment,
                samples,
                required,
            } => write!(
                f,
                "{trial}: segment {segment} has {samples} samples, {required} required for kinematics"
            ),
            Warning::MissingTrack { trial } => write!(f, "{trial}: no motion track"),
            Warning::MissingTrial { trial } => write!(f, "{trial}: occurrence refers to an unknown trial"),
            Warning::MissingClap { trial } => write!(f, "{trial}: no #clap time; cannot synchronize"),
            Warning::ClapDetectionFailed { trial, reason } => {
                write!(f, "{trial}: clap detection failed: {reason}")
            }
            Warning::IgnoredColumns { columns } => {
                write!(f, "ignored extra motion columns: {}", columns.join(", "))
            }
        }
    }
}
