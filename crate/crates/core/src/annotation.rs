//! `.clom` trial annotation files.
//!
//! Line-oriented UTF-8. A header of `#key: value` lines is followed by one
//! TAB-separated row per segment:
//!
//! ```text
//! #format: clom/1
//! #subject: s01
//! #task: napkin
//! #trial: 1
//! #clap: 1.250
//! 3.100	Pie | - | Crumpled	Grasp corner
//! 4.870	PP | LC@LH | Crumpled	Trace edge
//! 7.020	2PP | LC+RC | Crumpled	-
//! ```
//!
//! Times are seconds from video start. The final row's action is `-`.
//! Lines starting with `#` that are not `key: value` pairs are comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{ManipulationPrimitive, MotionLabel, Segment, StateLint, Trial};
use crate::stateparse::{ParseError, StateParser};

pub const FORMAT_TAG: &str = "clom/1";

/// Parse failures. `line` is the 1-based file line; `row` is the 1-based
/// segment row.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnnotationError {
    #[error("line {line}: header missing (no `#key: value` lines before the first row)")]
    HeaderMissing { line: usize },
    #[error("line {line}: required header key `{key}` missing")]
    MissingHeaderKey { line: usize, key: &'static str },
    #[error("line {line}: invalid value `{value}` for header key `{key}`")]
    BadHeaderValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("line {line}: unsupported format `{value}` (expected `{FORMAT_TAG}`)")]
    UnsupportedFormat { line: usize, value: String },
    #[error("row {row} (line {line}): expected `time<TAB>state<TAB>action`, found {columns} column(s)")]
    MalformedRow {
        row: usize,
        line: usize,
        columns: usize,
    },
    #[error("row {row} (line {line}): invalid time `{text}`")]
    InvalidTime { row: usize, line: usize, text: String },
    #[error("row {row} (line {line}): {source}")]
    State {
        row: usize,
        line: usize,
        #[source]
        source: ParseError,
    },
    #[error("row {row} (line {line}): start time does not increase")]
    NonMonotonicTime { row: usize, line: usize },
    #[error("row {row} (line {line}): state equals the previous row's state")]
    DuplicateConsecutiveState { row: usize, line: usize },
    #[error("row {row} (line {line}): missing action for a non-final row")]
    MissingAction { row: usize, line: usize },
    #[error("row {row} (line {line}): final row must not carry an action")]
    DanglingAction { row: usize, line: usize },
    #[error("line {line}: a trial needs at least 2 segment rows, found {count}")]
    TooFewSegments { line: usize, count: usize },
}

impl AnnotationError {
    pub fn line(&self) -> usize {
        use AnnotationError::*;
        match self {
            HeaderMissing { line }
            | MissingHeaderKey { line, .. }
            | BadHeaderValue { line, .. }
            | UnsupportedFormat { line, .. }
            | MalformedRow { line, .. }
            | InvalidTime { line, .. }
            | State { line, .. }
            | NonMonotonicTime { line, .. }
            | DuplicateConsecutiveState { line, .. }
            | MissingAction { line, .. }
            | DanglingAction { line, .. }
            | TooFewSegments { line, .. } => *line,
        }
    }

    /// Segment row for row-level errors.
    pub fn row(&self) -> Option<usize> {
        use AnnotationError::*;
        match self {
            MalformedRow { row, .. }
            | InvalidTime { row, .. }
            | State { row, .. }
            | NonMonotonicTime { row, .. }
            | DuplicateConsecutiveState { row, .. }
            | MissingAction { row, .. }
            | DanglingAction { row, .. } => Some(*row),
            _ => None,
        }
    }
}

/// A soft finding on an otherwise valid trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialLint {
    pub row: usize,
    pub lint: StateLint,
}

/// Strict parse with the default vocabulary.
pub fn parse_trial(text: &str) -> Result<Trial, AnnotationError> {
    parse_trial_with(text, &StateParser::default())
}

pub fn parse_trial_with(text: &str, parser: &StateParser) -> Result<Trial, AnnotationError> {
    let mut header: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut segments: Vec<Segment> = Vec::new();
    let mut seen_header = false;
    let mut last_line = 0;
    let mut first_row_line = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            continue;
        }
        if let Some(body) = trimmed.strip_prefix('#') {
            if segments.is_empty() {
                if let Some((k, v)) = body.split_once(':') {
                    let k = k.trim();
                    if !k.is_empty() && !k.contains(char::is_whitespace) {
                        seen_header = true;
                        header.insert(k.to_string(), (line, v.trim().to_string()));
                    }
                }
            }
            continue;
        }
        if !seen_header {
            return Err(AnnotationError::HeaderMissing { line });
        }
        first_row_line.get_or_insert(line);
        let row = segments.len() + 1;
        let cols: Vec<&str> = trimmed.split('\t').collect();
        if !(2..=3).contains(&cols.len()) {
            return Err(AnnotationError::MalformedRow {
                row,
                line,
                columns: cols.len(),
            });
        }
        let t_text = cols[0].trim();
        let t_start = t_text
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite() && *t >= 0.0)
            .ok_or_else(|| AnnotationError::InvalidTime {
                row,
                line,
                text: t_text.to_string(),
            })?;
        let state = parser
            .parse_state(cols[1])
            .map_err(|source| AnnotationError::State { row, line, source })?;
        let action_text = cols.get(2).map(|s| s.trim()).unwrap_or("-");
        let action = if action_text == "-" {
            None
        } else {
            MotionLabel::new(action_text)
        };
        if let Some(prev) = segments.last() {
            if t_start <= prev.t_start {
                return Err(AnnotationError::NonMonotonicTime { row, line });
            }
            if state == prev.state {
                return Err(AnnotationError::DuplicateConsecutiveState { row, line });
            }
            if prev.action.is_none() {
                return Err(AnnotationError::MissingAction {
                    row: row - 1,
                    line: prev_line(text, line),
                });
            }
        }
        segments.push(Segment {
            t_start,
            state,
            action,
        });
    }

    if !seen_header {
        return Err(AnnotationError::HeaderMissing { line: 1 });
    }
    if segments.len() < 2 {
        return Err(AnnotationError::TooFewSegments {
            line: last_line.max(1),
            count: segments.len(),
        });
    }
    if segments.last().is_some_and(|s| s.action.is_some()) {
        return Err(AnnotationError::DanglingAction {
            row: segments.len(),
            line: last_row_line(text),
        });
    }

    let first_line = first_row_line.unwrap_or(1);
    let take = |header: &mut BTreeMap<String, (usize, String)>, key: &'static str| {
        header
            .remove(key)
            .ok_or(AnnotationError::MissingHeaderKey {
                line: first_line,
                key,
            })
    };
    if let Some((line, value)) = header.remove("format") {
        if value != FORMAT_TAG {
            return Err(AnnotationError::UnsupportedFormat { line, value });
        }
    }
    let (_, subject_id) = take(&mut header, "subject")?;
    let (_, task_id) = take(&mut header, "task")?;
    let (trial_line, trial_text) = take(&mut header, "trial")?;
    let trial_index = trial_text
        .parse::<u32>()
        .ok()
        .filter(|i| *i >= 1)
        .ok_or(AnnotationError::BadHeaderValue {
            line: trial_line,
            key: "trial".into(),
            value: trial_text.clone(),
        })?;
    let clap_video_time = match header.remove("clap") {
        None => None,
        Some((line, v)) => Some(
            v.parse::<f64>()
                .ok()
                .filter(|t| t.is_finite() && *t >= 0.0)
                .ok_or(AnnotationError::BadHeaderValue {
                    line,
                    key: "clap".into(),
                    value: v.clone(),
                })?,
        ),
    };
    let cloth = header.remove("cloth").map(|(_, v)| v);
    let metadata = header.into_iter().map(|(k, (_, v))| (k, v)).collect();

    Ok(Trial {
        subject_id,
        task_id,
        trial_index,
        clap_video_time,
        cloth,
        metadata,
        segments,
    })
}

fn is_row(line: &str) -> bool {
    let l = line.trim_end_matches('\r');
    !l.trim().is_empty() && !l.starts_with('#')
}

fn prev_line(text: &str, line: usize) -> usize {
    text.lines()
        .enumerate()
        .take(line - 1)
        .filter(|(_, l)| is_row(l))
        .map(|(i, _)| i + 1)
        .last()
        .unwrap_or(line)
}

fn last_row_line(text: &str) -> usize {
    text.lines()
        .enumerate()
        .filter(|(_, l)| is_row(l))
        .map(|(i, _)| i + 1)
        .last()
        .unwrap_or(1)
}

/// Soft findings for `validate`: states whose grasp involves the subject's
/// hands without any grasp location.
pub fn lint_trial(t: &Trial) -> Vec<TrialLint> {
    t.segments
        .iter()
        .enumerate()
        .flat_map(|(i, s)| {
            s.state
                .lints()
                .into_iter()
                .map(move |lint| TrialLint { row: i + 1, lint })
        })
        .collect()
}

/// The primitives a trial demonstrates, one per consecutive segment pair.
pub fn primitives_of(trial: &Trial) -> Vec<ManipulationPrimitive> {
    trial
        .segments
        .windows(2)
        .filter_map(|w| {
            let motion = w[0].action.clone()?;
            ManipulationPrimitive::new(w[0].state.clone(), w[1].state.clone(), motion)
        })
        .collect()
}

/// Renders a trial in the `.clom` format. Times use millisecond precision.
pub fn write_trial(t: &Trial) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "#format: {FORMAT_TAG}");
    let _ = writeln!(out, "#subject: {}", t.subject_id);
    let _ = writeln!(out, "#task: {}", t.task_id);
    let _ = writeln!(out, "#trial: {}", t.trial_index);
    if let Some(c) = t.clap_video_time {
        let _ = writeln!(out, "#clap: {c:.3}");
    }
    if let Some(c) = &t.cloth {
        let _ = writeln!(out, "#cloth: {c}");
    }
    for (k, v) in &t.metadata {
        let _ = writeln!(out, "#{k}: {v}");
    }
    for s in &t.segments {
        let action = s.action.as_ref().map(|a| a.as_str()).unwrap_or("-");
        let _ = writeln!(out, "{:.3}\t{}\t{}", s.t_start, s.state, action);
    }
    out
}
