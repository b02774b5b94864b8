//! `key = value` run configuration. Blank lines and `#` comments are
//! skipped; unknown keys are rejected so typos do not pass silently.

use std::path::Path;

use anyhow::Context;
use clom_core::symmetry::SymmetryConfig;

use crate::UsageError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub symmetry: SymmetryConfig,
    pub half_width: Option<usize>,
    pub red_threshold: Option<usize>,
    pub orange_threshold: Option<usize>,
    pub min_support: Option<usize>,
    pub clap_window: Option<(f64, f64)>,
    /// Extra grasp-location tokens, in rank order.
    pub locations: Vec<String>,
}

pub const KEYS: [&str; 10] = [
    "drop_hands",
    "mirror_lr",
    "rotate_180",
    "drop_layers",
    "half_width",
    "red_threshold",
    "orange_threshold",
    "min_support",
    "clap_window",
    "locations",
];

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

pub fn parse_window(v: &str) -> Option<(f64, f64)> {
    let (a, b) = v.split_once(',')?;
    let a: f64 = a.trim().parse().ok()?;
    let b: f64 = b.trim().parse().ok()?;
    (a.is_finite() && b.is_finite() && a < b).then_some((a, b))
}

impl Settings {
    pub fn parse(text: &str, origin: &str) -> Result<Self, UsageError> {
        let mut s = Settings::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = format!("{origin}:{}", idx + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| UsageError(format!("{at}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || UsageError(format!("{at}: invalid value `{value}` for `{key}`"));
            let boolean = || parse_bool(value).ok_or_else(bad);
            let count = || value.parse::<usize>().map_err(|_| bad());
            match key {
                "drop_hands" => s.symmetry.drop_hands = boolean()?,
                "mirror_lr" => s.symmetry.mirror_lr = boolean()?,
                "rotate_180" => s.symmetry.rotate_180 = boolean()?,
                "drop_layers" => s.symmetry.drop_layers = boolean()?,
                "half_width" => s.half_width = Some(count()?),
                "red_threshold" => s.red_threshold = Some(count()?),
                "orange_threshold" => s.orange_threshold = Some(count()?),
                "min_support" => s.min_support = Some(count()?),
                "clap_window" => s.clap_window = Some(parse_window(value).ok_or_else(bad)?),
                "locations" => {
                    s.locations = value
                        .split([',', ' '])
                        .filter(|t| !t.is_empty())
                        .map(str::to_string)
                        .collect()
                }
                _ => {
                    return Err(UsageError(format!(
                        "{at}: unknown key `{key}` (expected one of {})",
                        KEYS.join(", ")
                    )))
                }
            }
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Ok(Self::parse(&text, &path.display().to_string())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let s = Settings::parse(
            "# experiment\nmirror_lr = false\nrotate_180=yes\nhalf_width = 3 # wider\nlocations = ML, MR\nclap_window = 0, 10\n",
            "cfg",
        )
        .unwrap();
        assert!(!s.symmetry.mirror_lr);
        assert!(s.symmetry.rotate_180);
        assert!(s.symmetry.drop_hands);
        assert_eq!(s.half_width, Some(3));
        assert_eq!(s.locations, ["ML", "MR"]);
        assert_eq!(s.clap_window, Some((0.0, 10.0)));
    }

    #[test]
    fn rejects_unknown_key_and_bad_value() {
        let e = Settings::parse("mirror = true", "cfg").unwrap_err();
        assert!(e.0.contains("cfg:1") && e.0.contains("`mirror`"));
        let e = Settings::parse("\nhalf_width = two", "cfg").unwrap_err();
        assert!(e.0.contains("cfg:2"));
    }
}
