//! `clom`: build, filter and inspect cloth manipulation graphs.

mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use clom_core::annotation::{lint_trial, parse_trial_with};
use clom_core::corpusgen::{generate_corpus, import_ground_truth, GeneratorConfig};
use clom_core::export::{export_dot, export_json, import_json, DotOptions};
use clom_core::graph::{
    build_graph, complexity_metrics, filter_graph, rank_strategies_with, subgraph_by_label, BuildOptions,
    RankOptions,
};
use clom_core::model::{CloMGraph, SceneState, Trial, TrialKey};
use clom_core::motion::{attach_stats, load_motion, MotionTrack, StatsOptions, DEFAULT_HALF_WIDTH};
use clom_core::stateparse::{StateParser, Vocabulary};
use clom_core::Warning;

use config::Settings;

/// Bad invocation: exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Input that failed validation: exit code 1, diagnostics already printed.
#[derive(Debug)]
struct ValidationFailed(usize);

impl fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} file(s) failed validation", self.0)
    }
}

impl std::error::Error for ValidationFailed {}

#[derive(Parser)]
#[command(name = "clom", version, about = "Cloth manipulation graphs from annotated demonstrations")]
struct Cli {
    /// Config file (`key = value` lines); defaults to $CLOM_CONFIG.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Settings that override the config file.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true, value_name = "BOOL")]
    drop_hands: Option<bool>,
    #[arg(long, global = true, value_name = "BOOL")]
    mirror_lr: Option<bool>,
    #[arg(long = "rotate-180", global = true, value_name = "BOOL")]
    rotate_180: Option<bool>,
    #[arg(long, global = true, value_name = "BOOL")]
    drop_layers: Option<bool>,
    /// Extra grasp-location tokens in rank order, comma separated.
    #[arg(long, global = true, value_delimiter = ',', value_name = "TOKENS")]
    locations: Option<Vec<String>>,
}

#[derive(Args)]
struct GraphInput {
    /// Graph JSON; standard input when omitted or `-`.
    #[arg(long, short, value_name = "FILE")]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and lint annotation files.
    Validate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Accept common spelling variants.
        #[arg(long)]
        lenient: bool,
    },
    /// Build a graph from annotation files.
    Build {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_name = "K")]
        min_support: Option<usize>,
        /// Only ingest trials of this task; repeatable.
        #[arg(long = "task", value_name = "TASK")]
        tasks: Vec<String>,
        #[arg(long)]
        lenient: bool,
    },
    /// Drop edges seen fewer than K times, then isolated nodes.
    Filter {
        #[command(flatten)]
        input: GraphInput,
        #[arg(long, value_name = "K")]
        min_support: Option<usize>,
    },
    /// Edges with a label plus everything reachable after them.
    Subgraph {
        #[command(flatten)]
        input: GraphInput,
        #[arg(long)]
        label: String,
        /// States that are kept but not expanded.
        #[arg(long, num_args = 1.., value_name = "STATE")]
        absorbing: Vec<String>,
    },
    /// Attach per-edge kinematic statistics from motion tables.
    Stats {
        #[command(flatten)]
        input: GraphInput,
        /// Directory of `X.clom` annotations with matching `X.csv` tables.
        #[arg(long, value_name = "DIR")]
        motion_dir: PathBuf,
        /// Smoothing half-width in samples.
        #[arg(long, value_name = "W")]
        half_width: Option<usize>,
        /// Clap search window in motion seconds, `start,end`.
        #[arg(long, value_name = "START,END", value_parser = parse_window_arg)]
        clap_window: Option<(f64, f64)>,
    },
    /// Rank start-to-goal strategies by likelihood.
    Plan {
        #[command(flatten)]
        input: GraphInput,
        #[arg(long, value_name = "STATE")]
        from: String,
        #[arg(long, value_name = "STATE")]
        to: String,
        #[arg(short, default_value_t = 5, value_name = "N")]
        k: usize,
        /// Cap on enumerated complete paths.
        #[arg(long, default_value_t = RankOptions::DEFAULT_MAX_PATHS)]
        max_paths: usize,
    },
    /// Size and branching measures as JSON.
    Metrics {
        #[command(flatten)]
        input: GraphInput,
    },
    /// Graphviz rendering with support coloring.
    ExportDot {
        #[command(flatten)]
        input: GraphInput,
        #[arg(long, value_name = "N")]
        red: Option<usize>,
        #[arg(long, value_name = "N")]
        orange: Option<usize>,
    },
    /// Sample a synthetic corpus from a ground-truth graph.
    GenCorpus {
        #[arg(long, value_name = "FILE")]
        ground_truth: PathBuf,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 24)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        subjects: usize,
        #[arg(long, default_value_t = 0.0)]
        mirror_probability: f64,
        #[arg(long)]
        annotate_hands: bool,
    },
}

fn parse_window_arg(s: &str) -> Result<(f64, f64), String> {
    config::parse_window(s).ok_or_else(|| "expected `start,end` with start < end".to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.downcast_ref::<ValidationFailed>().is_none() {
                eprintln!("error: {e:#}");
            }
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn settings(cli: &Cli) -> anyhow::Result<Settings> {
    let path = cli
        .config
        .clone()
        .or_else(|| std::env::var_os("CLOM_CONFIG").filter(|v| !v.is_empty()).map(PathBuf::from));
    let mut s = match path {
        Some(p) => Settings::load(&p)?,
        None => Settings::default(),
    };
    let o = &cli.overrides;
    if let Some(v) = o.drop_hands {
        s.symmetry.drop_hands = v;
    }
    if let Some(v) = o.mirror_lr {
        s.symmetry.mirror_lr = v;
    }
    if let Some(v) = o.rotate_180 {
        s.symmetry.rotate_180 = v;
    }
    if let Some(v) = o.drop_layers {
        s.symmetry.drop_layers = v;
    }
    if let Some(v) = &o.locations {
        s.locations = v.clone();
    }
    Ok(s)
}

fn warn_all(warnings: &[Warning]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn emit(text: &str) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn read_input(input: &GraphInput) -> anyhow::Result<CloMGraph> {
    let text = match input.input.as_deref() {
        Some(p) if p != Path::new("-") => {
            std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?
        }
        _ => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).context("cannot read standard input")?;
            s
        }
    };
    import_json(&text).context("invalid graph JSON")
}

fn parser(s: &Settings, lenient: bool) -> StateParser {
    StateParser::new(Vocabulary::with_extras(s.locations.iter().cloned())).lenient(lenient)
}

/// Parses every file, printing diagnostics. Fails after reporting all
/// broken files.
fn read_trials(files: &[PathBuf], parser: &StateParser) -> anyhow::Result<Vec<(PathBuf, Trial)>> {
    let mut out = Vec::with_capacity(files.len());
    let mut failed = 0;
    for path in files {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        match parse_trial_with(&text, parser) {
            Ok(t) => out.push((path.clone(), t)),
            Err(e) => {
                eprintln!("{}:{}: error: {e}", path.display(), e.line());
                failed += 1;
            }
        }
    }
    if failed > 0 {
        return Err(ValidationFailed(failed).into());
    }
    Ok(out)
}

fn check_unique(trials: &[(PathBuf, Trial)]) -> anyhow::Result<()> {
    let mut seen: BTreeMap<TrialKey, &Path> = BTreeMap::new();
    for (path, t) in trials {
        if let Some(prev) = seen.insert(t.key(), path) {
            return Err(anyhow!(
                "trial {} appears in both {} and {}",
                t.key(),
                prev.display(),
                path.display()
            ));
        }
    }
    Ok(())
}

fn parse_state_arg(p: &StateParser, flag: &str, text: &str) -> Result<SceneState, UsageError> {
    p.parse_state(text)
        .map_err(|e| UsageError(format!("{flag} `{text}`: {e}")))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let s = settings(&cli)?;
    match cli.command {
        Command::Validate { files, lenient } => {
            let p = parser(&s, lenient);
            let mut failed = 0;
            for path in &files {
                let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
                match parse_trial_with(&text, &p) {
                    Ok(t) => {
                        for l in lint_trial(&t) {
                            eprintln!("{}: row {}: warning: {}", path.display(), l.row, l.lint);
                        }
                        println!("{}: ok ({} segments)", path.display(), t.segments.len());
                    }
                    Err(e) => {
                        eprintln!("{}:{}: error: {e}", path.display(), e.line());
                        println!("{}: invalid", path.display());
                        failed += 1;
                    }
                }
            }
            if failed > 0 {
                return Err(ValidationFailed(failed).into());
            }
            Ok(())
        }
        Command::Build {
            files,
            min_support,
            tasks,
            lenient,
        } => {
            let trials = read_trials(&files, &parser(&s, lenient))?;
            check_unique(&trials)?;
            let trials: Vec<Trial> = trials.into_iter().map(|(_, t)| t).collect();
            let opts = BuildOptions {
                symmetry: s.symmetry,
                task_filter: (!tasks.is_empty()).then_some(tasks),
            };
            let (mut g, warnings) = build_graph(&trials, &opts);
            warn_all(&warnings);
            if let Some(k) = min_support.or(s.min_support) {
                g = filter_graph(&g, k);
            }
            emit(&export_json(&g))
        }
        Command::Filter { input, min_support } => {
            let k = min_support
                .or(s.min_support)
                .ok_or_else(|| UsageError("filter: --min-support is required".into()))?;
            let g = read_input(&input)?;
            emit(&export_json(&filter_graph(&g, k)))
        }
        Command::Subgraph {
            input,
            label,
            absorbing,
        } => {
            let g = read_input(&input)?;
            let p = parser(&s, false);
            let absorbing = absorbing
                .iter()
                .map(|a| parse_state_arg(&p, "--absorbing", a))
                .collect::<Result<BTreeSet<_>, _>>()?;
            let (sub, warnings) = subgraph_by_label(&g, &label, &absorbing);
            warn_all(&warnings);
            emit(&export_json(&sub))
        }
        Command::Stats {
            input,
            motion_dir,
            half_width,
            clap_window,
        } => {
            let g = read_input(&input)?;
            let mut files: Vec<PathBuf> = std::fs::read_dir(&motion_dir)
                .with_context(|| format!("cannot read directory {}", motion_dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "clom"))
                .collect();
            files.sort();
            let trials = read_trials(&files, &parser(&s, false))?;
            check_unique(&trials)?;
            let mut tracks: BTreeMap<TrialKey, MotionTrack> = BTreeMap::new();
            for (path, t) in &trials {
                let csv = path.with_extension("csv");
                if !csv.exists() {
                    continue;
                }
                let text = std::fs::read_to_string(&csv).with_context(|| format!("cannot read {}", csv.display()))?;
                match load_motion(&text) {
                    Ok((track, warnings)) => {
                        for w in warnings {
                            eprintln!("{}: warning: {w}", csv.display());
                        }
                        tracks.insert(t.key(), track);
                    }
                    Err(e) => eprintln!("{}: warning: skipped: {e}", csv.display()),
                }
            }
            let trials: Vec<Trial> = trials.into_iter().map(|(_, t)| t).collect();
            let opts = StatsOptions {
                half_width: half_width.or(s.half_width).unwrap_or(DEFAULT_HALF_WIDTH),
                clap_window: clap_window.or(s.clap_window),
            };
            if opts.half_width == 0 {
                return Err(UsageError("--half-width must be at least 1".into()).into());
            }
            let (g, warnings) = attach_stats(&g, &trials, &tracks, &opts);
            warn_all(&warnings);
            emit(&export_json(&g))
        }
        Command::Plan {
            input,
            from,
            to,
            k,
            max_paths,
        } => {
            let g = read_input(&input)?;
            let p = parser(&s, false);
            let start = parse_state_arg(&p, "--from", &from)?;
            let goal = parse_state_arg(&p, "--to", &to)?;
            for (flag, st) in [("--from", &start), ("--to", &goal)] {
                if !g.nodes().contains(st) {
                    eprintln!("warning: {flag} state `{st}` is not in the graph");
                }
            }
            let ranking = rank_strategies_with(&g, &start, &goal, &RankOptions { k, max_paths });
            if ranking.truncated {
                eprintln!("warning: enumeration stopped after {} paths", ranking.enumerated);
            }
            let strategies: Vec<_> = ranking
                .paths
                .iter()
                .enumerate()
                .map(|(i, path)| {
                    json!({
                        "rank": i + 1,
                        "likelihood": path.likelihood.to_string(),
                        "likelihood_f64": path.likelihood_f64(),
                        "length": path.length(),
                        "bottleneck_support": path.bottleneck_support,
                        "steps": path.edges.iter().map(|e| json!({
                            "origin": e.origin.to_string(),
                            "destination": e.destination.to_string(),
                            "label": g.edges().get_key_value(e).map_or(e.motion.as_str(), |(k, _)| k.motion.as_str()),
                            "multiplicity": g.edges()[e].multiplicity(),
                        })).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let doc = json!({
                "from": start.to_string(),
                "to": goal.to_string(),
                "enumerated": ranking.enumerated,
                "truncated": ranking.truncated,
                "strategies": strategies,
            });
            emit(&format!("{}\n", serde_json::to_string_pretty(&doc)?))
        }
        Command::Metrics { input } => {
            let g = read_input(&input)?;
            let m = complexity_metrics(&g);
            let mut doc = serde_json::to_value(&m)?;
            doc["trial_count"] = g.trial_count().into();
            emit(&format!("{}\n", serde_json::to_string_pretty(&doc)?))
        }
        Command::ExportDot { input, red, orange } => {
            let g = read_input(&input)?;
            let opts = DotOptions {
                red_threshold: red.or(s.red_threshold),
                orange_threshold: orange.or(s.orange_threshold),
            };
            emit(&export_dot(&g, &opts))
        }
        Command::GenCorpus {
            ground_truth,
            out_dir,
            trials,
            seed,
            subjects,
            mirror_probability,
            annotate_hands,
        } => {
            if !(0.0..=1.0).contains(&mirror_probability) {
                return Err(UsageError("--mirror-probability must lie in [0, 1]".into()).into());
            }
            let text = std::fs::read_to_string(&ground_truth)
                .with_context(|| format!("cannot read {}", ground_truth.display()))?;
            let gt = import_ground_truth(&text).context("invalid ground truth")?;
            let cfg = GeneratorConfig {
                n_trials: trials,
                seed,
                subjects,
                mirror_probability,
                annotate_hands,
                ..Default::default()
            };
            let corpus = generate_corpus(&gt, &cfg)?;
            std::fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
            for t in &corpus {
                std::fs::write(out_dir.join(format!("{}.clom", t.file_stem)), &t.annotation)?;
                std::fs::write(out_dir.join(format!("{}.csv", t.file_stem)), &t.motion)?;
            }
            eprintln!("wrote {} trial(s) to {}", corpus.len(), out_dir.display());
            Ok(())
        }
    }
}
