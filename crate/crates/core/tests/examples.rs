use std::collections::BTreeSet;
use std::path::PathBuf;

use clom_core::annotation::{parse_trial, primitives_of};
use clom_core::corpusgen::import_ground_truth;
use clom_core::graph::{build_graph, BuildOptions};
use clom_core::motion::load_motion;
use clom_core::symmetry::canonicalize;

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

#[test]
fn napkin_example_primitives() {
    let text = std::fs::read_to_string(data("examples/napkin_s01_t1.clom")).unwrap();
    let t = parse_trial(&text).unwrap();
    assert_eq!(t.subject_id, "s01");
    assert_eq!(t.metadata.get("annotator").map(String::as_str), Some("hand"));
    let prims: Vec<String> = primitives_of(&t)
        .iter()
        .map(|p| format!("{} --{}--> {}", p.origin, p.motion.as_str(), p.destination))
        .collect();
    assert_eq!(
        prims,
        [
            "Pie | - | Crumpled --Grasp corner--> PP | LC@LH | Crumpled",
            "PP | LC@LH | Crumpled --Trace edge--> 2PP | LC@LH+RC@RH | Crumpled",
            "2PP | LC@LH+RC@RH | Crumpled --Unfold in the air--> 2PP | LC@LH+RC@RH | Flat",
            "2PP | LC@LH+RC@RH | Flat --Place flat on table--> Pie | - | Flat",
            "Pie | - | Flat --Grasp corners on table--> 2PP+Pie | LC@LH+RC@RH | Flat",
            "2PP+Pie | LC@LH+RC@RH | Flat --Fold on table--> 2PP+Pie | FL@LH+FR@RH | SemiFolded",
            "2PP+Pie | FL@LH+FR@RH | SemiFolded --Release--> Pie | - | SemiFolded",
            "Pie | - | SemiFolded --Grasp corner--> PP+Pie | RC_2@RH | SemiFolded",
            "PP+Pie | RC_2@RH | SemiFolded --Grasp corner--> 2PP+Pie | LC_2@LH+RC_2@RH | SemiFolded",
            "2PP+Pie | LC_2@LH+RC_2@RH | SemiFolded --Fold on table--> 2PP+Pie | FL@LH+FR@RH | Folded",
            "2PP+Pie | FL@LH+FR@RH | Folded --Release--> Pie | - | Folded",
            "Pie | - | Folded --Smooth with palm--> PiPie | I@RH | Folded",
        ]
    );
}

#[test]
fn napkin_example_under_default_symmetry() {
    let text = std::fs::read_to_string(data("examples/napkin_s01_t1.clom")).unwrap();
    let t = parse_trial(&text).unwrap();
    let (g, w) = build_graph(&[t], &BuildOptions::default());
    assert!(w.is_empty(), "{w:?}");
    assert_eq!(g.edge_count(), 12);
    assert!(g.nodes().iter().all(|s| s.bindings().iter().all(|b| b.hand.is_none())));
    // the right-corner grasp folds onto the left-corner spelling
    assert!(g.nodes().iter().any(|s| s.to_string() == "PP+Pie | LC_2 | SemiFolded"));
}

#[test]
fn paperlike_corpus_is_consistent() {
    let dir = data("paperlike");
    let gt = import_ground_truth(&std::fs::read_to_string(dir.join("ground_truth.json")).unwrap()).unwrap();
    let mut trials = Vec::new();
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|x| x == "clom") {
            trials.push(parse_trial(&std::fs::read_to_string(&path).unwrap()).unwrap());
            let (track, w) = load_motion(&std::fs::read_to_string(path.with_extension("csv")).unwrap()).unwrap();
            assert!(w.is_empty());
            assert!(track.len() > 1000);
        }
    }
    assert_eq!(trials.len(), 24);
    let opts = BuildOptions::default();
    let (g, _) = build_graph(&trials, &opts);
    assert_eq!(g.trial_count(), 24);
    let truth: BTreeSet<(String, String, String)> = gt
        .edge_set()
        .iter()
        .map(|p| {
            (
                canonicalize(&p.origin, &opts.symmetry).to_string(),
                canonicalize(&p.destination, &opts.symmetry).to_string(),
                p.motion.key().to_string(),
            )
        })
        .collect();
    for p in g.edges().keys() {
        let key = (p.origin.to_string(), p.destination.to_string(), p.motion.key().to_string());
        assert!(truth.contains(&key), "{key:?} not in ground truth");
    }
}
