//! Cloth manipulation graphs built from annotated demonstrations.

pub mod annotation;
pub mod corpusgen;
pub mod diag;
pub mod export;
pub mod graph;
pub mod model;
pub mod motion;
pub mod stateparse;
pub mod symmetry;

pub use diag::Warning;
pub use model::{CloMGraph, ManipulationPrimitive, MotionLabel, SceneState, Trial};
pub use symmetry::SymmetryConfig;
