//! Symbolic grading of diabetic retinopathy from lesion segmentation masks.
//!
//! The pipeline runs on already-segmented binary masks, one per lesion class
//! (MA, HE, SE, EX):
//!
//! 1. [`mask_io`] reads PGM masks and the dataset manifest.
//! 2. [`regions`] labels 8-connected lesion regions and measures their sizes.
//! 3. [`symbolic`] turns region sets into count vectors, either plain counts
//!    per class or counts per class and size bucket.
//! 4. [`grader`] trains a fully connected network mapping a count vector to a
//!    DR grade and a DME grade.
//! 5. [`explain`] renders the prediction as an English sentence built from the
//!    counts, and parses such sentences back.
//! 6. [`eval`] scores predictions with the joint DR/DME accuracy and runs the
//!    plain-vs-bucketed ablation.
//!
//! [`synth`] generates synthetic datasets with known region counts and
//! rule-based labels; it is the ground truth for the end-to-end tests.

pub mod eval;
pub mod explain;
pub mod grader;
pub mod mask_io;
pub mod pipeline;
pub mod regions;
pub mod symbolic;
pub mod synth;
mod table;

pub use eval::{joint_accuracy, AblationReport, EvalReport};
pub use explain::Explanation;
pub use grader::{GradePair, GraderModel, TrainConfig};
pub use mask_io::{LesionClass, LesionMask, ManifestRecord};
pub use regions::{extract_regions, Region, RegionSet};
pub use symbolic::{FeatureMode, FeatureVector, SizeBucket, SizeThresholds};
pub use table::TableError;

/// Any failure from a multi-stage pipeline operation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Mask(#[from] mask_io::MaskError),
    #[error(transparent)]
    Manifest(#[from] mask_io::ManifestError),
    #[error(transparent)]
    Feature(#[from] symbolic::FeatureError),
    #[error(transparent)]
    Grader(#[from] grader::GraderError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("{0}")]
    Invalid(String),
}
