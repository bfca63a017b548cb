//! Audio-visual temporal forgery detection and localization.
//!
//! Per-frame features for each modality are encoded, refined, and passed
//! through cross-reconstruction attention. Frame classifiers and boundary
//! modules then score every candidate segment, and post-processing turns the
//! boundary maps into ranked segment lists scored by AP/AR.

pub mod cli;
pub mod config;
pub mod cratrans;
pub mod domain;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod heads;
pub mod infer;
pub mod io;
pub mod model;
pub mod postprocess;
pub mod tensor;
pub mod train;

pub use config::PipelineConfig;
pub use error::{Error, Result};
