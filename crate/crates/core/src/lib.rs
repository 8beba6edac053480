//! Forecasting the day of a future biological event (tuber sprouting) from
//! long electrophysiological voltage recordings.
//!
//! The crate is organised as a pipeline:
//!
//! * [`ingest`] loads recordings and their metadata,
//! * [`preprocess`] applies the mains-notch / low-pass / downsampling chain and
//!   cuts signals into fixed windows,
//! * [`wavelet`] computes Morlet CWT scalograms of each window,
//! * [`features`] reduces scalograms to per-scale descriptors and labels them
//!   with days-until-event targets,
//! * [`regress`] fits gradient-boosted regression trees, alone or as a
//!   10-member ensemble with t-interval uncertainty,
//! * [`estimate`] turns per-window predictions into a per-subject event day,
//! * [`model`] stores a trained predictor with its pipeline and applies it,
//! * [`evaluate`] runs leave-one-subject-out cross-validation and builds the
//!   metric and calibration report,
//! * [`synth`] generates datasets with a planted pre-event signature.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod estimate;
pub mod evaluate;
pub mod features;
pub mod ingest;
pub mod model;
pub mod preprocess;
pub mod regress;
pub mod synth;
pub mod wavelet;

pub use config::PipelineConfig;
pub use error::{Error, Result};
