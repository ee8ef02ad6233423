//! Training, evaluation, logging and rendering for `activetrack-core`.
//!
//! A run is described by a [`config::TrainConfig`]; [`train::train`] runs the
//! learning loop and writes a JSONL record stream plus a binary checkpoint,
//! [`evaluate::evaluate`] scores a checkpoint, the tree-search baseline or a
//! random policy on fixed seeds, and [`render::render`] turns an episode log
//! into SVG frames.
//!
//! All randomness comes from one master seed split into named streams (see
//! [`activetrack_core::rng`]), so runs are bit-reproducible.

pub mod checkpoint;
pub mod config;
pub mod episode;
pub mod error;
pub mod evaluate;
pub mod render;
pub mod train;

pub use error::{Error, Result};
