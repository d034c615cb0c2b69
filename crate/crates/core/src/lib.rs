//! Multi-object tracking by detection with fused strong and weak association cues.
//!
//! The pipeline couples a constant-velocity Kalman filter whose state carries the
//! detection confidence with a two-stage association cascade. The first stage
//! fuses motion (IoU or Mahalanobis), appearance (embedding cosine), height-IoU and
//! confidence costs under one of four fusion methods; the second stage rescues
//! low-confidence detections on motion alone.

// `!(a <= b)` style comparisons are used on purpose so that NaN fails the test
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod appearance;
pub mod assignment;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fusion;
pub mod geometry;
pub mod kalman;
pub mod metrics;
pub mod mot_io;
pub mod synthetic;
pub mod tracker;

pub use error::{Result, TrackError};
