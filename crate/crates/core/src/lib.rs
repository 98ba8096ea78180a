//! Motion-state aware multi-object tracking toolkit.
//!
//! Combines a dual-mode Gaussian background model and blob tracker (the
//! traditional branch) with externally produced detection-based tracks (the
//! deep branch), judges per-object motion state, fuses both branches and
//! scores the result with motion-state validation metrics.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, the precision used by the file formats and
//! the pipeline.

pub mod assignment;
pub mod bgmodel;
pub mod error;
pub mod fuse;
pub mod geometry;
pub mod image;
pub mod io;
pub mod judge;
pub mod mask;
pub mod metrics;
pub mod pipeline;
pub mod registration;
pub mod scalar;
pub mod synth;
pub mod track;
pub mod tradtrack;

pub use error::{Error, Result};
pub use geometry::{apply_transform, iou, mahalanobis_distance, Point};
pub use image::GrayImage;
pub use mask::ForegroundMask;
pub use scalar::Scalar;
pub use track::{MotionAnnotation, MotionState, Source};

pub type BBox = geometry::BoundingBox<f64>;
pub type BBoxF32 = geometry::BoundingBox<f32>;
pub type Affine = geometry::AffineTransform<f64>;
pub type AffineF32 = geometry::AffineTransform<f32>;
pub type Track = track::TrackRecord<f64>;
pub type Verdict = judge::MotionVerdict<f64>;
pub type Report = metrics::MetricReport<f64>;
pub type Fused = fuse::FusedRecord<f64>;
