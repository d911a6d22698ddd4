//! Planar 4-DoF visual tracking.
//!
//! Two trackers share the geometry and image primitives in this crate:
//!
//! * [`rsst`]: correlation-filter tracker estimating translation, scale and
//!   in-plane rotation with three separately learned filters.
//! * [`rklt`]: grid KLT + RANSAC similarity estimate, refined against the
//!   first-frame template by inverse-compositional NCC alignment.
//!
//! [`eval`] implements the corner alignment and overlap metrics together with
//! success/robustness curves, and [`synth`] renders sequences with exact
//! ground truth for testing.

pub mod dataset;
pub mod dcf;
pub mod eval;
mod fft;
pub mod geom;
pub mod imgproc;
pub mod lk;
pub mod rklt;
pub mod rsst;
pub mod synth;

pub use geom::{CornerQuad, DofModel, Point2, SimilarityParams, WarpMatrix};
pub use imgproc::{FeatureMap, GrayImage};
