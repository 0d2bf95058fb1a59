//! Lightweight building surface reconstruction from Gaussian primitive sets.
//!
//! Stages, in pipeline order: [`render`] normal/depth maps from the primitive
//! field, extract structural [`edges`], score and [`pruning`] primitives by
//! multi-view edge consistency, validate [`visibility`] against depth, then
//! build the surface by Delaunay graph cut in [`meshing`] and measure it with
//! [`eval`]. [`synthetic`] generates test buildings with exact ground truth.

pub mod edges;
pub mod eval;
pub mod io;
pub mod loss;
pub mod meshing;
pub mod pipeline;
pub mod pruning;
pub mod render;
pub mod scene;
pub mod synthetic;
pub mod visibility;

pub use scene::{CameraView, GaussianPrimitive, ImageBuffer, PipelineConfig, TriangleMesh};
