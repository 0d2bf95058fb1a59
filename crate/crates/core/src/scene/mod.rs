//! Domain types shared by every stage.

mod camera;
mod config;
mod image;
mod mesh;
mod primitive;
mod validate;

pub use camera::CameraView;
pub use config::{ConfigError, PipelineConfig, CONFIG_KEYS};
pub use image::{ImageBuffer, ImageError};
pub use mesh::TriangleMesh;
pub use primitive::{tangent_frame, GaussianPrimitive};
pub use validate::{
    validate_primitive, validate_scene, validate_view, Subject, ValidationReport, Violation,
};
