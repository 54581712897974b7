//! Cone-beam X-ray projection simulation.

mod geometry;
mod image;
mod noise;
mod preset;
mod project;
mod quantize;
mod trace;

pub use geometry::{AcquisitionConfig, PixelRays, ProjectionGeometry};
pub use image::{ImageMeta, ProjectionImage};
pub use noise::{add_noise, NoiseKind, NoiseModel};
pub use preset::DevicePreset;
pub use project::{
    focal_blur, focal_blur_sigma_px, render, simulate_projection, simulate_rotation_series,
};
pub use quantize::{dequantize, quantize, QuantizationSpec};
pub use trace::{ray_path_lengths, Scene, TraceMesh, HIT_TOLERANCE};
