use alloc::string::String;

use serde::{Deserialize, Serialize};

use super::{NoiseModel, ProjectionGeometry};
use crate::error::{ensure, shape, Result};
use crate::raster::Raster;

/// Provenance carried with every image.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    #[serde(default)]
    pub spec_id: Option<String>,
    #[serde(default)]
    pub geometry: Option<ProjectionGeometry>,
    #[serde(default)]
    pub angle_deg: f64,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    /// Gaussian sigma (detector pixels) of the focal-spot blur, if applied.
    #[serde(default)]
    pub focal_blur_sigma_px: Option<f64>,
    /// Bit depth of the quantization the values went through, if any.
    #[serde(default)]
    pub bits: Option<u32>,
}

/// Relative intensity `I / I0` per detector pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionImage {
    pub pixels: Raster<f64>,
    /// Detector pixel pitch (mm).
    pub pixel_pitch: f64,
    pub meta: ImageMeta,
}

impl ProjectionImage {
    pub fn new(pixels: Raster<f64>, pixel_pitch: f64) -> Self {
        ProjectionImage {
            pixels,
            pixel_pitch,
            meta: ImageMeta::default(),
        }
    }

    pub fn width(&self) -> usize {
        self.pixels.width
    }

    pub fn height(&self) -> usize {
        self.pixels.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        *self.pixels.get(x, y)
    }

    pub fn check_same_dims(&self, other: &ProjectionImage) -> Result<()> {
        ensure!(
            self.pixels.same_dims(&other.pixels),
            shape(alloc::format!(
                "image is {}x{}, expected {}x{}",
                other.width(),
                other.height(),
                self.width(),
                self.height()
            ))
        );
        Ok(())
    }
}
