use serde::{Deserialize, Serialize};

use super::ProjectionImage;
use crate::error::{ensure, invalid, Result};
use crate::math::round;
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizationSpec {
    pub bits: u32,
}

impl QuantizationSpec {
    pub fn new(bits: u32) -> Result<Self> {
        ensure!(
            bits == 12 || bits == 16,
            invalid(alloc::format!("bit depth must be 12 or 16, got {bits}"))
        );
        Ok(QuantizationSpec { bits })
    }

    pub fn max_value(&self) -> u16 {
        ((1u32 << self.bits) - 1) as u16
    }
}

/// `round(clamp(I, 0, 1) * (2^bits - 1))`.
pub fn quantize(img: &ProjectionImage, spec: QuantizationSpec) -> Result<Raster<u16>> {
    let spec = QuantizationSpec::new(spec.bits)?;
    let full = f64::from(spec.max_value());
    Ok(img.pixels.map(|&v| round(v.clamp(0.0, 1.0) * full) as u16))
}

pub fn dequantize(raw: &Raster<u16>, bits: u32, pixel_pitch: f64) -> Result<ProjectionImage> {
    let spec = QuantizationSpec::new(bits)?;
    let full = f64::from(spec.max_value());
    let mut img = ProjectionImage::new(raw.map(|&v| f64::from(v) / full), pixel_pitch);
    img.meta.bits = Some(bits);
    Ok(img)
}
