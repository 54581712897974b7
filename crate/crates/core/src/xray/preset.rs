use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use super::ProjectionGeometry;
use crate::error::{invalid, Result};

/// Measuring-device class: detector, digitization and distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevicePreset {
    pub name: String,
    pub width: usize,
    pub height: usize,
    /// Detector pixel pitch (mm).
    pub pixel_pitch: f64,
    pub bits: u32,
    /// Source-object distance range (mm).
    pub sod_range: [f64; 2],
    /// Focal spot diameter (mm).
    pub focal_spot: f64,
    /// Default relative noise sigma (calibration choice).
    pub noise_sigma: f64,
}

impl DevicePreset {
    pub const NAMES: [&'static str; 3] = ["highq", "midq", "lowq"];

    pub fn highq() -> Self {
        DevicePreset {
            name: "highq".to_string(),
            width: 2000,
            height: 2000,
            pixel_pitch: 0.02,
            bits: 16,
            sod_range: [50.0, 100.0],
            focal_spot: 0.005,
            noise_sigma: 0.01,
        }
    }

    pub fn midq() -> Self {
        DevicePreset {
            name: "midq".to_string(),
            width: 1000,
            height: 1000,
            pixel_pitch: 0.2,
            bits: 16,
            sod_range: [200.0, 700.0],
            focal_spot: 0.8,
            noise_sigma: 0.05,
        }
    }

    pub fn lowq() -> Self {
        DevicePreset {
            name: "lowq".to_string(),
            width: 2000,
            height: 1000,
            pixel_pitch: 0.04,
            bits: 12,
            sod_range: [200.0, 300.0],
            focal_spot: 0.8,
            noise_sigma: 0.10,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "highq" | "high-q" => Ok(Self::highq()),
            "midq" | "mid-q" => Ok(Self::midq()),
            "lowq" | "low-q" => Ok(Self::lowq()),
            other => Err(invalid(alloc::format!(
                "unknown device preset '{other}' (expected highq, midq or lowq)"
            ))),
        }
    }

    /// Geometry at the middle of the SOD range with magnification 2.
    pub fn geometry(&self) -> ProjectionGeometry {
        let sod = 0.5 * (self.sod_range[0] + self.sod_range[1]);
        ProjectionGeometry::new(sod, 2.0 * sod, self.pixel_pitch, self.width, self.height)
    }
}
