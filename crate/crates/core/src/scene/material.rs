use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

/// A homogeneous material with a single effective linear attenuation
/// coefficient `mu` in 1/mm.
///
/// The presets below are calibration constants for a monochromatic beam at
/// about 30 keV (NIST mass attenuation times nominal density). They are not
/// meant as a spectral physics model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    pub mu: f64,
}

impl Material {
    pub fn new(name: impl Into<String>, mu: f64) -> Self {
        Material {
            name: name.into(),
            mu,
        }
    }

    /// Aluminum, 1.128 cm²/g x 2.699 g/cm³.
    pub fn aluminum() -> Self {
        Material::new("aluminum", 0.3044)
    }

    /// Dry air, 0.3538 cm²/g x 1.205 mg/cm³.
    pub fn air() -> Self {
        Material::new("air", 4.26e-5)
    }

    /// Glass-fibre/epoxy prepreg (approximate, density 1.9 g/cm³).
    pub fn prepreg() -> Self {
        Material::new("prepreg", 0.152)
    }

    /// Carbon steel, 8.176 cm²/g x 7.874 g/cm³.
    pub fn steel() -> Self {
        Material::new("steel", 6.44)
    }

    /// Effective material of a body nested inside `host`, such that host plus
    /// nested body attenuate like the two-region object.
    pub fn nested_in(&self, host: &Material) -> Material {
        let mut name = self.name.to_string();
        name.push_str("-in-");
        name.push_str(&host.name);
        Material::new(name, self.mu - host.mu)
    }
}
