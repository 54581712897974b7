use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ProjectionImage;
use crate::error::{ensure, invalid, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `I' = I (1 + n)`: sigma relative to the pixel's own intensity.
    GaussianRelative,
    /// `I' = I + n`: sigma relative to the unattenuated full scale.
    GaussianAbsolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn relative(sigma: f64, seed: u64) -> Self {
        NoiseModel {
            kind: NoiseKind::GaussianRelative,
            sigma,
            seed,
        }
    }
}

/// Adds i.i.d. Gaussian detector noise and clamps at zero. Pixel `k` draws
/// from its own stream `(seed, k)`, so the result is independent of
/// evaluation order.
pub fn add_noise(img: &ProjectionImage, model: &NoiseModel) -> Result<ProjectionImage> {
    ensure!(
        model.sigma >= 0.0 && model.sigma.is_finite(),
        invalid("noise sigma must be finite and >= 0")
    );
    let mut out = img.clone();
    out.meta.noise = Some(*model);
    if model.sigma == 0.0 {
        return Ok(out);
    }
    let w = img.width();
    let src = &img.pixels.data;
    crate::par::fill_rows(&mut out.pixels.data, w, |y, row| {
        for (x, v) in row.iter_mut().enumerate() {
            let k = y * w + x;
            let n: f64 = rng::indexed(model.seed, k as u64).sample(StandardNormal);
            let i = src[k];
            let noisy = match model.kind {
                NoiseKind::GaussianRelative => i * (1.0 + model.sigma * n),
                NoiseKind::GaussianAbsolute => i + model.sigma * n,
            };
            *v = noisy.max(0.0);
        }
        Ok(())
    })?;
    Ok(out)
}
