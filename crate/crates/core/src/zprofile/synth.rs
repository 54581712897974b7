use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ct::Volume;
use crate::error::{ensure, invalid, shape, Result};
use crate::raster::Mask;
use crate::rng;
use crate::scene::Layer;

/// One homogeneous layer of a synthetic laminate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerBand {
    /// mm along z.
    pub thickness: f64,
    /// 1/mm.
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthVolumeSpec {
    pub nx: usize,
    pub ny: usize,
    /// mm, `[x, y, z]`.
    pub voxel_size: [f64; 3],
    /// Bottom layer (z = 0) first.
    pub layers: Vec<LayerBand>,
    /// Standard deviation of additive voxel noise (1/mm).
    pub noise_sigma: f64,
}

impl SynthVolumeSpec {
    /// Laminate volume from specimen layers, voxel edge `voxel` in all
    /// directions.
    pub fn from_layers(nx: usize, ny: usize, voxel: f64, layers: &[Layer], noise_sigma: f64) -> Self {
        SynthVolumeSpec {
            nx,
            ny,
            voxel_size: [voxel; 3],
            layers: layers
                .iter()
                .map(|l| LayerBand {
                    thickness: l.thickness,
                    mu: l.material.mu,
                })
                .collect(),
            noise_sigma,
        }
    }

    pub fn total_thickness(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness).sum()
    }

    /// Slices needed to cover the stack.
    pub fn nz(&self) -> usize {
        let n = self.total_thickness() / self.voxel_size[2];
        crate::math::ceil(n - 1e-9).max(1.0) as usize
    }

    fn validate(&self) -> Result<()> {
        ensure!(
            self.nx > 0 && self.ny > 0,
            shape("synthetic volume needs a non-empty cross-section")
        );
        ensure!(
            self.voxel_size.iter().all(|&v| v > 0.0),
            invalid("voxel size must be positive")
        );
        ensure!(!self.layers.is_empty(), invalid("need at least one layer"));
        ensure!(
            self.layers.iter().all(|l| l.thickness > 0.0 && l.mu.is_finite()),
            invalid("layer thickness must be > 0 and mu finite")
        );
        ensure!(
            self.noise_sigma >= 0.0,
            invalid("noise sigma must be >= 0")
        );
        Ok(())
    }
}

/// Footprint `[x0, x0 + width) x [y0, y0 + height)` (voxels) and the depth
/// band `[z_lo, z_hi)` (mm from the bottom face) that the damage stretches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DamageRegion {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
    pub z_lo: f64,
    pub z_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthVolume {
    pub volume: Volume,
    /// `nx x ny`, true inside the damage footprint.
    pub truth: Mask,
}

/// Depth map of a stretched column: the band `[lo, hi)` grows by `s` and
/// the rest of the stack shrinks uniformly so the total stays `total`.
fn stretch_map(z: f64, lo: f64, hi: f64, s: f64, total: f64) -> f64 {
    let band = hi - lo;
    let c = (total - s * band) / (total - band);
    if z <= lo {
        c * z
    } else if z <= hi {
        c * lo + s * (z - lo)
    } else {
        c * lo + s * band + c * (z - hi)
    }
}

/// Mean of a piecewise-constant profile with `bounds[i]..bounds[i+1]`
/// carrying `mus[i]` over `[a, b)`; zero outside the stack.
fn interval_mean(bounds: &[f64], mus: &[f64], a: f64, b: f64) -> f64 {
    let mut acc = 0.0;
    for (i, &mu) in mus.iter().enumerate() {
        let lo = bounds[i].max(a);
        let hi = bounds[i + 1].min(b);
        if hi > lo {
            acc += mu * (hi - lo);
        }
    }
    acc / (b - a)
}

/// Layered laminate volume (layer normal along z) where columns inside the
/// damage footprint have their depth band stretched by `stretch`, with
/// additive Gaussian voxel noise from `seed`. Voxels hold the exact mean
/// density over their depth interval; the noise field does not depend on
/// the damage, so `stretch = 1` reproduces the undamaged volume.
pub fn synth_damaged_volume(
    spec: &SynthVolumeSpec,
    region: &DamageRegion,
    stretch: f64,
    seed: u64,
) -> Result<SynthVolume> {
    spec.validate()?;
    let total = spec.total_thickness();
    ensure!(
        stretch > 0.0 && stretch.is_finite(),
        invalid(alloc::format!("stretch factor {stretch} must be > 0"))
    );
    ensure!(
        region.x0 + region.width <= spec.nx && region.y0 + region.height <= spec.ny,
        shape(alloc::format!(
            "damage footprint {}+{} x {}+{} exceeds the {}x{} volume",
            region.x0,
            region.width,
            region.y0,
            region.height,
            spec.nx,
            spec.ny
        ))
    );
    ensure!(
        0.0 <= region.z_lo && region.z_lo < region.z_hi && region.z_hi <= total,
        shape(alloc::format!(
            "depth band [{}, {}) outside the {total} mm stack",
            region.z_lo,
            region.z_hi
        ))
    );
    ensure!(
        stretch == 1.0 || stretch * (region.z_hi - region.z_lo) < total && region.z_hi - region.z_lo < total,
        invalid("stretched band would exceed the stack thickness")
    );

    let mut bounds = Vec::with_capacity(spec.layers.len() + 1);
    bounds.push(0.0);
    for l in &spec.layers {
        bounds.push(bounds.last().copied().unwrap_or(0.0) + l.thickness);
    }
    let mus: Vec<f64> = spec.layers.iter().map(|l| l.mu).collect();
    let stretched: Vec<f64> = if stretch == 1.0 {
        bounds.clone()
    } else {
        bounds
            .iter()
            .map(|&b| stretch_map(b, region.z_lo, region.z_hi, stretch, total))
            .collect()
    };

    let (nx, ny, nz) = (spec.nx, spec.ny, spec.nz());
    let dz = spec.voxel_size[2];
    let column = |b: &[f64]| -> Vec<f64> {
        (0..nz)
            .map(|k| interval_mean(b, &mus, k as f64 * dz, (k + 1) as f64 * dz))
            .collect()
    };
    let plain = column(&bounds);
    let damaged = column(&stretched);
    let truth = Mask::from_fn(nx, ny, |x, y| {
        (region.x0..region.x0 + region.width).contains(&x)
            && (region.y0..region.y0 + region.height).contains(&y)
    });

    let noise_seed = rng::substream(seed, "voxel-noise");
    let columns = crate::par::map_indexed(nx * ny, |c| {
        let base = if truth.data[c] { &damaged } else { &plain };
        let mut r = rng::indexed(noise_seed, c as u64);
        base.iter()
            .map(|&v| {
                let n: f64 = r.sample(StandardNormal);
                v + spec.noise_sigma * n
            })
            .collect::<Vec<f64>>()
    });
    let mut volume = Volume::zeros(nx, ny, nz, spec.voxel_size);
    for (c, col) in columns.into_iter().enumerate() {
        let (x, y) = (c % nx, c / nx);
        for (z, v) in col.into_iter().enumerate() {
            let i = volume.idx(x, y, z);
            volume.data[i] = v;
        }
    }
    volume.provenance = Some(String::from("synthetic laminate"));
    Ok(SynthVolume { volume, truth })
}
