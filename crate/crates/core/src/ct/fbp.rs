use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::fft::{fft_in_place, Complex};
use super::Sinogram;
use crate::error::{ensure, invalid, Error, Result};
use crate::math::{cos, deg_to_rad, floor, sin, PI};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    #[default]
    Ramp,
    RampHann,
}

/// Reconstruction filter: ramp, optionally Hann-windowed, zeroed above
/// `cutoff` (fraction of the Nyquist frequency).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub cutoff: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            kind: FilterKind::Ramp,
            cutoff: 1.0,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.cutoff > 0.0 && self.cutoff <= 1.0,
            invalid(alloc::format!("filter cutoff must be in (0, 1], got {}", self.cutoff))
        );
        Ok(())
    }
}

/// Reconstruction grid in the slice plane `(x, z)`. Pixel `(i, k)` of the
/// output raster sits at `x = center[0] + (i + 0.5 - nx/2) * voxel_size`,
/// `z = center[1] + (k + 0.5 - nz/2) * voxel_size`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceGrid {
    pub nx: usize,
    pub nz: usize,
    pub voxel_size: f64,
    #[serde(default)]
    pub center: [f64; 2],
}

impl SliceGrid {
    pub fn square(n: usize, voxel_size: f64) -> Self {
        SliceGrid {
            nx: n,
            nz: n,
            voxel_size,
            center: [0.0, 0.0],
        }
    }

    pub fn x_at(&self, i: usize) -> f64 {
        self.center[0] + (i as f64 + 0.5 - self.nx as f64 / 2.0) * self.voxel_size
    }

    pub fn z_at(&self, k: usize) -> f64 {
        self.center[1] + (k as f64 + 0.5 - self.nz as f64 / 2.0) * self.voxel_size
    }
}

/// Requires at least two angles whose sampled range (span plus one mean
/// step) reaches a half turn.
pub fn check_coverage(angles_deg: &[f64]) -> Result<()> {
    if angles_deg.len() < 2 {
        return Err(Error::InsufficientCoverage { span_deg: 0.0 });
    }
    let lo = angles_deg.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = angles_deg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let covered = span + span / (angles_deg.len() - 1) as f64;
    if covered < 180.0 - 1e-9 {
        return Err(Error::InsufficientCoverage { span_deg: covered });
    }
    Ok(())
}

fn padded_len(width: usize) -> usize {
    (2 * width).max(2).next_power_of_two()
}

/// Frequency response of the band-limited ramp on a zero-padded grid of
/// `padded_len(width)` samples, including the sample spacing.
///
/// Built from the discrete spatial ramp kernel (`1/(4d)` at 0,
/// `-1/(pi^2 n^2 d)` at odd `n`) so the DC term is not zero.
pub fn ramp_response(width: usize, spacing: f64, filter: &FilterSpec) -> Vec<f64> {
    let p = padded_len(width);
    let mut h = vec![Complex::default(); p];
    h[0].re = 1.0 / (4.0 * spacing);
    for n in 1..p / 2 {
        if n % 2 == 1 {
            let v = -1.0 / (PI * PI * (n * n) as f64 * spacing);
            h[n].re = v;
            h[p - n].re = v;
        }
    }
    fft_in_place(&mut h, false);
    (0..p)
        .map(|k| {
            let nu = if k <= p / 2 { k } else { p - k } as f64 / (p as f64 / 2.0);
            let window = if nu > filter.cutoff {
                0.0
            } else {
                match filter.kind {
                    FilterKind::Ramp => 1.0,
                    FilterKind::RampHann => 0.5 * (1.0 + cos(PI * nu / filter.cutoff)),
                }
            };
            h[k].re * window
        })
        .collect()
}

fn filter_rows(sino: &Sinogram, filter: &FilterSpec) -> Vec<f64> {
    let w = sino.width;
    let p = padded_len(w);
    let response = ramp_response(w, sino.spacing, filter);
    let mut out = Vec::with_capacity(sino.values.len());
    let mut buf = vec![Complex::default(); p];
    for a in 0..sino.angles_deg.len() {
        buf.iter_mut().for_each(|c| *c = Complex::default());
        for (b, &v) in buf.iter_mut().zip(sino.row(a)) {
            b.re = v;
        }
        fft_in_place(&mut buf, false);
        for (b, &r) in buf.iter_mut().zip(&response) {
            b.re *= r;
            b.im *= r;
        }
        fft_in_place(&mut buf, true);
        out.extend(buf[..w].iter().map(|c| c.re));
    }
    out
}

/// Filtered back projection of one sinogram onto `grid`. Uses
/// `s = x cos(theta) + z sin(theta)` and scales by `pi / n_angles`, giving
/// attenuation in 1/mm.
pub fn fbp_slice(sino: &Sinogram, filter: &FilterSpec, grid: &SliceGrid) -> Result<Raster<f64>> {
    filter.validate()?;
    check_coverage(&sino.angles_deg)?;
    ensure!(
        sino.width >= 1 && sino.spacing > 0.0,
        invalid("sinogram needs samples and a positive spacing")
    );
    ensure!(
        grid.nx > 0 && grid.nz > 0 && grid.voxel_size > 0.0,
        invalid("reconstruction grid must be non-empty")
    );
    let filtered = filter_rows(sino, filter);
    let w = sino.width;
    let mut out = vec![0.0; grid.nx * grid.nz];
    let last = (w - 1) as f64;
    for (a, &deg) in sino.angles_deg.iter().enumerate() {
        let (c, s) = (cos(deg_to_rad(deg)), sin(deg_to_rad(deg)));
        let row = &filtered[a * w..(a + 1) * w];
        let dt = c * grid.voxel_size / sino.spacing;
        for k in 0..grid.nz {
            let z = grid.z_at(k);
            let t0 = (grid.x_at(0) * c + z * s - sino.s0) / sino.spacing;
            let line = &mut out[k * grid.nx..(k + 1) * grid.nx];
            for (i, v) in line.iter_mut().enumerate() {
                let t = t0 + i as f64 * dt;
                if t < 0.0 || t > last {
                    continue;
                }
                let j = floor(t) as usize;
                if j + 1 < w {
                    let f = t - j as f64;
                    *v += row[j] * (1.0 - f) + row[j + 1] * f;
                } else {
                    *v += row[j];
                }
            }
        }
    }
    let scale = PI / sino.angles_deg.len() as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    Raster::from_vec(grid.nx, grid.nz, out)
}
