use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, shape, Result};
use crate::math::ln;
use crate::xray::ProjectionImage;

/// Intensity floor applied before taking the logarithm.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Line integrals `p(theta, s) = -ln(I / I0)` of one detector row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    /// Ascending projection angles (degrees).
    pub angles_deg: Vec<f64>,
    /// Samples per angle.
    pub width: usize,
    /// Sample spacing along `s` (mm in the object plane).
    pub spacing: f64,
    /// `s` of sample 0 (mm).
    pub s0: f64,
    /// Row-major: angle index major, sample index minor.
    pub values: Vec<f64>,
}

impl Sinogram {
    /// Sinogram with `width` samples centered on `s = 0`.
    pub fn centered(angles_deg: Vec<f64>, width: usize, spacing: f64, values: Vec<f64>) -> Result<Self> {
        ensure!(
            values.len() == angles_deg.len() * width,
            shape(alloc::format!(
                "sinogram holds {} values, expected {} angles x {} samples",
                values.len(),
                angles_deg.len(),
                width
            ))
        );
        Ok(Sinogram {
            angles_deg,
            width,
            spacing,
            s0: -(width as f64 - 1.0) * spacing / 2.0,
            values,
        })
    }

    /// Samples `f(theta_deg, s)` on a centered grid.
    pub fn from_fn(angles_deg: Vec<f64>, width: usize, spacing: f64, f: impl Fn(f64, f64) -> f64) -> Self {
        let s0 = -(width as f64 - 1.0) * spacing / 2.0;
        let mut values = Vec::with_capacity(angles_deg.len() * width);
        for &a in &angles_deg {
            for j in 0..width {
                values.push(f(a, s0 + j as f64 * spacing));
            }
        }
        Sinogram {
            angles_deg,
            width,
            spacing,
            s0,
            values,
        }
    }

    pub fn row(&self, angle_index: usize) -> &[f64] {
        &self.values[angle_index * self.width..(angle_index + 1) * self.width]
    }

    pub fn s_at(&self, j: usize) -> f64 {
        self.s0 + j as f64 * self.spacing
    }

    /// `a * self + b * other` over identical sampling.
    pub fn combine(&self, a: f64, other: &Sinogram, b: f64) -> Result<Sinogram> {
        ensure!(
            self.values.len() == other.values.len() && self.width == other.width,
            shape("sinograms differ in size")
        );
        let mut out = self.clone();
        for (v, o) in out.values.iter_mut().zip(&other.values) {
            *v = a * *v + b * o;
        }
        Ok(out)
    }
}

/// One sinogram per detector row from a rotation series. Angles come from
/// image metadata; `s` is the detector coordinate divided by the
/// magnification when the geometry is known.
pub fn to_sinogram(series: &[ProjectionImage], epsilon: f64) -> Result<Vec<Sinogram>> {
    ensure!(!series.is_empty(), shape("empty projection series"));
    let first = &series[0];
    for img in &series[1..] {
        first.check_same_dims(img)?;
    }
    let (w, h) = (first.width(), first.height());
    let mut order: Vec<usize> = (0..series.len()).collect();
    order.sort_by(|&a, &b| series[a].meta.angle_deg.total_cmp(&series[b].meta.angle_deg));
    let angles: Vec<f64> = order.iter().map(|&i| series[i].meta.angle_deg).collect();
    let (spacing, s0) = match &first.meta.geometry {
        Some(g) => {
            let m = g.magnification();
            (g.pixel_pitch / m, g.pixel_uv(0.5, 0.0).0 / m)
        }
        None => (
            first.pixel_pitch,
            -(w as f64 - 1.0) * first.pixel_pitch / 2.0,
        ),
    };
    let eps = epsilon.max(f64::MIN_POSITIVE);
    Ok((0..h)
        .map(|y| {
            let mut values = Vec::with_capacity(angles.len() * w);
            for &i in &order {
                values.extend((0..w).map(|x| -ln(series[i].get(x, y).max(eps))));
            }
            Sinogram {
                angles_deg: angles.clone(),
                width: w,
                spacing,
                s0,
                values,
            }
        })
        .collect())
}
