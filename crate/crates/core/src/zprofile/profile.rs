use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ct::Volume;
use crate::error::{ensure, invalid, shape, Result};

/// Default averaging window edge (voxels); the default stride equals it.
pub const DEFAULT_WINDOW: usize = 4;

/// Mean density along z over a `w x w` window whose top-left voxel column
/// is `(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZProfile {
    pub values: Vec<f64>,
    pub x: usize,
    pub y: usize,
    pub w: usize,
}

/// Profiles on a regular grid, row-major over `(gy, gx)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileGrid {
    pub gx: usize,
    pub gy: usize,
    pub w: usize,
    pub stride: usize,
    pub profiles: Vec<ZProfile>,
}

impl ProfileGrid {
    pub fn at(&self, gx: usize, gy: usize) -> &ZProfile {
        &self.profiles[gy * self.gx + gx]
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}

/// Windows start at `0, stride, 2 stride, ...` as long as they fit.
pub fn extract_zprofiles(volume: &Volume, w: usize, stride: usize) -> Result<ProfileGrid> {
    ensure!(w >= 1, invalid("averaging window must be >= 1"));
    ensure!(stride >= 1, invalid("stride must be >= 1"));
    ensure!(
        w <= volume.nx.min(volume.ny),
        shape(alloc::format!(
            "window {w} exceeds the {}x{} volume cross-section",
            volume.nx,
            volume.ny
        ))
    );
    let gx = (volume.nx - w) / stride + 1;
    let gy = (volume.ny - w) / stride + 1;
    let inv = 1.0 / (w * w) as f64;
    let profiles = crate::par::map_indexed(gx * gy, |k| {
        let (x0, y0) = ((k % gx) * stride, (k / gx) * stride);
        let values = (0..volume.nz)
            .map(|z| {
                let mut s = 0.0;
                for y in y0..y0 + w {
                    let row = volume.idx(x0, y, z);
                    s += volume.data[row..row + w].iter().sum::<f64>();
                }
                s * inv
            })
            .collect();
        ZProfile {
            values,
            x: x0,
            y: y0,
            w,
        }
    });
    Ok(ProfileGrid {
        gx,
        gy,
        w,
        stride,
        profiles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(nx: usize, ny: usize, nz: usize) -> Volume {
        let data = (0..nx * ny * nz).map(|i| (i as f64 * 0.37).sin()).collect();
        Volume::from_vec(nx, ny, nz, [1.0; 3], data).unwrap()
    }

    #[test]
    fn constant_volume() {
        let mut v = Volume::zeros(9, 7, 5, [1.0; 3]);
        v.data.iter_mut().for_each(|d| *d = 0.25);
        let g = extract_zprofiles(&v, 3, 2).unwrap();
        assert_eq!((g.gx, g.gy), (4, 3));
        for p in &g.profiles {
            assert_eq!(p.values.len(), 5);
            assert!(p.values.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn unit_window_is_raw_column() {
        let v = ramp(5, 4, 6);
        let g = extract_zprofiles(&v, 1, 1).unwrap();
        assert_eq!(g.len(), 20);
        let p = g.at(3, 2);
        let col: Vec<f64> = (0..6).map(|z| v.get(3, 2, z)).collect();
        assert_eq!(p.values, col);
    }

    #[test]
    fn window_mean() {
        let v = ramp(6, 6, 3);
        let g = extract_zprofiles(&v, 2, 2).unwrap();
        let p = g.at(1, 2);
        assert_eq!((p.x, p.y), (2, 4));
        let expect = (v.get(2, 4, 1) + v.get(3, 4, 1) + v.get(2, 5, 1) + v.get(3, 5, 1)) / 4.0;
        assert!((p.values[1] - expect).abs() < 1e-15);
    }

    #[test]
    fn oversized_window() {
        let v = ramp(4, 8, 2);
        assert!(matches!(extract_zprofiles(&v, 5, 1), Err(crate::Error::Shape(_))));
        assert!(extract_zprofiles(&v, 0, 1).is_err());
    }
}
