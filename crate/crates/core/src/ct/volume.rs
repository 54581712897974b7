use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{fbp_slice, to_sinogram, FilterSpec, SliceGrid, DEFAULT_EPSILON};
use crate::error::{ensure, shape, Result};
use crate::xray::ProjectionImage;

/// Reconstructed attenuation (1/mm), x fastest, then y, then z.
///
/// `x` follows detector columns, `y` detector rows and `z` the beam
/// direction at angle 0, all in the object frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Volume {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Voxel edge lengths (mm) along x, y, z.
    pub voxel_size: [f64; 3],
    #[serde(default)]
    pub provenance: Option<String>,
    pub data: Vec<f64>,
}

impl Volume {
    pub fn zeros(nx: usize, ny: usize, nz: usize, voxel_size: [f64; 3]) -> Self {
        Volume {
            nx,
            ny,
            nz,
            voxel_size,
            provenance: None,
            data: alloc::vec![0.0; nx * ny * nz],
        }
    }

    pub fn from_vec(nx: usize, ny: usize, nz: usize, voxel_size: [f64; 3], data: Vec<f64>) -> Result<Self> {
        ensure!(
            nx > 0 && ny > 0 && nz > 0,
            shape("volume dimensions must be positive")
        );
        ensure!(
            data.len() == nx * ny * nz,
            shape(alloc::format!(
                "volume data has {} values, expected {}x{}x{}",
                data.len(),
                nx,
                ny,
                nz
            ))
        );
        Ok(Volume {
            nx,
            ny,
            nz,
            voxel_size,
            provenance: None,
            data,
        })
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.idx(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, v: f64) {
        let i = self.idx(x, y, z);
        self.data[i] = v;
    }

    /// The `x`-`y` plane at depth `z`.
    pub fn z_slice(&self, z: usize) -> crate::raster::Raster<f64> {
        let n = self.nx * self.ny;
        crate::raster::Raster {
            width: self.nx,
            height: self.ny,
            data: self.data[z * n..(z + 1) * n].to_vec(),
        }
    }

    pub fn same_dims(&self, other: &Volume) -> bool {
        (self.nx, self.ny, self.nz) == (other.nx, other.ny, other.nz)
    }
}

/// FBP of every detector row; row `y` of the detector becomes the `y`
/// index of the volume. `grid` defaults to a square slice of detector width
/// with voxel size `pitch / M`.
pub fn reconstruct_volume(
    series: &[ProjectionImage],
    filter: &FilterSpec,
    grid: Option<SliceGrid>,
) -> Result<Volume> {
    let sinos = to_sinogram(series, DEFAULT_EPSILON)?;
    let grid = grid.unwrap_or_else(|| SliceGrid::square(sinos[0].width, sinos[0].spacing));
    let slices = crate::par::map_indexed(sinos.len(), |y| fbp_slice(&sinos[y], filter, &grid));
    let ny = sinos.len();
    let row_pitch = sinos[0].spacing;
    let mut vol = Volume::zeros(grid.nx, ny, grid.nz, [grid.voxel_size, row_pitch, grid.voxel_size]);
    for (y, slice) in slices.into_iter().enumerate() {
        let slice = slice?;
        for k in 0..grid.nz {
            for i in 0..grid.nx {
                vol.set(i, y, k, *slice.get(i, k));
            }
        }
    }
    Ok(vol)
}
