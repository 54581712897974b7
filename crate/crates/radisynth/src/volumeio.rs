//! Volumes as raw little-endian `f32` (x fastest) with a JSON sidecar, and
//! per-slice 16-bit PNG export.

use std::path::Path;

use radisynth_core::ct::Volume;
use radisynth_core::raster::Raster;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::imageio::{f32_bytes, png16_bytes, read_f32, read_file, read_json, write_file, write_json};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeSidecar {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub voxel_size: [f64; 3],
    #[serde(default)]
    pub provenance: Option<String>,
}

/// Gray-level window used for a slice export: `min` maps to 0 and `max` to
/// 65535.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceWindow {
    pub min: f64,
    pub max: f64,
}

pub fn save_volume(dir: &Path, stem: &str, vol: &Volume) -> Result<Vec<String>> {
    let raw = format!("{stem}.f32");
    let side = format!("{stem}.json");
    write_file(&dir.join(&raw), &f32_bytes(&vol.data))?;
    write_json(
        &dir.join(&side),
        &VolumeSidecar {
            nx: vol.nx,
            ny: vol.ny,
            nz: vol.nz,
            voxel_size: vol.voxel_size,
            provenance: vol.provenance.clone(),
        },
    )?;
    Ok(vec![raw, side])
}

pub fn load_volume(dir: &Path, stem: &str) -> Result<Volume> {
    let side: VolumeSidecar = read_json(&dir.join(format!("{stem}.json")))?;
    let path = dir.join(format!("{stem}.f32"));
    let data = read_f32(
        &read_file(&path)?,
        side.nx * side.ny * side.nz,
        &path.display().to_string(),
    )?;
    let mut v = Volume::from_vec(side.nx, side.ny, side.nz, side.voxel_size, data)?;
    v.provenance = side.provenance;
    Ok(v)
}

/// Global min/max over the volume; a constant volume gets a unit-wide
/// window.
pub fn volume_window(vol: &Volume) -> SliceWindow {
    let (lo, hi) = vol
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi > lo {
        SliceWindow { min: lo, max: hi }
    } else {
        SliceWindow { min: lo, max: lo + 1.0 }
    }
}

pub fn window_slice(slice: &Raster<f64>, w: SliceWindow) -> Raster<u16> {
    let scale = 65535.0 / (w.max - w.min);
    slice.map(|&v| ((v - w.min) * scale).clamp(0.0, 65535.0).round() as u16)
}

/// Writes `slice-NNNN.png` for every z slice with a shared window, plus
/// `slices.json` recording the window. Returns the file names.
pub fn export_slices(dir: &Path, vol: &Volume) -> Result<Vec<String>> {
    let w = volume_window(vol);
    let mut names = Vec::with_capacity(vol.nz + 1);
    for z in 0..vol.nz {
        let name = format!("slice-{z:04}.png");
        write_file(&dir.join(&name), &png16_bytes(&window_slice(&vol.z_slice(z), w))?)?;
        names.push(name);
    }
    write_json(&dir.join("slices.json"), &w)?;
    names.push("slices.json".into());
    Ok(names)
}
