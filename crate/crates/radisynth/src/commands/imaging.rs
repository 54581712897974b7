use radisynth_core::ct::{reconstruct_volume, FilterKind, FilterSpec, SliceGrid};
use radisynth_core::scene::{ground_truth_mask, SpecimenKind, SpecimenSpec};
use radisynth_core::xray::{
    add_noise, dequantize, focal_blur, focal_blur_sigma_px, quantize, simulate_projection, simulate_rotation_series,
    AcquisitionConfig, DevicePreset, NoiseKind, NoiseModel, ProjectionGeometry, ProjectionImage, QuantizationSpec,
};

use super::Ctx;
use crate::artifacts::{commit_projections, commit_volume, load_projections, load_spec};
use crate::cli::{ReconArgs, SimulateArgs};
use crate::error::{Error, Result};

pub(crate) fn resolve_geometry(a: &SimulateArgs) -> Result<(ProjectionGeometry, Option<DevicePreset>)> {
    let preset = a.preset.as_deref().map(DevicePreset::by_name).transpose()?;
    let base = preset.as_ref().map(DevicePreset::geometry);
    let sod = a.sod.or(base.as_ref().map(|g| g.sod)).unwrap_or(300.0);
    let sdd = a.sdd.unwrap_or(2.0 * sod);
    let pitch = a.pitch.or(base.as_ref().map(|g| g.pixel_pitch)).unwrap_or(0.15);
    let width = a.width.or(base.as_ref().map(|g| g.width)).unwrap_or(1000);
    let height = a
        .height
        .or(a.width)
        .or(base.as_ref().map(|g| g.height))
        .unwrap_or(width);
    let g = ProjectionGeometry::new(sod, sdd, pitch, width, height);
    g.validate()?;
    Ok((g, preset))
}

/// Noise, blur and quantization applied to a clean rendering.
pub(crate) struct Degradation {
    pub noise: f64,
    pub kind: NoiseKind,
    pub noise_seed: u64,
    pub focal_spot: Option<f64>,
    pub bits: Option<u32>,
}

pub(crate) fn degrade(img: ProjectionImage, k: usize, d: &Degradation) -> Result<ProjectionImage> {
    let mut img = img;
    if let (Some(f), Some(g)) = (d.focal_spot, img.meta.geometry.clone()) {
        if f > 0.0 {
            img = focal_blur(&img, focal_blur_sigma_px(&g, f));
        }
    }
    if d.noise > 0.0 {
        let seed = radisynth_core::rng::substream(d.noise_seed, &format!("projection-{k}"));
        img = add_noise(
            &img,
            &NoiseModel {
                kind: d.kind,
                sigma: d.noise,
                seed,
            },
        )?;
    }
    if let Some(bits) = d.bits {
        let q = quantize(&img, QuantizationSpec::new(bits)?)?;
        let mut back = dequantize(&q, bits, img.pixel_pitch)?;
        back.meta = img.meta.clone();
        back.meta.bits = Some(bits);
        img = back;
    }
    Ok(img)
}

fn is_pore_plate(spec: &SpecimenSpec) -> bool {
    matches!(spec.kind, SpecimenKind::PorePlate { .. })
}

pub fn simulate(ctx: &mut Ctx, a: &SimulateArgs) -> Result<String> {
    let (spec_id, spec) = load_spec(ctx.ws, &a.spec)?;
    let (geometry, preset) = resolve_geometry(a)?;
    if a.projections == 0 {
        return Err(Error::Validation("--projections must be >= 1".into()));
    }
    let meshes = spec.meshes()?;
    let clean = if a.projections == 1 {
        vec![simulate_projection(&meshes, &geometry.with_rotation(a.start_deg))?]
    } else {
        simulate_rotation_series(
            &meshes,
            &AcquisitionConfig {
                count: a.projections,
                start_deg: a.start_deg,
                range_deg: a.range_deg,
                geometry: geometry.clone(),
            },
        )?
    };
    let d = Degradation {
        noise: a.noise,
        kind: if a.noise_kind == "absolute" {
            NoiseKind::GaussianAbsolute
        } else {
            NoiseKind::GaussianRelative
        },
        noise_seed: ctx.stream("noise"),
        focal_spot: a.focal_spot.or(preset.as_ref().map(|p| p.focal_spot)),
        bits: a.bits.or(preset.as_ref().map(|p| p.bits)),
    };
    let mut images = Vec::with_capacity(clean.len());
    for (k, img) in clean.into_iter().enumerate() {
        let mut img = degrade(img, k, &d)?;
        img.meta.spec_id = Some(spec_id.clone());
        images.push(img);
    }
    let truth = if !a.no_truth && is_pore_plate(&spec) {
        images
            .iter()
            .map(|i| ground_truth_mask(&spec, i.meta.geometry.as_ref().expect("rendered images carry geometry")))
            .collect()
    } else {
        Vec::new()
    };
    let meta = serde_json::json!({
        "spec": spec_id,
        "projections": images.len(),
        "width": geometry.width,
        "height": geometry.height,
        "pitch": geometry.pixel_pitch,
        "magnification": geometry.magnification(),
        "noise_sigma": a.noise,
        "noise_kind": a.noise_kind,
        "preset": a.preset,
    });
    commit_projections(ctx.ws, &[&ctx.run, &spec_id], &images, &truth, meta)
}

pub fn recon(ctx: &mut Ctx, a: &ReconArgs) -> Result<String> {
    let set = load_projections(ctx.ws, &a.images, None)?;
    let filter = FilterSpec {
        kind: if a.filter == "ramp-hann" {
            FilterKind::RampHann
        } else {
            FilterKind::Ramp
        },
        cutoff: a.cutoff,
    };
    filter.validate()?;
    let first = &set.images[0];
    let grid = match (a.grid, a.voxel) {
        (None, None) => None,
        (n, v) => {
            let g = first
                .meta
                .geometry
                .as_ref()
                .ok_or_else(|| Error::Validation(format!("{} has no acquisition geometry", set.id)))?;
            Some(SliceGrid::square(
                n.unwrap_or(first.width()),
                v.unwrap_or(g.pixel_pitch / g.magnification()),
            ))
        }
    };
    let mut vol = reconstruct_volume(&set.images, &filter, grid)?;
    vol.provenance = Some(set.id.clone());
    let meta = serde_json::json!({
        "images": set.id,
        "projections": set.images.len(),
        "filter": a.filter,
        "cutoff": a.cutoff,
        "dims": [vol.nx, vol.ny, vol.nz],
        "voxel_size": vol.voxel_size,
    });
    commit_volume(ctx.ws, &[&ctx.run, &set.id], &vol, None, a.slices, meta)
}
