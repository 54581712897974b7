//! Reading and writing the artifact kinds the commands exchange.

use radisynth_core::cnn::FeatureMap;
use radisynth_core::ct::Volume;
use radisynth_core::nn::TrainReport;
use radisynth_core::raster::{Mask, Raster};
use radisynth_core::scene::{GroundTruthMask, SpecimenSpec};
use radisynth_core::xray::ProjectionImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::{
    f32_bytes, load_image, mask_png_bytes, read_f32, read_file, read_json, read_mask_png, save_image, unit_png8_bytes,
};
use crate::modelio::{self, StoredModel};
use crate::stl;
use crate::tables;
use crate::volumeio;
use crate::workspace::{Kind, Workspace};

pub const SPEC_FILE: &str = "spec.json";
pub const PROJECTIONS_INDEX: &str = "images.json";
pub const MODEL_FILE: &str = "model.rsm";
pub const CURVE_FILE: &str = "loss.csv";
pub const MAP_INDEX: &str = "map.json";
pub const VOLUME_STEM: &str = "volume";
pub const VOLUME_TRUTH: &str = "truth.png";

/// Writes a specimen: JSON document, pore table and one STL per body.
pub fn commit_spec(ws: &mut Workspace, run: &str, spec: &SpecimenSpec, ascii_stl: bool) -> Result<String> {
    let mut s = ws.stage(Kind::Spec)?;
    s.write_json(SPEC_FILE, spec)?;
    s.write("pores.csv", tables::pores_to_csv(&spec.defects)?.as_bytes())?;
    for (i, mesh) in spec.meshes()?.iter().enumerate() {
        let name = format!("body-{i:03}-{}", mesh.material.name);
        s.write(&format!("{name}.stl"), &stl::write_binary(mesh, &name))?;
        if ascii_stl {
            s.write(&format!("{name}.ascii.stl"), stl::write_ascii(mesh, &name).as_bytes())?;
        }
    }
    s.parent(run).meta(serde_json::json!({
        "defects": spec.defects.len(),
        "thickness_mm": spec.thickness(),
        "seed": spec.rng_seed,
    }));
    ws.commit(s)
}

pub fn load_spec(ws: &Workspace, id: &str) -> Result<(String, SpecimenSpec)> {
    let e = ws.expect(id, Kind::Spec)?;
    let spec = read_json(&ws.artifact_dir(&e.id).join(SPEC_FILE))?;
    Ok((e.id.clone(), spec))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionIndex {
    pub count: usize,
    #[serde(default)]
    pub spec_id: Option<String>,
    pub angles_deg: Vec<f64>,
    /// Whether `truth-NNNN.png` masks accompany the images.
    pub truth: bool,
}

fn stem(k: usize) -> String {
    format!("img-{k:04}")
}

fn truth_name(k: usize) -> String {
    format!("truth-{k:04}.png")
}

/// A projection image set as loaded from the workspace.
#[derive(Debug, Clone)]
pub struct ImageSet {
    pub id: String,
    pub index: ProjectionIndex,
    pub images: Vec<ProjectionImage>,
    pub truth: Vec<Option<GroundTruthMask>>,
}

pub fn commit_projections(
    ws: &mut Workspace,
    parents: &[&str],
    images: &[ProjectionImage],
    truth: &[GroundTruthMask],
    meta: serde_json::Value,
) -> Result<String> {
    let mut s = ws.stage(Kind::ImageSet)?;
    for (k, img) in images.iter().enumerate() {
        let names = save_image(s.dir(), &stem(k), img)?;
        s.add_files(names);
    }
    for (k, t) in truth.iter().enumerate() {
        s.write(&truth_name(k), &mask_png_bytes(&t.mask)?)?;
    }
    let index = ProjectionIndex {
        count: images.len(),
        spec_id: images.first().and_then(|i| i.meta.spec_id.clone()),
        angles_deg: images.iter().map(|i| i.meta.angle_deg).collect(),
        truth: !truth.is_empty(),
    };
    s.write_json(PROJECTIONS_INDEX, &index)?;
    for p in parents {
        s.parent(p);
    }
    s.meta(meta);
    ws.commit(s)
}

/// Loads projection `only` (or all of them).
pub fn load_projections(ws: &Workspace, id: &str, only: Option<usize>) -> Result<ImageSet> {
    let e = ws.expect(id, Kind::ImageSet)?;
    let dir = ws.artifact_dir(&e.id);
    let index_path = dir.join(PROJECTIONS_INDEX);
    if !index_path.exists() {
        return Err(Error::Validation(format!("{} does not hold projection images", e.id)));
    }
    let index: ProjectionIndex = read_json(&index_path)?;
    let range: Vec<usize> = match only {
        Some(k) if k >= index.count => {
            return Err(Error::Validation(format!(
                "projection index {k} out of range, {} holds {}",
                e.id, index.count
            )))
        }
        Some(k) => vec![k],
        None => (0..index.count).collect(),
    };
    let mut images = Vec::with_capacity(range.len());
    let mut truth = Vec::with_capacity(range.len());
    for k in range {
        let img = load_image(&dir, &stem(k))?;
        let t = if index.truth {
            let mask = read_mask_png(&read_file(&dir.join(truth_name(k)))?)?;
            let geometry = img.meta.geometry.clone().ok_or_else(|| {
                Error::Validation(format!("{}: image {k} has no geometry for its truth mask", e.id))
            })?;
            Some(GroundTruthMask { mask, geometry })
        } else {
            None
        };
        images.push(img);
        truth.push(t);
    }
    Ok(ImageSet {
        id: e.id.clone(),
        index,
        images,
        truth,
    })
}

pub fn commit_model(
    ws: &mut Workspace,
    parents: &[&str],
    model: &StoredModel,
    meta: serde_json::Value,
    curve: Option<&TrainReport>,
) -> Result<String> {
    let mut s = ws.stage(Kind::Model)?;
    s.write(MODEL_FILE, &modelio::to_bytes(model, &meta)?)?;
    if let Some(c) = curve {
        s.write(CURVE_FILE, tables::curve_to_csv(c)?.as_bytes())?;
    }
    for p in parents {
        s.parent(p);
    }
    let mut m = meta;
    if let Some(obj) = m.as_object_mut() {
        obj.insert("kind".into(), serde_json::to_value(model.kind()).unwrap_or_default());
    }
    s.meta(m);
    ws.commit(s)
}

pub fn load_model(ws: &Workspace, id: &str) -> Result<(String, StoredModel, serde_json::Value)> {
    let e = ws.expect(id, Kind::Model)?;
    let (m, meta) = modelio::from_bytes(&read_file(&ws.artifact_dir(&e.id).join(MODEL_FILE))?)?;
    Ok((e.id.clone(), m, meta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapIndex {
    pub width: usize,
    pub height: usize,
    /// Image set and projection the map was computed from.
    pub images: String,
    pub index: usize,
}

/// Stores pore scores (`scores.f32`), the argmax classes (`classes.png`)
/// and an 8-bit score preview.
pub fn commit_feature_map(
    ws: &mut Workspace,
    parents: &[&str],
    map: &FeatureMap,
    source: MapIndex,
    meta: serde_json::Value,
) -> Result<String> {
    let mut s = ws.stage(Kind::FeatureMap)?;
    s.write("scores.f32", &f32_bytes(&map.scores.data))?;
    s.write("classes.png", &mask_png_bytes(&map.classes)?)?;
    s.write("scores.png", &unit_png8_bytes(&map.scores)?)?;
    s.write_json(MAP_INDEX, &source)?;
    for p in parents {
        s.parent(p);
    }
    s.meta(meta);
    ws.commit(s)
}

pub fn load_feature_map(ws: &Workspace, id: &str) -> Result<(String, MapIndex, FeatureMap)> {
    let e = ws.expect(id, Kind::FeatureMap)?;
    let dir = ws.artifact_dir(&e.id);
    let index_path = dir.join(MAP_INDEX);
    if !index_path.exists() {
        return Err(Error::Validation(format!("{} is not a pixel feature map", e.id)));
    }
    let index: MapIndex = read_json(&index_path)?;
    let path = dir.join("scores.f32");
    let scores = read_f32(&read_file(&path)?, index.width * index.height, "feature map scores")?;
    let scores = Raster::from_vec(index.width, index.height, scores)?;
    let classes = read_mask_png(&read_file(&dir.join("classes.png"))?)?;
    if !classes.same_dims(&scores) {
        return Err(Error::Validation(format!("{}: class and score maps differ in size", e.id)));
    }
    Ok((e.id.clone(), index, FeatureMap { scores, classes }))
}

pub fn commit_volume(
    ws: &mut Workspace,
    parents: &[&str],
    vol: &Volume,
    truth: Option<&Mask>,
    slices: bool,
    meta: serde_json::Value,
) -> Result<String> {
    let mut s = ws.stage(Kind::Volume)?;
    let names = volumeio::save_volume(s.dir(), VOLUME_STEM, vol)?;
    s.add_files(names);
    if slices {
        let names = volumeio::export_slices(s.dir(), vol)?;
        s.add_files(names);
    }
    if let Some(t) = truth {
        s.write(VOLUME_TRUTH, &mask_png_bytes(t)?)?;
    }
    for p in parents {
        s.parent(p);
    }
    s.meta(meta);
    ws.commit(s)
}

pub fn load_volume(ws: &Workspace, id: &str) -> Result<(String, Volume, Option<Mask>)> {
    let e = ws.expect(id, Kind::Volume)?;
    let dir = ws.artifact_dir(&e.id);
    let vol = volumeio::load_volume(&dir, VOLUME_STEM)?;
    let tp = dir.join(VOLUME_TRUTH);
    let truth = if tp.exists() {
        Some(read_mask_png(&read_file(&tp)?)?)
    } else {
        None
    };
    Ok((e.id.clone(), vol, truth))
}

/// Report artifact from named text or binary files.
pub fn commit_report(
    ws: &mut Workspace,
    parents: &[&str],
    files: &[(&str, Vec<u8>)],
    meta: serde_json::Value,
) -> Result<String> {
    let mut s = ws.stage(Kind::Report)?;
    for (name, bytes) in files {
        s.write(name, bytes)?;
    }
    for p in parents {
        s.parent(p);
    }
    s.meta(meta);
    ws.commit(s)
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| Error::parse("JSON output", None, e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

/// First image of a set, with its truth mask.
pub fn single_with_truth(set: ImageSet) -> Result<(ProjectionImage, GroundTruthMask)> {
    let id = set.id.clone();
    match (set.images.into_iter().next(), set.truth.into_iter().next().flatten()) {
        (Some(img), Some(t)) => Ok((img, t)),
        _ => Err(Error::Validation(format!("{id} has no ground-truth mask"))),
    }
}
