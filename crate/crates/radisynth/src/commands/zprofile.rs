use radisynth_core::nn::TrainConfig;
use radisynth_core::raster::{Mask, Raster};
use radisynth_core::scene::generate_fml_stack;
use radisynth_core::zprofile::{
    anomaly_map, calibrate_tau, extract_zprofiles, grid_truth, roc_auc, synth_damaged_volume, train_ae, train_zcnn,
    AeConfig, DamageRegion, ProfileGrid, SynthVolumeSpec, ZCnnConfig, ZSample,
};
use serde::{Deserialize, Serialize};

use super::specimen::layers_or_default;
use super::{values, Ctx};
use crate::artifacts::{commit_model, commit_spec, commit_volume, json_bytes, load_model, load_volume};
use crate::cli::{AnomalyArgs, SynthVolumeArgs, TrainAeArgs, TrainZcnnArgs, ZsliceArgs};
use crate::error::{Error, Result};
use crate::imageio::{f32_bytes, mask_png_bytes, read_json, unit_png8_bytes};
use crate::modelio::StoredModel;
use crate::workspace::Kind;

pub const PROFILES_INDEX: &str = "profiles.json";
pub const ANOMALY_INDEX: &str = "anomaly.json";

/// Depth profiles of one volume as stored in the workspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub volume: String,
    pub grid: ProfileGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalySummary {
    pub model: String,
    pub volume: String,
    pub gx: usize,
    pub gy: usize,
    pub w: usize,
    pub stride: usize,
    pub tau: f64,
    pub flagged: usize,
    /// Present when the volume carries a damage truth map.
    pub auc: Option<f64>,
}

pub fn zslice(ctx: &mut Ctx, a: &ZsliceArgs) -> Result<String> {
    let (vid, vol, _) = load_volume(ctx.ws, &a.volume)?;
    let stride = a.stride.unwrap_or(a.window);
    let grid = extract_zprofiles(&vol, a.window, stride)?;
    let mut s = ctx.ws.stage(Kind::ImageSet)?;
    if a.slices {
        let names = crate::volumeio::export_slices(s.dir(), &vol)?;
        s.add_files(names);
    }
    let meta = serde_json::json!({
        "profiles": grid.len(),
        "gx": grid.gx,
        "gy": grid.gy,
        "length": vol.nz,
    });
    s.write_json(PROFILES_INDEX, &ProfileSet { volume: vid.clone(), grid })?;
    s.parent(&ctx.run).parent(&vid).meta(meta);
    ctx.ws.commit(s)
}

fn load_profiles(ctx: &Ctx, id: &str) -> Result<(String, ProfileSet)> {
    let e = ctx.ws.expect(id, Kind::ImageSet)?;
    let path = ctx.ws.artifact_dir(&e.id).join(PROFILES_INDEX);
    if !path.exists() {
        return Err(Error::Validation(format!("{} does not hold depth profiles", e.id)));
    }
    Ok((e.id.clone(), read_json(&path)?))
}

fn percentile_fraction(p: f64) -> Result<f64> {
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::Validation(format!("--percentile {p} outside [0, 100]")));
    }
    Ok(p / 100.0)
}

pub fn train_ae_cmd(ctx: &mut Ctx, a: &TrainAeArgs) -> Result<String> {
    let q = percentile_fraction(a.percentile)?;
    let (pid, set) = load_profiles(ctx, &a.profiles)?;
    let defaults = AeConfig::default().train;
    let cfg = AeConfig {
        filters: a.filters,
        init_seed: ctx.stream("init"),
        train: TrainConfig {
            learning_rate: a.lr.unwrap_or(defaults.learning_rate),
            epochs: a.epochs,
            batch_size: a.batch.unwrap_or(defaults.batch_size),
            momentum: a.momentum.unwrap_or(defaults.momentum),
            seed: ctx.stream("shuffle"),
        },
    };
    let (mut model, report) = train_ae(&set.grid.profiles, &cfg)?;
    model.net.round_to_f32();
    let tau = calibrate_tau(&model, &set.grid.profiles, q)?;
    log::info!(
        "autoencoder loss {:.4} -> {:.4}, tau {tau:.6}",
        report.initial_loss(),
        report.final_loss()
    );
    let meta = serde_json::json!({
        "tau": tau,
        "percentile": a.percentile,
        "window": set.grid.w,
        "stride": set.grid.stride,
        "profiles": set.grid.len(),
        "final_loss": report.final_loss(),
    });
    commit_model(ctx.ws, &[&ctx.run, &pid], &StoredModel::ZprofileAe(model), meta, Some(&report))
}

pub fn anomaly(ctx: &mut Ctx, a: &AnomalyArgs) -> Result<String> {
    let (mid, model, meta) = load_model(ctx.ws, &a.model)?;
    let model = model.expect_ae()?;
    let tau = match a.tau.or_else(|| meta.get("tau").and_then(serde_json::Value::as_f64)) {
        Some(t) => t,
        None => return Err(Error::Validation(format!("{mid} has no calibrated threshold; pass --tau"))),
    };
    let (vid, vol, truth) = load_volume(ctx.ws, &a.volume)?;
    let stride = a.stride.unwrap_or(a.window);
    let map = anomaly_map(&model, &vol, a.window, stride, tau).map_err(|e| Error::from(e).in_stage("anomaly"))?;
    let auc = match &truth {
        Some(t) => {
            let labels = grid_truth(t, a.window, stride)?;
            roc_auc(&map.scores.data, &labels.data)
        }
        None => None,
    };
    let summary = AnomalySummary {
        model: mid.clone(),
        volume: vid.clone(),
        gx: map.scores.width,
        gy: map.scores.height,
        w: a.window,
        stride,
        tau,
        flagged: map.flags.count(),
        auc,
    };
    if let Some(v) = auc {
        log::info!("anomaly AUC {v:.4}, {} of {} flagged", summary.flagged, map.flags.data.len());
    }
    let max = map.scores.data.iter().copied().fold(0.0_f64, f64::max);
    let preview: Raster<f64> = map.scores.map(|v| if max > 0.0 { v / max } else { 0.0 });
    let mut s = ctx.ws.stage(Kind::FeatureMap)?;
    s.write("scores.f32", &f32_bytes(&map.scores.data))?;
    s.write("flags.png", &mask_png_bytes(&map.flags)?)?;
    s.write("scores.png", &unit_png8_bytes(&preview)?)?;
    s.write(ANOMALY_INDEX, &json_bytes(&summary)?)?;
    s.parent(&ctx.run).parent(&mid).parent(&vid).meta(serde_json::json!({
        "tau": tau,
        "flagged": summary.flagged,
        "auc": auc,
    }));
    ctx.ws.commit(s)
}

pub fn synth_volume(ctx: &mut Ctx, a: &SynthVolumeArgs) -> Result<String> {
    let layers = layers_or_default(a.layers.as_deref())?;
    let [x0, y0, width, height] = values(&a.region, "region")?;
    let [z_lo, z_hi] = values(&a.band, "band")?;
    let region = DamageRegion { x0, y0, width, height, z_lo, z_hi };
    let spec = SynthVolumeSpec::from_layers(a.nx, a.ny, a.voxel, &layers, a.noise);
    let synth = synth_damaged_volume(&spec, &region, a.stretch, ctx.stream("volume"))?;
    let stack = generate_fml_stack([a.nx as f64 * a.voxel, a.ny as f64 * a.voxel], &layers)?;
    let run = ctx.run.clone();
    let spec_id = commit_spec(ctx.ws, &run, &stack, false)?;
    let damaged = synth.truth.count();
    commit_volume(
        ctx.ws,
        &[&run, &spec_id],
        &synth.volume,
        Some(&synth.truth),
        false,
        serde_json::json!({
            "stretch": a.stretch,
            "region": region,
            "damaged_columns": damaged,
            "noise": a.noise,
        }),
    )
}

/// Profiles of `vol` labeled by the majority of their window in `truth`.
pub(crate) fn labeled_profiles(vol: &radisynth_core::ct::Volume, truth: &Mask, w: usize, stride: usize) -> Result<Vec<ZSample>> {
    let grid = extract_zprofiles(vol, w, stride)?;
    let labels = grid_truth(truth, w, stride)?;
    if labels.width != grid.gx || labels.height != grid.gy {
        return Err(Error::Validation(format!(
            "truth map {}x{} does not cover the {}x{} volume",
            truth.width, truth.height, vol.nx, vol.ny
        )));
    }
    Ok(grid
        .profiles
        .into_iter()
        .zip(labels.data)
        .map(|(p, damaged)| ZSample { values: p.values, damaged })
        .collect())
}

pub fn train_zcnn_cmd(ctx: &mut Ctx, a: &TrainZcnnArgs) -> Result<String> {
    let (vid, vol, truth) = load_volume(ctx.ws, &a.volume)?;
    let truth = truth.ok_or_else(|| Error::Validation(format!("{vid} has no damage truth map")))?;
    let stride = a.stride.unwrap_or(a.window);
    let samples = labeled_profiles(&vol, &truth, a.window, stride)?;
    let defaults = ZCnnConfig::default().train;
    let cfg = ZCnnConfig {
        filter_a: a.filter_a,
        filter_b: a.filter_b,
        init_seed: ctx.stream("init"),
        holdout: a.holdout,
        train: TrainConfig {
            learning_rate: a.lr.unwrap_or(defaults.learning_rate),
            epochs: a.epochs,
            batch_size: a.batch.unwrap_or(defaults.batch_size),
            momentum: a.momentum.unwrap_or(defaults.momentum),
            seed: ctx.stream("shuffle"),
        },
    };
    let (mut model, report) = train_zcnn(&samples, &cfg)?;
    model.net.round_to_f32();
    log::info!(
        "profile classifier loss {:.4} -> {:.4}, held-out accuracy {:?}",
        report.initial_loss(),
        report.final_loss(),
        model.heldout_accuracy
    );
    let meta = serde_json::json!({
        "window": a.window,
        "stride": stride,
        "samples": samples.len(),
        "damaged": samples.iter().filter(|s| s.damaged).count(),
        "heldout_accuracy": model.heldout_accuracy,
    });
    commit_model(ctx.ws, &[&ctx.run, &vid], &StoredModel::ZprofileCnn(model), meta, Some(&report))
}
