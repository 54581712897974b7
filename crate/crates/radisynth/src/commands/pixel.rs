use radisynth_core::cnn::{
    extract_training_segments, sliding_window_classify, train, Arch, ClassMix, CnnModel, PatchNorm, Segment,
    SegmentLabel, SegmentSampling,
};
use radisynth_core::features::evaluate_pixels;
use radisynth_core::nn::TrainConfig;
use radisynth_core::xray::ProjectionImage;
use radisynth_core::zprofile::percentile;
use serde::{Deserialize, Serialize};

use super::Ctx;
use crate::artifacts::{
    commit_feature_map, commit_model, commit_report, json_bytes, load_model, load_projections, single_with_truth,
    MapIndex,
};
use crate::cli::{ClassifyArgs, ExtractSegmentsArgs, SegmentArgs, TrainArgs, TrainCnnArgs};
use crate::error::{Error, Result};
use crate::imageio::{read_file, read_json};
use crate::modelio::StoredModel;
use crate::workspace::Kind;

pub const SEGMENTS_INDEX: &str = "segments.json";
const SEGMENTS_DATA: &str = "segments.f64";
const SEGMENTS_TABLE: &str = "segments.csv";

/// Stretches the 1st..99th intensity percentile of `img` to `[0, 1]`.
pub(crate) fn auto_norm(img: &ProjectionImage) -> Result<PatchNorm> {
    let lo = percentile(&img.pixels.data, 0.01)?;
    let hi = percentile(&img.pixels.data, 0.99)?;
    Ok(PatchNorm::from_range(lo, hi)?)
}

pub(crate) fn parse_norm(s: &str, img: &ProjectionImage) -> Result<PatchNorm> {
    if s.eq_ignore_ascii_case("auto") {
        return auto_norm(img);
    }
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Validation(format!("--norm '{s}' is neither 'auto' nor lo,hi")))?;
    match parts.as_slice() {
        [lo, hi] => Ok(PatchNorm::from_range(*lo, *hi)?),
        _ => Err(Error::Validation(format!("--norm '{s}' is neither 'auto' nor lo,hi"))),
    }
}

pub(crate) fn mix(v: &[f64]) -> Result<ClassMix> {
    let [p, b] = super::values(v, "mix")?;
    Ok(ClassMix::new(p, b)?)
}

pub(crate) fn parse_arch(s: &str) -> Result<Arch> {
    Ok(s.parse::<Arch>()?)
}

/// Defaults: learning rate 0.01, momentum 0.9, batch 16.
pub(crate) fn cnn_train_config(a: &TrainArgs, seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: a.lr.unwrap_or(0.01),
        epochs: a.epochs,
        batch_size: a.batch.unwrap_or(16),
        momentum: a.momentum.unwrap_or(0.9),
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSetIndex {
    pub size: usize,
    pub count: usize,
    pub norm: PatchNorm,
    pub images: String,
    pub index: usize,
    pub sampling_seed: u64,
}

#[derive(Serialize, Deserialize)]
struct SegmentRow {
    index: usize,
    x: usize,
    y: usize,
    label: SegmentLabel,
}

fn sample_segments(ctx: &Ctx, images: &str, size: usize, s: &SegmentArgs) -> Result<(String, Vec<Segment>, SegmentSetIndex)> {
    let set = load_projections(ctx.ws, images, Some(s.index))?;
    let id = set.id.clone();
    let (img, truth) = single_with_truth(set)?;
    let norm = parse_norm(&s.norm, &img)?;
    let sampling = SegmentSampling {
        size,
        norm,
        count: s.segments,
        mix: mix(&s.mix)?,
        seed: ctx.stream("sampling"),
    };
    let segs = extract_training_segments(&img, &truth, &id, &sampling)?;
    let index = SegmentSetIndex {
        size,
        count: segs.len(),
        norm,
        images: id.clone(),
        index: s.index,
        sampling_seed: sampling.seed,
    };
    Ok((id, segs, index))
}

pub fn extract_segments(ctx: &mut Ctx, a: &ExtractSegmentsArgs) -> Result<String> {
    let (images, segs, index) = sample_segments(ctx, &a.images, a.size, &a.sampling)?;
    let mut s = ctx.ws.stage(Kind::ImageSet)?;
    let data: Vec<u8> = segs
        .iter()
        .flat_map(|g| g.patch.iter().flat_map(|v| v.to_le_bytes()))
        .collect();
    s.write(SEGMENTS_DATA, &data)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for (i, g) in segs.iter().enumerate() {
        w.serialize(SegmentRow {
            index: i,
            x: g.x,
            y: g.y,
            label: g.label,
        })
        .map_err(|e| Error::parse("segment table", None, e.to_string()))?;
    }
    let table = w
        .into_inner()
        .map_err(|e| Error::parse("segment table", None, e.to_string()))?;
    s.write(SEGMENTS_TABLE, &table)?;
    s.write_json(SEGMENTS_INDEX, &index)?;
    s.parent(&ctx.run).parent(&images).meta(serde_json::json!({
        "segments": index.count,
        "size": index.size,
        "pore": segs.iter().filter(|g| g.label == SegmentLabel::Pore).count(),
    }));
    ctx.ws.commit(s)
}

fn load_segments(ctx: &Ctx, id: &str) -> Result<(String, Vec<Segment>, SegmentSetIndex)> {
    let e = ctx.ws.expect(id, Kind::ImageSet)?;
    let dir = ctx.ws.artifact_dir(&e.id);
    let ipath = dir.join(SEGMENTS_INDEX);
    if !ipath.exists() {
        return Err(Error::Validation(format!("{} does not hold training segments", e.id)));
    }
    let index: SegmentSetIndex = read_json(&ipath)?;
    let data = read_file(&dir.join(SEGMENTS_DATA))?;
    let per = index.size * index.size;
    if data.len() != 8 * per * index.count {
        return Err(Error::parse(
            "segment data",
            Some(data.len() as u64),
            format!("expected {} bytes", 8 * per * index.count),
        ));
    }
    let table = read_file(&dir.join(SEGMENTS_TABLE))?;
    let rows: Vec<SegmentRow> = csv::Reader::from_reader(table.as_slice())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse("segment table", e.position().map(|p| p.byte()), e.to_string()))?;
    if rows.len() != index.count {
        return Err(Error::parse("segment table", None, "row count does not match the index"));
    }
    let segs = rows
        .into_iter()
        .enumerate()
        .map(|(i, r)| Segment {
            patch: data[8 * per * i..8 * per * (i + 1)]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            label: r.label,
            image_id: index.images.clone(),
            x: r.x,
            y: r.y,
        })
        .collect();
    Ok((e.id.clone(), segs, index))
}

/// Trains a fresh model on `segments` and rounds its weights to the
/// precision they are stored with.
pub(crate) fn fit_cnn(arch: Arch, norm: PatchNorm, segments: &[Segment], cfg: &TrainConfig, init_seed: u64) -> Result<(CnnModel, radisynth_core::nn::TrainReport)> {
    if segments.iter().any(|s| s.patch.len() != arch.segment_size * arch.segment_size) {
        return Err(Error::Validation(format!(
            "segments do not match the {arch} architecture's input size"
        )));
    }
    let mut model = CnnModel::from_arch(arch, init_seed)?;
    model.norm = norm;
    let report = train(&mut model, segments, cfg)?;
    model.net.round_to_f32();
    Ok((model, report))
}

pub fn train_cnn(ctx: &mut Ctx, a: &TrainCnnArgs) -> Result<String> {
    let arch = parse_arch(&a.arch)?;
    let (source, segs, index) = match (&a.images, &a.segment_set) {
        (_, Some(id)) => load_segments(ctx, id)?,
        (Some(images), None) => sample_segments(ctx, images, arch.segment_size, &a.sampling)?,
        (None, None) => return Err(Error::Validation("train-cnn needs --images or --segment-set".into())),
    };
    let cfg = cnn_train_config(&a.train, ctx.stream("shuffle"));
    let (model, report) = fit_cnn(arch, index.norm, &segs, &cfg, ctx.stream("init"))?;
    let last = report.history.last().copied();
    log::info!(
        "trained {arch}: loss {:.4} -> {:.4}",
        report.initial_loss(),
        report.final_loss()
    );
    let meta = serde_json::json!({
        "arch": arch.to_string(),
        "segments": segs.len(),
        "epochs": cfg.epochs,
        "final_loss": last.map(|l| l.loss),
        "final_accuracy": last.map(|l| l.train_accuracy),
    });
    commit_model(ctx.ws, &[&ctx.run, &source], &StoredModel::PixelCnn(model), meta, Some(&report))
}

pub fn classify(ctx: &mut Ctx, a: &ClassifyArgs) -> Result<String> {
    let (model_id, model, _) = load_model(ctx.ws, &a.model)?;
    let model = model.expect_pixel_cnn()?;
    let set = load_projections(ctx.ws, &a.images, Some(a.index))?;
    let images = set.id.clone();
    let img = &set.images[0];
    let map = sliding_window_classify(&model, img)?;
    let source = MapIndex {
        width: img.width(),
        height: img.height(),
        images: images.clone(),
        index: a.index,
    };
    let marked = map.classes.count();
    let map_id = commit_feature_map(
        ctx.ws,
        &[&ctx.run, &model_id, &images],
        &map,
        source,
        serde_json::json!({ "model": model_id, "images": images, "marked_pixels": marked }),
    )?;
    if let Some(truth) = &set.truth[0] {
        let scores = evaluate_pixels(&map.classes, truth)?;
        log::info!(
            "pixel rates: TP {:?} FN {:?} FP {:?}",
            scores.tp_rate,
            scores.fn_rate,
            scores.fp_rate
        );
        commit_report(
            ctx.ws,
            &[&ctx.run, &map_id, &images],
            &[("eval.json", json_bytes(&scores)?)],
            serde_json::json!({ "tp_rate": scores.tp_rate, "fp_rate": scores.fp_rate }),
        )?;
    }
    Ok(map_id)
}
