//! Two-plate pore detection experiment.
//!
//! Plate A trains a pixel classifier, plate B measures detection on unseen
//! pores and a pore-free plate C measures false alarms with and without
//! detector noise. An optional ablation retrains on noise-free images.
//! Every intermediate product is committed to the workspace, and the final
//! report contains no timings so that repeated runs are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use radisynth_core::cnn::{extract_training_segments, sliding_window_classify, CnnModel, FeatureMap, SegmentLabel, SegmentSampling};
use radisynth_core::features::{evaluate_pixels, PixelScores};
use radisynth_core::nn::{TrainConfig, TrainReport};
use radisynth_core::scene::{generate_pore_plate, ground_truth_mask, GroundTruthMask, PoreCount, PorePlateParams, SpecimenSpec};
use radisynth_core::xray::{add_noise, simulate_projection, NoiseModel, ProjectionGeometry, ProjectionImage};
use serde::{Deserialize, Serialize};

use crate::artifacts::{commit_feature_map, commit_model, commit_projections, commit_report, commit_spec, json_bytes, MapIndex};
use crate::cli::ExperimentArgs;
use crate::commands::pixel::{auto_norm, fit_cnn, mix, parse_arch};
use crate::commands::Ctx;
use crate::error::{Error, Result};
use crate::modelio::StoredModel;
use crate::tables;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";

/// Detector the experiment is modeled on; other sizes keep its field of
/// view by scaling the pitch.
pub const REFERENCE_WIDTH: usize = 1000;
pub const REFERENCE_PITCH_MM: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub size: usize,
    pub pitch_mm: f64,
    pub reference_size: usize,
    pub reference_pitch_mm: f64,
    pub sod_mm: f64,
    pub sdd_mm: f64,
    pub magnification: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateSummary {
    pub spec: String,
    pub pores: usize,
    pub pore_pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub arch: String,
    pub segments: usize,
    pub pore_segments: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub norm_offset: f64,
    pub norm_scale: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub final_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalseAlarms {
    /// Marked fraction of the pore-free plate without noise.
    pub fp_rate_noise_free: f64,
    pub fp_rate_noisy: f64,
    pub marked_noise_free: usize,
    pub marked_noisy: usize,
    pub pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub training: TrainingSummary,
    /// Noise-free test plate scored by the noise-free model.
    pub held_out: PixelScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub noise_sigma: f64,
    pub scaling: Scaling,
    pub train_plate: PlateSummary,
    pub test_plate: PlateSummary,
    pub clean_plate: PlateSummary,
    pub training: TrainingSummary,
    /// Test plate B, never seen in training.
    pub held_out: PixelScores,
    /// Plate A, the one the segments were drawn from.
    pub training_plate: PixelScores,
    pub false_alarms: FalseAlarms,
    pub ablation: Option<Ablation>,
    /// Workspace ids of the committed intermediates.
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report_id: String,
    pub report: ExperimentReport,
}

struct Plate {
    id: String,
    spec: SpecimenSpec,
    clean: ProjectionImage,
    truth: GroundTruthMask,
}

struct Trained {
    id: String,
    model: CnnModel,
    summary: TrainingSummary,
    report: TrainReport,
}

fn staged<T>(stage: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(stage))
}

fn geometry(a: &ExperimentArgs) -> Result<ProjectionGeometry> {
    if a.size == 0 {
        return Err(Error::Validation("--size must be >= 1".into()));
    }
    let pitch = a.pitch.unwrap_or(REFERENCE_PITCH_MM * REFERENCE_WIDTH as f64 / a.size as f64);
    let g = ProjectionGeometry::new(a.sod, a.sdd, pitch, a.size, a.size);
    g.validate()?;
    Ok(g)
}

fn generate(ctx: &mut Ctx, label: &str, count: PoreCount, g: &ProjectionGeometry) -> Result<Plate> {
    let params = PorePlateParams { count, ..PorePlateParams::default() };
    let spec = generate_pore_plate(&params, ctx.stream(label))?;
    let run = ctx.run.clone();
    let id = commit_spec(ctx.ws, &run, &spec, false)?;
    log::info!("{label}: {} pores ({id})", spec.defects.len());
    let mut clean = simulate_projection(&spec.meshes()?, g)?;
    clean.meta.spec_id = Some(id.clone());
    let truth = ground_truth_mask(&spec, g);
    Ok(Plate { id, spec, clean, truth })
}

fn noisy(ctx: &Ctx, plate: &Plate, label: &str, sigma: f64) -> Result<ProjectionImage> {
    if sigma == 0.0 {
        return Ok(plate.clean.clone());
    }
    let mut img = add_noise(&plate.clean, &NoiseModel::relative(sigma, ctx.stream(&format!("noise-{label}"))))?;
    img.meta.spec_id = Some(plate.id.clone());
    Ok(img)
}

fn commit_image(ctx: &mut Ctx, plate: &Plate, img: &ProjectionImage, sigma: f64) -> Result<String> {
    let run = ctx.run.clone();
    commit_projections(
        ctx.ws,
        &[&run, &plate.id],
        std::slice::from_ref(img),
        std::slice::from_ref(&plate.truth),
        serde_json::json!({ "spec": plate.id, "noise_sigma": sigma }),
    )
}

fn train_on(ctx: &mut Ctx, a: &ExperimentArgs, image_id: &str, img: &ProjectionImage, truth: &GroundTruthMask) -> Result<Trained> {
    let arch = parse_arch(&a.arch)?;
    let norm = auto_norm(img)?;
    let sampling = SegmentSampling {
        size: arch.segment_size,
        norm,
        count: a.segments,
        mix: mix(&a.mix)?,
        seed: ctx.stream("sampling"),
    };
    let segs = extract_training_segments(img, truth, image_id, &sampling)?;
    let cfg = TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch,
        momentum: a.momentum,
        seed: ctx.stream("shuffle"),
    };
    let (model, report) = fit_cnn(arch, norm, &segs, &cfg, ctx.stream("init"))?;
    let last = report.history.last().copied();
    let summary = TrainingSummary {
        arch: arch.to_string(),
        segments: segs.len(),
        pore_segments: segs.iter().filter(|s| s.label == SegmentLabel::Pore).count(),
        epochs: cfg.epochs,
        learning_rate: cfg.learning_rate,
        momentum: cfg.momentum,
        batch_size: cfg.batch_size,
        norm_offset: norm.offset,
        norm_scale: norm.scale,
        initial_loss: report.initial_loss(),
        final_loss: report.final_loss(),
        final_accuracy: last.map_or(0.0, |l| l.train_accuracy),
    };
    log::info!(
        "trained on {image_id}: loss {:.4} -> {:.4}, accuracy {:.3}",
        summary.initial_loss,
        summary.final_loss,
        summary.final_accuracy
    );
    let run = ctx.run.clone();
    let id = commit_model(
        ctx.ws,
        &[&run, image_id],
        &StoredModel::PixelCnn(model.clone()),
        serde_json::to_value(&summary).map_err(|e| Error::parse("training summary", None, e.to_string()))?,
        Some(&report),
    )?;
    Ok(Trained { id, model, summary, report })
}

fn classify_and_commit(ctx: &mut Ctx, model: &Trained, image_id: &str, img: &ProjectionImage) -> Result<(String, FeatureMap)> {
    let map = sliding_window_classify(&model.model, img)?;
    let run = ctx.run.clone();
    let id = commit_feature_map(
        ctx.ws,
        &[&run, &model.id, image_id],
        &map,
        MapIndex {
            width: img.width(),
            height: img.height(),
            images: image_id.to_string(),
            index: 0,
        },
        serde_json::json!({ "model": model.id, "images": image_id, "marked_pixels": map.classes.count() }),
    )?;
    Ok((id, map))
}

fn rate(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |r| format!("{r:.4}"))
}

fn render_text(r: &ExperimentReport) -> String {
    let mut s = String::new();
    let sc = &r.scaling;
    let _ = writeln!(s, "pore detection experiment, seed {}", r.seed);
    let _ = writeln!(
        s,
        "detector {0}x{0} at {1:.4} mm (reference {2}x{2} at {3} mm), SOD {4} mm, SDD {5} mm, M {6:.3}",
        sc.size, sc.pitch_mm, sc.reference_size, sc.reference_pitch_mm, sc.sod_mm, sc.sdd_mm, sc.magnification
    );
    let _ = writeln!(s, "relative noise sigma {}", r.noise_sigma);
    for (name, p) in [("train plate", &r.train_plate), ("test plate", &r.test_plate), ("pore-free plate", &r.clean_plate)] {
        let _ = writeln!(s, "{name}: {} pores, {} pore pixels ({})", p.pores, p.pore_pixels, p.spec);
    }
    let t = &r.training;
    let _ = writeln!(
        s,
        "training: {} on {} segments ({} pore), {} epochs, loss {:.4} -> {:.4}, accuracy {:.4}",
        t.arch, t.segments, t.pore_segments, t.epochs, t.initial_loss, t.final_loss, t.final_accuracy
    );
    for (name, p) in [("held-out plate", &r.held_out), ("training plate", &r.training_plate)] {
        let _ = writeln!(
            s,
            "{name}: TP {} FN {} FP {} precision {}",
            rate(p.tp_rate),
            rate(p.fn_rate),
            rate(p.fp_rate),
            rate(p.precision)
        );
    }
    let f = &r.false_alarms;
    let _ = writeln!(
        s,
        "pore-free plate: FP {:.4} noise-free, {:.4} noisy ({} / {} of {} pixels)",
        f.fp_rate_noise_free, f.fp_rate_noisy, f.marked_noise_free, f.marked_noisy, f.pixels
    );
    if let Some(ab) = &r.ablation {
        let _ = writeln!(
            s,
            "noise-free retraining: TP {} FN {} FP {}",
            rate(ab.held_out.tp_rate),
            rate(ab.held_out.fn_rate),
            rate(ab.held_out.fp_rate)
        );
    }
    s
}

fn false_alarm_rate(map: &FeatureMap) -> f64 {
    map.classes.count() as f64 / map.classes.data.len() as f64
}

/// Runs the experiment inside `ctx`, committing every stage.
pub fn run(ctx: &mut Ctx, a: &ExperimentArgs) -> Result<ExperimentOutcome> {
    let g = staged("setup", geometry(a))?;
    let count = match a.pores {
        Some(n) => PoreCount::Fixed(n),
        None => PoreCount::Poisson { lambda: 100.0 },
    };
    let mut artifacts = BTreeMap::new();

    let (pa, pb, pc) = staged("generate", (|| -> Result<_> {
        Ok((
            generate(ctx, "plate-a", count, &g)?,
            generate(ctx, "plate-b", count, &g)?,
            generate(ctx, "plate-clean", PoreCount::Fixed(0), &g)?,
        ))
    })())?;
    artifacts.insert("spec_train".into(), pa.id.clone());
    artifacts.insert("spec_test".into(), pb.id.clone());
    artifacts.insert("spec_clean".into(), pc.id.clone());

    let (ia, ib, ic) = staged("simulate", (|| -> Result<_> {
        Ok((
            noisy(ctx, &pa, "plate-a", a.noise)?,
            noisy(ctx, &pb, "plate-b", a.noise)?,
            noisy(ctx, &pc, "plate-clean", a.noise)?,
        ))
    })())?;
    let (ia_id, ib_id, ic_id, ic0_id) = staged("simulate", (|| -> Result<_> {
        Ok((
            commit_image(ctx, &pa, &ia, a.noise)?,
            commit_image(ctx, &pb, &ib, a.noise)?,
            commit_image(ctx, &pc, &ic, a.noise)?,
            commit_image(ctx, &pc, &pc.clean, 0.0)?,
        ))
    })())?;
    artifacts.insert("images_train".into(), ia_id.clone());
    artifacts.insert("images_test".into(), ib_id.clone());
    artifacts.insert("images_clean_noisy".into(), ic_id.clone());
    artifacts.insert("images_clean_noise_free".into(), ic0_id.clone());

    let trained = staged("train", train_on(ctx, a, &ia_id, &ia, &pa.truth))?;
    artifacts.insert("model".into(), trained.id.clone());

    let maps = staged("classify", (|| -> Result<_> {
        Ok((
            classify_and_commit(ctx, &trained, &ib_id, &ib)?,
            classify_and_commit(ctx, &trained, &ia_id, &ia)?,
            classify_and_commit(ctx, &trained, &ic0_id, &pc.clean)?,
            classify_and_commit(ctx, &trained, &ic_id, &ic)?,
        ))
    })())?;
    let ((mb_id, mb), (ma_id, ma), (mc0_id, mc0), (mc_id, mc)) = maps;
    artifacts.insert("map_test".into(), mb_id.clone());
    artifacts.insert("map_train".into(), ma_id.clone());
    artifacts.insert("map_clean_noise_free".into(), mc0_id.clone());
    artifacts.insert("map_clean_noisy".into(), mc_id.clone());

    let (held_out, training_plate) = staged("evaluate", (|| -> Result<_> {
        Ok((evaluate_pixels(&mb.classes, &pb.truth)?, evaluate_pixels(&ma.classes, &pa.truth)?))
    })())?;
    log::info!(
        "held-out TP {} FN {} FP {}",
        rate(held_out.tp_rate),
        rate(held_out.fn_rate),
        rate(held_out.fp_rate)
    );

    let false_alarms = FalseAlarms {
        fp_rate_noise_free: false_alarm_rate(&mc0),
        fp_rate_noisy: false_alarm_rate(&mc),
        marked_noise_free: mc0.classes.count(),
        marked_noisy: mc.classes.count(),
        pixels: mc.classes.data.len(),
    };
    log::info!(
        "pore-free plate FP {:.4} noise-free, {:.4} noisy",
        false_alarms.fp_rate_noise_free,
        false_alarms.fp_rate_noisy
    );

    let ablation = if a.no_ablation {
        None
    } else {
        Some(staged("ablation", (|| -> Result<_> {
            let a0_id = commit_image(ctx, &pa, &pa.clean, 0.0)?;
            let b0_id = commit_image(ctx, &pb, &pb.clean, 0.0)?;
            let t0 = train_on(ctx, a, &a0_id, &pa.clean, &pa.truth)?;
            let (m0_id, m0) = classify_and_commit(ctx, &t0, &b0_id, &pb.clean)?;
            let scores = evaluate_pixels(&m0.classes, &pb.truth)?;
            log::info!("noise-free retraining: TP {}", rate(scores.tp_rate));
            Ok((a0_id, b0_id, t0.id, m0_id, Ablation { training: t0.summary, held_out: scores }))
        })())?)
    };
    let ablation = ablation.map(|(a0, b0, model, map, ab)| {
        artifacts.insert("ablation_images_train".into(), a0);
        artifacts.insert("ablation_images_test".into(), b0);
        artifacts.insert("ablation_model".into(), model);
        artifacts.insert("ablation_map_test".into(), map);
        ab
    });

    let report = ExperimentReport {
        seed: ctx.seed,
        noise_sigma: a.noise,
        scaling: Scaling {
            size: a.size,
            pitch_mm: g.pixel_pitch,
            reference_size: REFERENCE_WIDTH,
            reference_pitch_mm: REFERENCE_PITCH_MM,
            sod_mm: g.sod,
            sdd_mm: g.sdd,
            magnification: g.magnification(),
        },
        train_plate: PlateSummary { spec: pa.id.clone(), pores: pa.spec.defects.len(), pore_pixels: pa.truth.mask.count() },
        test_plate: PlateSummary { spec: pb.id.clone(), pores: pb.spec.defects.len(), pore_pixels: pb.truth.mask.count() },
        clean_plate: PlateSummary { spec: pc.id.clone(), pores: pc.spec.defects.len(), pore_pixels: pc.truth.mask.count() },
        training: trained.summary.clone(),
        held_out,
        training_plate,
        false_alarms,
        ablation,
        artifacts,
    };

    let report_id = staged("report", (|| -> Result<_> {
        let files = [
            (REPORT_JSON, json_bytes(&report)?),
            (REPORT_TEXT, render_text(&report).into_bytes()),
            (crate::artifacts::CURVE_FILE, tables::curve_to_csv(&trained.report)?.into_bytes()),
        ];
        let run = ctx.run.clone();
        let mut parents: Vec<&str> = vec![&run];
        parents.extend(report.artifacts.values().map(String::as_str));
        let meta = serde_json::json!({
            "held_out_tp_rate": report.held_out.tp_rate,
            "held_out_fn_rate": report.held_out.fn_rate,
            "fp_rate_noise_free": report.false_alarms.fp_rate_noise_free,
        });
        commit_report(ctx.ws, &parents, &files, meta)
    })())?;
    log::info!("experiment report {report_id}");
    Ok(ExperimentOutcome { report_id, report })
}
