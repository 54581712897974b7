use radisynth_core::cnn::FeatureMap;
use radisynth_core::features::{
    dbscan, evaluate_pixels, fit_ellipse_with, pore_report, threshold_map, ClusterSet, EllipseFit, FitOptions,
    PixelScores, Point, PoreReport,
};
use serde::{Deserialize, Serialize};

use super::Ctx;
use crate::artifacts::{commit_report, json_bytes, load_feature_map, load_projections, MapIndex};
use crate::cli::{ClusterArgs, EvalArgs, FitArgs, ReportArgs};
use crate::error::{Error, Result};
use crate::imageio::{read_file, read_json};
use crate::workspace::{Kind, Workspace};

const CLUSTERS_INDEX: &str = "clusters.json";
const CLUSTERS_TABLE: &str = "clusters.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ClusterSummary {
    map: String,
    tau: f64,
    eps: f64,
    min_pts: usize,
    points: usize,
    n_clusters: usize,
    noise: usize,
}

#[derive(Serialize, Deserialize)]
struct ClusterRow {
    x: f64,
    y: f64,
    /// Empty for noise points.
    cluster: Option<usize>,
}

fn fits_for(points: &[Point], clusters: &ClusterSet, refine: bool) -> Vec<Option<EllipseFit>> {
    (0..clusters.n_clusters)
        .map(|k| {
            let pts: Vec<Point> = clusters.members(k).into_iter().map(|i| points[i]).collect();
            fit_ellipse_with(&pts, FitOptions { refine }).ok()
        })
        .collect()
}

pub fn cluster(ctx: &mut Ctx, a: &ClusterArgs) -> Result<String> {
    let (map_id, _, map) = load_feature_map(ctx.ws, &a.map)?;
    let (_, points) = threshold_map(&map, a.tau)?;
    let clusters = dbscan(&points, a.eps, a.min_pts)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for (p, l) in points.iter().zip(&clusters.labels) {
        w.serialize(ClusterRow {
            x: p[0],
            y: p[1],
            cluster: *l,
        })
        .map_err(|e| Error::parse("cluster table", None, e.to_string()))?;
    }
    let mut table = w
        .into_inner()
        .map_err(|e| Error::parse("cluster table", None, e.to_string()))?;
    if points.is_empty() {
        table = b"x,y,cluster\n".to_vec();
    }
    let summary = ClusterSummary {
        map: map_id.clone(),
        tau: a.tau,
        eps: a.eps,
        min_pts: a.min_pts,
        points: points.len(),
        n_clusters: clusters.n_clusters,
        noise: clusters.noise_count(),
    };
    log::info!("{} clusters from {} points", summary.n_clusters, summary.points);
    commit_report(
        ctx.ws,
        &[&ctx.run, &map_id],
        &[(CLUSTERS_TABLE, table), (CLUSTERS_INDEX, json_bytes(&summary)?)],
        serde_json::json!({ "clusters": summary.n_clusters }),
    )
}

fn load_clusters(ws: &Workspace, id: &str) -> Result<(String, ClusterSummary, Vec<Point>, ClusterSet)> {
    let e = ws.expect(id, Kind::Report)?;
    let dir = ws.artifact_dir(&e.id);
    let ipath = dir.join(CLUSTERS_INDEX);
    if !ipath.exists() {
        return Err(Error::Validation(format!("{} is not a cluster report", e.id)));
    }
    let summary: ClusterSummary = read_json(&ipath)?;
    let table = read_file(&dir.join(CLUSTERS_TABLE))?;
    let rows: Vec<ClusterRow> = csv::Reader::from_reader(table.as_slice())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse("cluster table", e.position().map(|p| p.byte()), e.to_string()))?;
    let points = rows.iter().map(|r| [r.x, r.y]).collect();
    let labels: Vec<Option<usize>> = rows.iter().map(|r| r.cluster).collect();
    if labels.iter().flatten().any(|&l| l >= summary.n_clusters) {
        return Err(Error::parse("cluster table", None, "cluster label out of range"));
    }
    let set = ClusterSet {
        labels,
        n_clusters: summary.n_clusters,
        eps: summary.eps,
        min_pts: summary.min_pts,
    };
    Ok((e.id.clone(), summary, points, set))
}

pub fn fit(ctx: &mut Ctx, a: &FitArgs) -> Result<String> {
    let (cid, summary, points, clusters) = load_clusters(ctx.ws, &a.clusters)?;
    let (map_id, _, map) = load_feature_map(ctx.ws, &summary.map)?;
    let fits = fits_for(&points, &clusters, a.refine);
    let report = pore_report(&points, &clusters, &fits, &map)?;
    commit_report(
        ctx.ws,
        &[&ctx.run, &cid, &map_id],
        &[("pores.csv", report.to_csv().into_bytes())],
        serde_json::json!({ "pores": report.rows.len(), "refine": a.refine }),
    )
}

/// Truth mask for a map, from `images` or the map's own source.
fn truth_for(ws: &Workspace, index: &MapIndex, images: Option<&str>) -> Result<(String, Option<radisynth_core::scene::GroundTruthMask>)> {
    let set = load_projections(ws, images.unwrap_or(&index.images), Some(index.index))?;
    Ok((set.id, set.truth.into_iter().next().flatten()))
}

fn scores_at(map: &FeatureMap, tau: f64, truth: &radisynth_core::scene::GroundTruthMask) -> Result<PixelScores> {
    let (pred, _) = threshold_map(map, tau)?;
    Ok(evaluate_pixels(&pred, truth)?)
}

pub fn eval(ctx: &mut Ctx, a: &EvalArgs) -> Result<String> {
    let (map_id, index, map) = load_feature_map(ctx.ws, &a.map)?;
    let (images, truth) = truth_for(ctx.ws, &index, a.images.as_deref())?;
    let truth = truth.ok_or_else(|| Error::Validation(format!("{images} has no ground truth")))?;
    let scores = scores_at(&map, a.tau, &truth)?;
    log::info!(
        "TP {:?} FN {:?} FP {:?}",
        scores.tp_rate,
        scores.fn_rate,
        scores.fp_rate
    );
    commit_report(
        ctx.ws,
        &[&ctx.run, &map_id, &images],
        &[("eval.json", json_bytes(&scores)?)],
        serde_json::json!({ "tau": a.tau, "tp_rate": scores.tp_rate, "fn_rate": scores.fn_rate, "fp_rate": scores.fp_rate }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReportSummary {
    map: String,
    tau: f64,
    eps: f64,
    min_pts: usize,
    refine: bool,
    marked_pixels: usize,
    pores: usize,
    noise_points: usize,
    pixel_scores: Option<PixelScores>,
}

pub fn report(ctx: &mut Ctx, a: &ReportArgs) -> Result<String> {
    let (map_id, index, map) = load_feature_map(ctx.ws, &a.map)?;
    let (_, points) = threshold_map(&map, a.tau)?;
    let clusters = dbscan(&points, a.eps, a.min_pts)?;
    let fits = fits_for(&points, &clusters, a.refine);
    let table: PoreReport = pore_report(&points, &clusters, &fits, &map)?;
    let (images, truth) = truth_for(ctx.ws, &index, None)?;
    let pixel_scores = truth.map(|t| scores_at(&map, a.tau, &t)).transpose()?;
    let summary = ReportSummary {
        map: map_id.clone(),
        tau: a.tau,
        eps: a.eps,
        min_pts: a.min_pts,
        refine: a.refine,
        marked_pixels: points.len(),
        pores: table.rows.len(),
        noise_points: clusters.noise_count(),
        pixel_scores,
    };
    let mut parents = vec![ctx.run.as_str(), map_id.as_str()];
    if pixel_scores.is_some() {
        parents.push(&images);
    }
    let parents: Vec<String> = parents.into_iter().map(str::to_string).collect();
    let parents: Vec<&str> = parents.iter().map(String::as_str).collect();
    commit_report(
        ctx.ws,
        &parents,
        &[
            ("pores.csv", table.to_csv().into_bytes()),
            ("summary.json", json_bytes(&summary)?),
        ],
        serde_json::json!({ "pores": summary.pores, "tp_rate": pixel_scores.and_then(|s| s.tp_rate) }),
    )
}
