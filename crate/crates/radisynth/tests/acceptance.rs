//! Acceptance suite: ten end-to-end checks, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the verdict lines always print.
//! Exits non-zero when any check fails.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::time::{Duration, Instant};

use radisynth::commands::run_cli;
use radisynth::experiment::{ExperimentReport, REPORT_JSON, REPORT_TEXT};
use radisynth::workspace::{Kind, Workspace};
use radisynth_core::ct::{fbp_slice, FilterSpec, Sinogram, SliceGrid};
use radisynth_core::features::{dbscan, fit_ellipse, Point};
use radisynth_core::geom::{Transform, Vec3};
use radisynth_core::nn::{grad_check, Head, Layer, Network, Shape, Target};
use radisynth_core::rng;
use radisynth_core::scene::{
    generate_pore_plate, glare_layers, tessellate, CsgNode, Material, PoreCount, PorePlateParams, TriMesh,
};
use radisynth_core::xray::{ray_path_lengths, simulate_projection, ProjectionGeometry};
use radisynth_core::zprofile::{
    anomaly_map, calibrate_tau, extract_zprofiles, grid_truth, roc_auc, synth_damaged_volume, train_ae, AeConfig,
    DamageRegion, SynthVolumeSpec,
};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, t: Duration, detail: String) -> Outcome {
    check(t <= limit, format!("{detail}, {:.2} s (limit {} s)", t.as_secs_f64(), limit.as_secs()))
}

fn slab(thickness: f64, mu: f64) -> TriMesh {
    tessellate(&CsgNode::cuboid(Vec3::new(20.0, 20.0, thickness), true), &Material::new("slab", mu)).unwrap()
}

/// Transmission of the detector's central pixel, whose ray is the beam
/// axis when the detector has odd dimensions.
fn axial_transmission(meshes: &[TriMesh]) -> Result<f64, String> {
    let g = ProjectionGeometry::new(300.0, 600.0, 0.1, 3, 3);
    let (_, d) = g.rays().ray(1, 1);
    if d.x != 0.0 || d.y != 0.0 {
        return Err(format!("central ray {d:?} is not the beam axis"));
    }
    let img = simulate_projection(meshes, &g).map_err(|e| e.to_string())?;
    Ok(*img.pixels.get(1, 1))
}

fn beer_lambert() -> Outcome {
    let t = Instant::now();
    let got = axial_transmission(&[slab(4.0, 0.05)])?;
    let want = (-0.2f64).exp();
    let e1 = (got - want).abs() / want;

    let host = Material::aluminum();
    let pore = Material::air();
    let r = 1.1;
    let sphere = CsgNode::sphere(r, 24).transformed(Transform::translate(Vec3::new(0.0, 0.0, 0.3)));
    let nested = [slab(4.0, host.mu), tessellate(&sphere, &pore.nested_in(&host)).unwrap()];
    let got2 = axial_transmission(&nested)?;
    let want2 = (-(host.mu * (4.0 - 2.0 * r) + pore.mu * 2.0 * r)).exp();
    let e2 = (got2 - want2).abs() / want2;
    let detail = format!("slab rel. error {e1:.2e}, slab+pore rel. error {e2:.2e}");
    if e1 > 1e-6 || e2 > 1e-6 {
        return Err(detail);
    }
    within(Duration::from_secs(1), t.elapsed(), detail)
}

fn sphere_convergence() -> Outcome {
    let t = Instant::now();
    let r = 2.0;
    let dir = Vec3::new(0.3, -0.5, 0.81).normalized();
    let e1 = dir.cross(Vec3::new(1.0, 0.0, 0.0)).normalized();
    let e2 = dir.cross(e1);
    let worst = |segments: u32| -> f64 {
        let m = tessellate(&CsgNode::sphere(r, segments), &Material::aluminum()).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..24 {
            let b = 0.6 * r * k as f64 / 23.0;
            let ang = k as f64 * 0.9;
            let off = e1 * (b * ang.cos()) + e2 * (b * ang.sin());
            let l = ray_path_lengths(off - dir * 10.0, dir, std::slice::from_ref(&m)).unwrap()[0];
            let exact = 2.0 * (r * r - b * b).sqrt();
            worst = worst.max((l - exact).abs() / exact);
        }
        worst
    };
    let (w20, w80) = (worst(20), worst(80));
    let detail = format!("max chord error {:.3}% at 20 segments, {:.3}% at 80", 100.0 * w20, 100.0 * w80);
    if w20 >= 0.02 || w80 >= 0.005 {
        return Err(detail);
    }
    within(Duration::from_secs(10), t.elapsed(), detail)
}

fn disk_sinogram(angles: &[f64], mu: f64, r: f64, cx: f64, cy: f64) -> Sinogram {
    // parallel projection of a disk at (cx, cy): chord at signed offset s
    Sinogram::from_fn(angles.to_vec(), 384, 0.5, move |deg, s| {
        let (c, sn) = (deg.to_radians().cos(), deg.to_radians().sin());
        let d = s - (cx * c + cy * sn);
        if d.abs() < r {
            2.0 * mu * (r * r - d * d).sqrt()
        } else {
            0.0
        }
    })
}

fn fbp_phantom() -> Outcome {
    let t = Instant::now();
    let angles: Vec<f64> = (0..400).map(|k| k as f64 * 180.0 / 400.0).collect();
    let (mu, r) = (0.05, 40.0);
    let grid = SliceGrid::square(256, 0.5);
    let filter = FilterSpec::default();
    let s1 = disk_sinogram(&angles, mu, r, 0.0, 0.0);
    let rec = fbp_slice(&s1, &filter, &grid).map_err(|e| e.to_string())?;
    let (mut sum, mut n) = (0.0, 0usize);
    for k in 0..256 {
        for i in 0..256 {
            let (x, z) = (grid.x_at(i), grid.z_at(k));
            if (x * x + z * z).sqrt() < 0.8 * r {
                sum += *rec.get(i, k);
                n += 1;
            }
        }
    }
    let mean = sum / n as f64;
    let rel = (mean - mu).abs() / mu;

    let s2 = disk_sinogram(&angles, 0.02, 12.0, 20.0, -10.0);
    let (a, b) = (1.7, -0.6);
    let r2 = fbp_slice(&s2, &filter, &grid).map_err(|e| e.to_string())?;
    let r12 = fbp_slice(&s1.combine(a, &s2, b).map_err(|e| e.to_string())?, &filter, &grid).map_err(|e| e.to_string())?;
    let scale = rec.data.iter().chain(&r2.data).fold(0.0f64, |m, v| m.max(v.abs()));
    let lin = r12
        .data
        .iter()
        .zip(rec.data.iter().zip(&r2.data))
        .map(|(c, (x, y))| (c - (a * x + b * y)).abs())
        .fold(0.0f64, f64::max)
        / scale;
    let detail = format!("mean inside 0.8r {mean:.5} vs {mu} ({:.2}%), linearity residual {lin:.1e}", 100.0 * rel);
    if rel > 0.05 || lin > 1e-6 {
        return Err(detail);
    }
    within(Duration::from_secs(30), t.elapsed(), detail)
}

fn run_experiment(ws: &Path, threads: usize) -> Result<(ExperimentReport, BTreeMap<String, Vec<u8>>, Duration), String> {
    let t = Instant::now();
    let argv = [
        "radisynth".to_string(),
        "--workspace".into(),
        ws.display().to_string(),
        "--seed".into(),
        "71".into(),
        "--threads".into(),
        threads.to_string(),
        "experiment-71".into(),
    ];
    let code = run_cli(argv);
    let elapsed = t.elapsed();
    if code != 0 {
        return Err(format!("experiment-71 exited with {code}"));
    }
    let w = Workspace::open_read_only(ws).map_err(|e| e.to_string())?;
    let entry = w
        .manifest()
        .entries
        .iter()
        .rev()
        .find(|e| e.kind == Kind::Report)
        .ok_or("no report committed")?;
    let dir = w.artifact_dir(&entry.id);
    let mut files = BTreeMap::new();
    for name in [REPORT_JSON, REPORT_TEXT, "loss.csv"] {
        files.insert(name.to_string(), std::fs::read(dir.join(name)).map_err(|e| e.to_string())?);
    }
    let report: ExperimentReport = serde_json::from_slice(&files[REPORT_JSON]).map_err(|e| e.to_string())?;
    Ok((report, files, elapsed))
}

fn end_to_end(r: &ExperimentReport, elapsed: Duration) -> Outcome {
    let tp = r.held_out.tp_rate.ok_or("held-out plate has no pore pixels")?;
    let fn_ = r.held_out.fn_rate.ok_or("held-out plate has no pore pixels")?;
    let ab = r.ablation.as_ref().ok_or("ablation missing")?;
    let tp0 = ab.held_out.tp_rate.ok_or("ablation has no pore pixels")?;
    let s = &r.scaling;
    let detail = format!(
        "held-out TP {tp:.4} FN {fn_:.4}, noise-free TP {tp0:.4} (detector {}x{} at {:.4} mm)",
        s.size, s.size, s.pitch_mm
    );
    if tp < 0.90 || fn_ > 0.10 || tp0 < tp {
        return Err(detail);
    }
    within(Duration::from_secs(15 * 60), elapsed, detail)
}

fn false_positive_probe(r: &ExperimentReport) -> Outcome {
    let f = &r.false_alarms;
    check(
        f.fp_rate_noise_free <= 0.05 && f.fp_rate_noisy > f.fp_rate_noise_free,
        format!(
            "pore-free plate FP {:.5} noise-free, {:.5} at sigma {}",
            f.fp_rate_noise_free, f.fp_rate_noisy, r.noise_sigma
        ),
    )
}

fn gradients() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut kinds = std::collections::BTreeSet::new();
    for seed in 0..20u64 {
        for head in [Head::Softmax, Head::Linear] {
            let layers = vec![
                Layer::conv(3, 3, 2, 4, true),
                Layer::MaxPool { ph: 2, pw: 2 },
                Layer::conv(3, 1, 4, 3, true),
                Layer::Upsample { fh: 2, fw: 2 },
                Layer::conv(1, 3, 3, 2, false),
                Layer::dense(6 * 8 * 2, if head == Head::Softmax { Shape::new(1, 1, 3) } else { Shape::new(1, 2, 2) }, false),
            ];
            let mut net = Network::new(Shape::new(6, 8, 2), layers, head).map_err(|e| e.to_string())?;
            net.init_uniform(seed);
            let mut r = rng::seeded(seed);
            let x: Vec<f64> = (0..96).map(|_| r.random_range(-1.0..1.0)).collect();
            let target = match head {
                Head::Softmax => Target::Class(seed as usize % 3),
                Head::Linear => Target::Values((0..4).map(|_| r.random_range(-1.0..1.0)).collect()),
            };
            let rep = grad_check(&net, &x, &target, 1.0, seed).map_err(|e| e.to_string())?;
            worst = worst.max(rep.max_relative_error);
            kinds.extend(rep.layers_checked.iter().copied());
        }
    }
    let detail = format!("max relative error {worst:.2e} over layer kinds {kinds:?}");
    if worst > 1e-4 || kinds.len() < 2 {
        return Err(detail);
    }
    within(Duration::from_secs(10), t.elapsed(), detail)
}

/// Textbook DBSCAN from the full distance matrix: points are visited in
/// input order and each new core point grows its cluster breadth first.
fn brute_force_dbscan(pts: &[Point], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = pts.len();
    let dist = |i: usize, j: usize| ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt();
    let neighbors: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| dist(i, j) <= eps).collect()).collect();
    let core = |i: usize| neighbors[i].len() >= min_pts;
    let mut labels = vec![None; n];
    let mut next = 0;
    for i in 0..n {
        if labels[i].is_some() || !core(i) {
            continue;
        }
        labels[i] = Some(next);
        let mut queue = VecDeque::from([i]);
        while let Some(p) = queue.pop_front() {
            if !core(p) {
                continue;
            }
            for &q in &neighbors[p] {
                if labels[q].is_none() {
                    labels[q] = Some(next);
                    queue.push_back(q);
                }
            }
        }
        next += 1;
    }
    labels
}

fn same_partition(a: &[Option<usize>], b: &[Option<usize>]) -> bool {
    let mut fwd = BTreeMap::new();
    let mut back = BTreeMap::new();
    a.iter().zip(b).all(|(x, y)| match (x, y) {
        (None, None) => true,
        (Some(x), Some(y)) => *fwd.entry(*x).or_insert(*y) == *y && *back.entry(*y).or_insert(*x) == *x,
        _ => false,
    })
}

fn dbscan_oracle() -> Outcome {
    let mut clusters = 0;
    for seed in 0..100u64 {
        let mut r = rng::seeded(seed);
        let n = r.random_range(1..=200);
        let blobs: Vec<Point> = (0..5).map(|_| [r.random_range(0.0..30.0), r.random_range(0.0..30.0)]).collect();
        let pts: Vec<Point> = (0..n)
            .map(|k| {
                if k % 4 == 0 {
                    [r.random_range(0.0..30.0), r.random_range(0.0..30.0)]
                } else {
                    let c = blobs[k % blobs.len()];
                    [c[0] + r.random_range(-2.5..2.5), c[1] + r.random_range(-2.5..2.5)]
                }
            })
            .collect();
        let eps = r.random_range(0.4..2.0);
        let min_pts = r.random_range(2..7);
        let got = dbscan(&pts, eps, min_pts).map_err(|e| e.to_string())?;
        let want = brute_force_dbscan(&pts, eps, min_pts);
        if !same_partition(&got.labels, &want) {
            return Err(format!("seed {seed}: partitions differ (n {n}, eps {eps:.3}, min_pts {min_pts})"));
        }
        clusters += got.n_clusters;
    }
    Ok(format!("100 random sets agree with the pairwise oracle ({clusters} clusters in total)"))
}

fn raster_ellipse(a: f64, b: f64, theta_deg: f64) -> Vec<Point> {
    let (cx, cy) = (40.3, 37.6);
    let (c, s) = (theta_deg.to_radians().cos(), theta_deg.to_radians().sin());
    let mut out = Vec::new();
    for y in 0..80 {
        for x in 0..80 {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let u = c * dx + s * dy;
            let v = -s * dx + c * dy;
            if (u / a).powi(2) + (v / b).powi(2) <= 1.0 {
                out.push([x as f64, y as f64]);
            }
        }
    }
    out
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

fn ellipse_recovery() -> Outcome {
    let b = 8.0;
    let (mut worst_axis, mut worst_theta) = (0.0f64, 0.0f64);
    for ratio in [1.0, 2.0, 3.0] {
        for theta in [0.0, 30.0, 60.0] {
            let a = ratio * b;
            let fit = fit_ellipse(&raster_ellipse(a, b, theta)).map_err(|e| e.to_string())?;
            worst_axis = worst_axis.max((fit.a - a).abs() / a).max((fit.b - b).abs() / b);
            if ratio > 1.0 {
                worst_theta = worst_theta.max(angle_gap(fit.theta_deg, theta));
            }
        }
    }
    check(
        worst_axis <= 0.05 && worst_theta <= 2.0,
        format!("worst axis error {:.2}%, worst angle error {worst_theta:.2} deg", 100.0 * worst_axis),
    )
}

fn zprofile_separation() -> Outcome {
    let t = Instant::now();
    let spec = SynthVolumeSpec::from_layers(64, 64, 0.025, &glare_layers(), 0.02);
    let region = DamageRegion { x0: 20, y0: 20, width: 24, height: 24, z_lo: 0.4, z_hi: 1.05 };
    let baseline = synth_damaged_volume(&spec, &region, 1.0, 1).map_err(|e| e.to_string())?;
    let damaged = synth_damaged_volume(&spec, &region, 1.2, 2).map_err(|e| e.to_string())?;
    let (w, stride) = (4, 4);
    let profiles = extract_zprofiles(&baseline.volume, w, stride).map_err(|e| e.to_string())?;
    let cfg = AeConfig { init_seed: 3, ..AeConfig::default() };
    let (model, _) = train_ae(&profiles.profiles, &cfg).map_err(|e| e.to_string())?;
    let tau = calibrate_tau(&model, &profiles.profiles, 0.99).map_err(|e| e.to_string())?;
    let map = anomaly_map(&model, &damaged.volume, w, stride, tau).map_err(|e| e.to_string())?;
    let labels = grid_truth(&damaged.truth, w, stride).map_err(|e| e.to_string())?;
    let auc = roc_auc(&map.scores.data, &labels.data).ok_or("one class is empty")?;
    let detail = format!(
        "AUC {auc:.4}, {} of {} positions flagged at tau {tau:.3e}",
        map.flags.count(),
        map.flags.data.len()
    );
    if auc < 0.9 {
        return Err(detail);
    }
    within(Duration::from_secs(300), t.elapsed(), detail)
}

fn parallel_rendering() -> Outcome {
    let params = PorePlateParams { count: PoreCount::Fixed(40), ..PorePlateParams::default() };
    let spec = generate_pore_plate(&params, 5).map_err(|e| e.to_string())?;
    let meshes = spec.meshes().map_err(|e| e.to_string())?;
    let g = ProjectionGeometry::new(300.0, 600.0, 0.6, 256, 256);
    let render = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| simulate_projection(&meshes, &g)).map_err(|e| e.to_string())
    };
    let one = render(1)?;
    let four = render(4)?;
    let same = one.pixels.data.iter().zip(&four.pixels.data).all(|(a, b)| a.to_bits() == b.to_bits());
    check(same, format!("256x256 radiograph, 1 vs 4 threads {}", if same { "bit-identical" } else { "differ" }))
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let mut verdicts: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, o: Outcome| {
        match &o {
            Ok(d) => println!("criterion {n:>2} PASS  {name}: {d}"),
            Err(d) => println!("criterion {n:>2} FAIL  {name}: {d}"),
        }
        verdicts.push((n, name, o));
    };

    report(1, "Beer-Lambert attenuation", beer_lambert());
    report(2, "tessellated sphere chords", sphere_convergence());
    report(3, "filtered back projection phantom", fbp_phantom());

    let first = run_experiment(&dir.path().join("run-a"), 1);
    match &first {
        Ok((r, _, t)) => {
            report(4, "two-plate pore detection", end_to_end(r, *t));
            report(5, "pore-free plate false positives", false_positive_probe(r));
        }
        Err(e) => {
            report(4, "two-plate pore detection", Err(e.clone()));
            report(5, "pore-free plate false positives", Err(e.clone()));
        }
    }

    report(6, "backpropagation vs finite differences", gradients());
    report(7, "DBSCAN vs pairwise oracle", dbscan_oracle());
    report(8, "ellipse recovery", ellipse_recovery());
    report(9, "depth-profile anomaly separation", zprofile_separation());

    let second = run_experiment(&dir.path().join("run-b"), 1);
    let determinism = match (&first, &second) {
        (Ok((_, a, _)), Ok((_, b, _))) => {
            let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
            let render = parallel_rendering();
            match (differing.is_empty(), render) {
                (true, Ok(d)) => Ok(format!("rerun reports byte-identical ({} files); {d}", a.len())),
                (false, r) => Err(format!("rerun differs in {differing:?}; {}", r.unwrap_or_else(|e| e))),
                (true, Err(d)) => Err(format!("rerun reports identical; {d}")),
            }
        }
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    report(10, "determinism", determinism);

    let failed: Vec<u32> = verdicts.iter().filter(|v| v.2.is_err()).map(|v| v.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", verdicts.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
