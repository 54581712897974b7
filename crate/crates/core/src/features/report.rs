use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{ClusterSet, EllipseFit, Point};
use crate::cnn::FeatureMap;
use crate::error::{ensure, shape, Error, Result};

pub const REPORT_HEADER: &str = "id,cx,cy,a,b,theta_deg,pixels,mean_score";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoreRow {
    pub id: usize,
    pub cx: f64,
    pub cy: f64,
    pub a: f64,
    pub b: f64,
    pub theta_deg: f64,
    pub pixels: usize,
    pub mean_score: f64,
}

/// One row per cluster, ordered by cluster id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoreReport {
    pub rows: Vec<PoreRow>,
}

/// Combines clusters, their fits (`None` for degenerate clusters, reported
/// as NaN geometry) and the feature-map scores.
pub fn pore_report(
    points: &[Point],
    clusters: &ClusterSet,
    fits: &[Option<EllipseFit>],
    map: &FeatureMap,
) -> Result<PoreReport> {
    ensure!(
        clusters.labels.len() == points.len(),
        shape("cluster labels do not match the point set")
    );
    ensure!(
        fits.len() == clusters.n_clusters,
        shape(alloc::format!(
            "{} fits for {} clusters",
            fits.len(),
            clusters.n_clusters
        ))
    );
    let mut rows = Vec::with_capacity(clusters.n_clusters);
    for (k, fit) in fits.iter().enumerate() {
        let members = clusters.members(k);
        let mut sum = 0.0;
        for &i in &members {
            let (x, y) = (points[i][0] as usize, points[i][1] as usize);
            ensure!(
                x < map.width() && y < map.height(),
                shape("cluster point outside the feature map")
            );
            sum += map.score(x, y);
        }
        let nan = EllipseFit {
            center: [f64::NAN, f64::NAN],
            a: f64::NAN,
            b: f64::NAN,
            theta_deg: f64::NAN,
        };
        let f = fit.unwrap_or(nan);
        rows.push(PoreRow {
            id: k,
            cx: f.center[0],
            cy: f.center[1],
            a: f.a,
            b: f.b,
            theta_deg: f.theta_deg,
            pixels: members.len(),
            mean_score: if members.is_empty() {
                f64::NAN
            } else {
                sum / members.len() as f64
            },
        });
    }
    Ok(PoreReport { rows })
}

impl PoreReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(REPORT_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.id, r.cx, r.cy, r.a, r.b, r.theta_deg, r.pixels, r.mean_score
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<PoreReport> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().unwrap_or("");
        ensure!(
            header.trim() == REPORT_HEADER,
            Error::InvalidParameter(alloc::format!("unexpected report header '{header}'"))
        );
        let bad = |n: usize| Error::InvalidParameter(alloc::format!("malformed report row {n}"));
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 8 {
                return Err(bad(n + 1));
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad(n + 1));
            let int = |i: usize| f[i].parse::<usize>().map_err(|_| bad(n + 1));
            rows.push(PoreRow {
                id: int(0)?,
                cx: num(1)?,
                cy: num(2)?,
                a: num(3)?,
                b: num(4)?,
                theta_deg: num(5)?,
                pixels: int(6)?,
                mean_score: num(7)?,
            });
        }
        Ok(PoreReport { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{dbscan, fit_clusters, threshold_map};
    use crate::raster::Raster;

    fn map_with_blobs() -> FeatureMap {
        let scores = Raster::from_fn(40, 30, |x, y| {
            let d1 = (x as f64 - 10.0).powi(2) / 16.0 + (y as f64 - 10.0).powi(2) / 9.0;
            let d2 = (x as f64 - 28.0).powi(2) + (y as f64 - 20.0).powi(2);
            if d1 <= 1.0 {
                0.9
            } else if d2 <= 9.0 {
                0.7
            } else {
                0.1
            }
        });
        let classes = scores.map(|&s| s > 0.5);
        FeatureMap { scores, classes }
    }

    #[test]
    fn empty_report_is_header_only() {
        let m = map_with_blobs();
        let c = dbscan(&[], 2.0, 5).unwrap();
        let r = pore_report(&[], &c, &[], &m).unwrap();
        assert_eq!(r.to_csv(), alloc::format!("{REPORT_HEADER}\n"));
    }

    #[test]
    fn two_clusters_round_trip() {
        let m = map_with_blobs();
        let (_, pts) = threshold_map(&m, 0.5).unwrap();
        let c = dbscan(&pts, 2.0, 5).unwrap();
        let fits = fit_clusters(&pts, &c);
        let r = pore_report(&pts, &c, &fits, &m).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!((r.rows[0].id, r.rows[1].id), (0, 1));
        assert!((r.rows[0].mean_score - 0.9).abs() < 1e-12);
        assert!((r.rows[1].mean_score - 0.7).abs() < 1e-12);
        let back = PoreReport::from_csv(&r.to_csv()).unwrap();
        for (a, b) in back.rows.iter().zip(&r.rows) {
            for (u, v) in [(a.cx, b.cx), (a.cy, b.cy), (a.a, b.a), (a.b, b.b), (a.theta_deg, b.theta_deg), (a.mean_score, b.mean_score)] {
                assert!((u - v).abs() <= 1e-6 * v.abs().max(1e-12));
            }
            assert_eq!((a.id, a.pixels), (b.id, b.pixels));
        }
    }

    #[test]
    fn degenerate_fit_is_nan() {
        let m = map_with_blobs();
        let pts = [[1.0, 1.0], [2.0, 1.0]];
        let c = dbscan(&pts, 2.0, 1).unwrap();
        let r = pore_report(&pts, &c, &[None], &m).unwrap();
        assert!(r.rows[0].a.is_nan());
        let back = PoreReport::from_csv(&r.to_csv()).unwrap();
        assert!(back.rows[0].a.is_nan() && back.rows[0].pixels == 2);
        assert!(PoreReport::from_csv("id,x\n").is_err());
    }
}
