use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{anomaly_score, extract_zprofiles, AeModel, ZProfile};
use crate::ct::Volume;
use crate::error::{ensure, invalid, shape, Error, Result};
use crate::raster::{Mask, Raster};

/// Baseline score quantile used as the detection threshold.
pub const DEFAULT_PERCENTILE: f64 = 0.99;

/// Per grid position reconstruction error and its thresholded flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyMap {
    pub w: usize,
    pub stride: usize,
    pub tau: f64,
    /// `gx x gy`.
    pub scores: Raster<f64>,
    pub flags: Mask,
}

/// Nearest-rank quantile: the smallest value with at least `q * n` values
/// at or below it.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    ensure!(!values.is_empty(), Error::DegenerateData("no values".into()));
    ensure!((0.0..=1.0).contains(&q), invalid("quantile must be in [0, 1]"));
    ensure!(
        values.iter().all(|v| v.is_finite()),
        invalid("values must be finite")
    );
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = crate::math::ceil(q * v.len() as f64) as usize;
    Ok(v[rank.clamp(1, v.len()) - 1])
}

/// Threshold at quantile `q` of the baseline scores.
pub fn calibrate_tau(model: &AeModel, baseline: &[ZProfile], q: f64) -> Result<f64> {
    let scores = baseline
        .iter()
        .map(|p| anomaly_score(model, &p.values))
        .collect::<Result<Vec<f64>>>()?;
    percentile(&scores, q)
}

/// Scores every grid profile of `volume`; flagged where `score >= tau`.
pub fn anomaly_map(model: &AeModel, volume: &Volume, w: usize, stride: usize, tau: f64) -> Result<AnomalyMap> {
    let grid = extract_zprofiles(volume, w, stride)?;
    let scored = crate::par::map_indexed(grid.len(), |k| anomaly_score(model, &grid.profiles[k].values));
    let scores = scored.into_iter().collect::<Result<Vec<f64>>>()?;
    let scores = Raster::from_vec(grid.gx, grid.gy, scores)?;
    let flags = scores.map(|&s| s >= tau);
    Ok(AnomalyMap {
        w,
        stride,
        tau,
        scores,
        flags,
    })
}

/// Labels a grid position damaged when more than half of its window lies
/// in `truth`.
pub fn grid_truth(truth: &Mask, w: usize, stride: usize) -> Result<Mask> {
    ensure!(w >= 1 && stride >= 1, invalid("window and stride must be >= 1"));
    ensure!(
        w <= truth.width.min(truth.height),
        shape("window exceeds the truth map")
    );
    let gx = (truth.width - w) / stride + 1;
    let gy = (truth.height - w) / stride + 1;
    Ok(Mask::from_fn(gx, gy, |i, j| {
        let mut n = 0;
        for y in j * stride..j * stride + w {
            for x in i * stride..i * stride + w {
                n += usize::from(*truth.get(x, y));
            }
        }
        2 * n > w * w
    }))
}

/// Area under the ROC curve via the Mann-Whitney statistic, ties counted
/// half. `None` when either class is empty.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    if scores.len() != positive.len() {
        return None;
    }
    let np = positive.iter().filter(|&&p| p).count();
    let nn = positive.len() - np;
    if np == 0 || nn == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if positive[k] {
                rank_sum += mid;
            }
        }
        i = j + 1;
    }
    let u = rank_sum - (np * (np + 1)) as f64 / 2.0;
    Some(u / (np * nn) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zprofile::build_ae;

    fn pairwise_auc(s: &[f64], p: &[bool]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..s.len() {
            for j in 0..s.len() {
                if p[i] && !p[j] {
                    den += 1.0;
                    num += if s[i] > s[j] { 1.0 } else if s[i] == s[j] { 0.5 } else { 0.0 };
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_cases() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.9, 0.8], &[false, false, true, true]), Some(1.0));
        assert_eq!(roc_auc(&[0.9, 0.8, 0.1, 0.2], &[false, false, true, true]), Some(0.0));
        assert_eq!(roc_auc(&[0.5; 4], &[false, true, false, true]), Some(0.5));
        assert_eq!(roc_auc(&[0.5; 2], &[true, true]), None);
        let s = [0.3, 0.1, 0.3, 0.7, 0.2, 0.7, 0.3];
        let p = [true, false, false, true, true, false, false];
        assert!((roc_auc(&s, &p).unwrap() - pairwise_auc(&s, &p)).abs() < 1e-12);
    }

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=100).rev().map(f64::from).collect();
        assert_eq!(percentile(&v, 0.99).unwrap(), 99.0);
        assert_eq!(percentile(&v, 1.0).unwrap(), 100.0);
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&[4.0, 2.0, 3.0], 0.5).unwrap(), 3.0);
        assert!(percentile(&[], 0.5).is_err());
        assert!(percentile(&[1.0], 1.5).is_err());
    }

    #[test]
    fn majority_truth() {
        let t = Mask::from_fn(8, 8, |x, y| (2..6).contains(&x) && (2..6).contains(&y));
        let g = grid_truth(&t, 4, 2).unwrap();
        assert_eq!((g.width, g.height), (3, 3));
        assert!(*g.get(1, 1));
        // window (0..4)x(0..4) holds 4 of 16 truth pixels
        assert!(!*g.get(0, 0));
        assert_eq!(g.count(), 1);
    }

    #[test]
    fn map_scores_and_flags() {
        let m = build_ae(8, 2, 1).unwrap();
        let data = (0..6 * 5 * 8).map(|i| ((i * 7) % 11) as f64 * 0.01).collect();
        let v = Volume::from_vec(6, 5, 8, [1.0; 3], data).unwrap();
        let map = anomaly_map(&m, &v, 2, 2, 0.0005).unwrap();
        assert_eq!((map.scores.width, map.scores.height), (3, 2));
        for (s, f) in map.scores.data.iter().zip(&map.flags.data) {
            assert!(*s >= 0.0);
            assert_eq!(*f, *s >= 0.0005);
        }
        let short = Volume::zeros(6, 5, 12, [1.0; 3]);
        assert!(matches!(anomaly_map(&m, &short, 2, 2, 0.1), Err(Error::Shape(_))));
    }
}
