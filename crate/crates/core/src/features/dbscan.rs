use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Point;
use crate::error::{ensure, invalid, Result};
use crate::math::floor;

/// Cluster id per input point (`None` is noise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub labels: Vec<Option<usize>>,
    pub n_clusters: usize,
    pub eps: f64,
    pub min_pts: usize,
}

impl ClusterSet {
    /// Indices of the points in cluster `k`, ascending.
    pub fn members(&self, k: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| (*l == Some(k)).then_some(i))
            .collect()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }
}

struct Grid<'a> {
    pts: &'a [Point],
    eps: f64,
    cells: BTreeMap<(i64, i64), Vec<usize>>,
}

impl<'a> Grid<'a> {
    fn new(pts: &'a [Point], eps: f64) -> Self {
        let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        for (i, p) in pts.iter().enumerate() {
            cells.entry(Self::cell(p, eps)).or_default().push(i);
        }
        Grid { pts, eps, cells }
    }

    fn cell(p: &Point, eps: f64) -> (i64, i64) {
        (floor(p[0] / eps) as i64, floor(p[1] / eps) as i64)
    }

    /// Points within `eps` of point `i`, including `i`, ascending.
    fn neighbours(&self, i: usize, out: &mut Vec<usize>) {
        out.clear();
        let p = self.pts[i];
        let (cx, cy) = Self::cell(&p, self.eps);
        let e2 = self.eps * self.eps;
        for gx in cx - 1..=cx + 1 {
            for gy in cy - 1..=cy + 1 {
                if let Some(c) = self.cells.get(&(gx, gy)) {
                    for &j in c {
                        let (dx, dy) = (self.pts[j][0] - p[0], self.pts[j][1] - p[1]);
                        if dx * dx + dy * dy <= e2 {
                            out.push(j);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

/// Density-based clustering. A point is core when at least `min_pts` points
/// (itself included) lie within `eps`. Clusters are numbered in the order
/// their first core point appears in the input; a border point reachable
/// from several clusters joins the first one discovered.
pub fn dbscan(points: &[Point], eps: f64, min_pts: usize) -> Result<ClusterSet> {
    ensure!(eps > 0.0 && eps.is_finite(), invalid("eps must be positive"));
    ensure!(min_pts >= 1, invalid("min_pts must be >= 1"));
    ensure!(
        points.iter().all(|p| p[0].is_finite() && p[1].is_finite()),
        invalid("points must be finite")
    );
    let grid = Grid::new(points, eps);
    let n = points.len();
    let mut labels: Vec<Option<usize>> = alloc::vec![None; n];
    let mut visited = alloc::vec![false; n];
    let mut n_clusters = 0;
    let mut neigh = Vec::new();
    let mut queue = VecDeque::new();
    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        grid.neighbours(i, &mut neigh);
        if neigh.len() < min_pts {
            continue;
        }
        let c = n_clusters;
        n_clusters += 1;
        labels[i] = Some(c);
        queue.extend(neigh.iter().copied());
        while let Some(j) = queue.pop_front() {
            if labels[j].is_none() {
                labels[j] = Some(c);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            grid.neighbours(j, &mut neigh);
            if neigh.len() >= min_pts {
                queue.extend(neigh.iter().copied());
            }
        }
    }
    Ok(ClusterSet {
        labels,
        n_clusters,
        eps,
        min_pts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input() {
        let c = dbscan(&[], 1.0, 3).unwrap();
        assert_eq!(c.n_clusters, 0);
        assert!(c.labels.is_empty());
    }

    #[test]
    fn isolated_point_is_noise() {
        let c = dbscan(&[[0.0, 0.0]], 1.0, 2).unwrap();
        assert_eq!(c.labels, alloc::vec![None]);
        let c = dbscan(&[[0.0, 0.0]], 1.0, 1).unwrap();
        assert_eq!(c.labels, alloc::vec![Some(0)]);
    }

    #[test]
    fn two_separated_blobs() {
        let eps = 1.5;
        let mut pts = Vec::new();
        for k in 0..20 {
            pts.push([(k % 5) as f64, (k / 5) as f64]);
        }
        for k in 0..20 {
            pts.push([(k % 5) as f64 + 15.0 + 10.0 * eps, (k / 5) as f64]);
        }
        let c = dbscan(&pts, eps, 4).unwrap();
        assert_eq!(c.n_clusters, 2);
        assert_eq!(c.noise_count(), 0);
        assert!(c.labels[..20].iter().all(|&l| l == Some(0)));
        assert!(c.labels[20..].iter().all(|&l| l == Some(1)));
        assert_eq!(c.members(1).len(), 20);
    }

    #[test]
    fn border_point_joins_first_cluster() {
        // two dense columns with a shared border point in between
        let mut pts = alloc::vec![[0.0, 0.0], [0.0, 1.0], [0.0, -1.0], [2.0, 0.0], [4.0, 0.0], [4.0, 1.0], [4.0, -1.0]];
        let c = dbscan(&pts, 2.0, 4).unwrap();
        assert_eq!(c.n_clusters, 2);
        assert_eq!(c.labels[3], Some(0));
        pts.swap(0, 4);
        let c = dbscan(&pts, 2.0, 4).unwrap();
        assert_eq!(c.labels[3], Some(0));
        assert_eq!(c.labels[0], Some(0));
    }

    #[test]
    fn parameter_validation() {
        assert!(dbscan(&[[0.0, 0.0]], 0.0, 2).is_err());
        assert!(dbscan(&[[0.0, 0.0]], 1.0, 0).is_err());
        assert!(dbscan(&[[f64::NAN, 0.0]], 1.0, 1).is_err());
    }
}
