use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ClusterSet, Point};
use crate::error::{Error, Result};
use crate::math::{atan2, cos, rad_to_deg, round, sin, sqrt, PI};

/// Ellipse in pixel coordinates. `theta_deg` is the angle of the major axis
/// from +x towards +y, in `(-90, 90]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseFit {
    pub center: Point,
    pub a: f64,
    pub b: f64,
    pub theta_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FitOptions {
    /// Polish the moment estimate by damped Gauss-Newton on the algebraic
    /// distance of the region's boundary edge midpoints.
    pub refine: bool,
}

/// Relative eigenvalue below which the point set counts as collinear.
const COLLINEAR: f64 = 1e-9;

fn wrap_theta(mut t: f64) -> f64 {
    while t <= -90.0 {
        t += 180.0;
    }
    while t > 90.0 {
        t -= 180.0;
    }
    t
}

/// Centroid plus second moments, with the axes scaled so that the ellipse
/// area equals the number of points (one pixel each).
pub fn fit_ellipse(points: &[Point]) -> Result<EllipseFit> {
    fit_ellipse_with(points, FitOptions::default())
}

pub fn fit_ellipse_with(points: &[Point], opts: FitOptions) -> Result<EllipseFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit);
    }
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - cx, p[1] - cy);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let (sxx, syy, sxy) = (sxx / n, syy / n, sxy / n);
    let mean = 0.5 * (sxx + syy);
    let diff = 0.5 * (sxx - syy);
    let root = sqrt(diff * diff + sxy * sxy);
    let (l1, l2) = (mean + root, mean - root);
    if !(l1 > 0.0) || l2 <= COLLINEAR * l1 {
        return Err(Error::DegenerateFit);
    }
    let theta = if root <= 1e-12 * mean {
        0.0
    } else {
        wrap_theta(rad_to_deg(0.5 * atan2(2.0 * sxy, sxx - syy)))
    };
    // a uniform ellipse with semi-axes a, b has variances a^2/4, b^2/4
    let (a0, b0) = (2.0 * sqrt(l1), 2.0 * sqrt(l2));
    let k = sqrt(n / (PI * a0 * b0));
    let fit = EllipseFit {
        center: [cx, cy],
        a: a0 * k,
        b: b0 * k,
        theta_deg: theta,
    };
    if opts.refine {
        Ok(refine(points, fit))
    } else {
        Ok(fit)
    }
}

/// Fits every cluster; `None` where the fit is degenerate.
pub fn fit_clusters(points: &[Point], clusters: &ClusterSet) -> Vec<Option<EllipseFit>> {
    (0..clusters.n_clusters)
        .map(|k| {
            let pts: Vec<Point> = clusters.members(k).into_iter().map(|i| points[i]).collect();
            fit_ellipse(&pts).ok()
        })
        .collect()
}

fn boundary_midpoints(points: &[Point]) -> Vec<Point> {
    let set: BTreeSet<(i64, i64)> = points
        .iter()
        .map(|p| (round(p[0]) as i64, round(p[1]) as i64))
        .collect();
    let mut out = Vec::new();
    for &(x, y) in &set {
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            if !set.contains(&(x + dx, y + dy)) {
                out.push([x as f64 + 0.5 * dx as f64, y as f64 + 0.5 * dy as f64]);
            }
        }
    }
    out
}

fn residuals(q: &[f64; 5], pts: &[Point], out: &mut Vec<f64>) {
    out.clear();
    let (c, s) = (cos(q[4]), sin(q[4]));
    for p in pts {
        let (dx, dy) = (p[0] - q[0], p[1] - q[1]);
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        out.push(u * u / (q[2] * q[2]) + v * v / (q[3] * q[3]) - 1.0);
    }
}

fn solve5(mut m: [[f64; 6]; 5]) -> Option<[f64; 5]> {
    for col in 0..5 {
        let piv = (col..5).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..5 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for k in col..6 {
                    m[r][k] -= f * m[col][k];
                }
            }
        }
    }
    let mut x = [0.0; 5];
    for i in 0..5 {
        x[i] = m[i][5] / m[i][i];
    }
    Some(x)
}

fn refine(points: &[Point], init: EllipseFit) -> EllipseFit {
    let pts = boundary_midpoints(points);
    if pts.len() < 5 {
        return init;
    }
    let mut q = [
        init.center[0],
        init.center[1],
        init.a,
        init.b,
        init.theta_deg.to_radians_libm(),
    ];
    let mut r = Vec::new();
    let mut rp = Vec::new();
    let mut rm = Vec::new();
    residuals(&q, &pts, &mut r);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    for _ in 0..50 {
        // numeric Jacobian, central differences
        let mut jac = alloc::vec![[0.0; 5]; pts.len()];
        for k in 0..5 {
            let h = 1e-6 * q[k].abs().max(1.0);
            let mut qp = q;
            let mut qm = q;
            qp[k] += h;
            qm[k] -= h;
            residuals(&qp, &pts, &mut rp);
            residuals(&qm, &pts, &mut rm);
            for (row, (a, b)) in jac.iter_mut().zip(rp.iter().zip(&rm)) {
                row[k] = (a - b) / (2.0 * h);
            }
        }
        let mut jtj = [[0.0; 5]; 5];
        let mut jtr = [0.0; 5];
        for (row, &ri) in jac.iter().zip(&r) {
            for i in 0..5 {
                jtr[i] += row[i] * ri;
                for j in 0..5 {
                    jtj[i][j] += row[i] * row[j];
                }
            }
        }
        let mut improved = false;
        for _ in 0..10 {
            let mut m = [[0.0; 6]; 5];
            for i in 0..5 {
                for j in 0..5 {
                    m[i][j] = jtj[i][j];
                }
                m[i][i] += lambda * jtj[i][i].max(1e-12);
                m[i][5] = -jtr[i];
            }
            let Some(step) = solve5(m) else { break };
            let mut cand = q;
            for i in 0..5 {
                cand[i] += step[i];
            }
            if cand[2] <= 0.0 || cand[3] <= 0.0 {
                lambda *= 10.0;
                continue;
            }
            residuals(&cand, &pts, &mut rp);
            let c: f64 = rp.iter().map(|v| v * v).sum();
            if c < cost {
                let rel = (cost - c) / cost.max(1e-300);
                q = cand;
                cost = c;
                core::mem::swap(&mut r, &mut rp);
                lambda = (lambda * 0.3).max(1e-12);
                improved = rel > 1e-12;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let (mut a, mut b, mut t) = (q[2], q[3], rad_to_deg(q[4]));
    if b > a {
        core::mem::swap(&mut a, &mut b);
        t += 90.0;
    }
    EllipseFit {
        center: [q[0], q[1]],
        a,
        b,
        theta_deg: wrap_theta(t),
    }
}

trait ToRadians {
    fn to_radians_libm(self) -> f64;
}

impl ToRadians for f64 {
    fn to_radians_libm(self) -> f64 {
        crate::math::deg_to_rad(self)
    }
}
