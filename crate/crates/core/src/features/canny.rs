use alloc::collections::VecDeque;
use alloc::vec;

use crate::error::{ensure, invalid, Result};
use crate::math::{atan2, hypot, rad_to_deg};
use crate::raster::{clamp_index, gaussian_blur, Mask, Raster};

/// Gaussian smoothing, Sobel gradients, non-maximum suppression along the
/// quantized gradient direction and 8-connected hysteresis between `low`
/// and `high` on the gradient magnitude.
///
/// Along the gradient a pixel must strictly exceed its predecessor and
/// match or exceed its successor, so plateaus of equal magnitude keep a
/// single pixel.
pub fn canny(image: &Raster<f64>, sigma: f64, low: f64, high: f64) -> Result<Mask> {
    ensure!(
        0.0 <= low && low <= high,
        invalid(alloc::format!("need 0 <= low <= high, got {low}, {high}"))
    );
    let (w, h) = (image.width, image.height);
    let img = gaussian_blur(image, sigma);
    let at = |x: isize, y: isize| img.data[clamp_index(y, h) * w + clamp_index(x, w)];
    let mut mag = vec![0.0; w * h];
    let mut dir = vec![0u8; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = y as usize * w + x as usize;
            mag[i] = hypot(gx, gy);
            let mut ang = rad_to_deg(atan2(gy, gx));
            if ang < 0.0 {
                ang += 180.0;
            }
            dir[i] = if !(22.5..157.5).contains(&ang) {
                0
            } else if ang < 67.5 {
                1
            } else if ang < 112.5 {
                2
            } else {
                3
            };
        }
    }
    let m = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut strong = vec![false; w * h];
    let mut weak = vec![false; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let v = mag[i];
            if v < low || v == 0.0 {
                continue;
            }
            let (dx, dy) = match dir[i] {
                0 => (1, 0),
                1 => (1, 1),
                2 => (0, 1),
                _ => (-1, 1),
            };
            if v > m(x - dx, y - dy) && v >= m(x + dx, y + dy) {
                weak[i] = true;
                strong[i] = v >= high;
            }
        }
    }
    let mut edges = vec![false; w * h];
    let mut queue: VecDeque<usize> = (0..w * h).filter(|&i| strong[i]).collect();
    for &i in &queue {
        edges[i] = true;
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if weak[j] && !edges[j] {
                    edges[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    Raster::from_vec(w, h, edges)
}
