//! Float functions routed through `libm` so results are identical with and
//! without `std`.

pub use libm::{atan2, ceil, cos, exp, floor, log as ln, round, sin, sqrt};

pub const PI: f64 = core::f64::consts::PI;

#[inline]
pub fn deg_to_rad(d: f64) -> f64 {
    d * (PI / 180.0)
}

#[inline]
pub fn rad_to_deg(r: f64) -> f64 {
    r * (180.0 / PI)
}

#[inline]
pub fn hypot(a: f64, b: f64) -> f64 {
    libm::hypot(a, b)
}

/// Linear-interpolated quantile (type 7) of unsorted data. Returns NaN for
/// empty input.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = alloc::vec::Vec::from(values);
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = floor(pos) as usize;
    let hi = ceil(pos) as usize;
    let frac = pos - lo as f64;
    v[lo] + (v[hi] - v[lo]) * frac
}
