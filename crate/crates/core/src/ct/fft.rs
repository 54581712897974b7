//! Iterative radix-2 FFT. Only power-of-two lengths are needed here.

use crate::math::{cos, sin, PI};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const fn new(re: f64, im: f64) -> Self {
        Complex { re, im }
    }

    #[inline]
    fn mul(self, o: Complex) -> Complex {
        Complex::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

/// In-place transform; `inverse` applies the `1/n` scaling.
///
/// # Panics
/// If `data.len()` is not a power of two.
pub fn fft_in_place(data: &mut [Complex], inverse: bool) {
    let n = data.len();
    assert!(n.is_power_of_two(), "FFT length {n} is not a power of two");
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let half = len / 2;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = Complex::new(cos(ang * k as f64), sin(ang * k as f64));
                let a = data[start + k];
                let b = data[start + k + half].mul(w);
                data[start + k] = Complex::new(a.re + b.re, a.im + b.im);
                data[start + k + half] = Complex::new(a.re - b.re, a.im - b.im);
            }
        }
        len *= 2;
    }
    if inverse {
        let s = 1.0 / n as f64;
        for v in data.iter_mut() {
            v.re *= s;
            v.im *= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn naive_dft(x: &[Complex]) -> Vec<Complex> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex::default(), |acc, (j, v)| {
                    let a = -2.0 * PI * (k * j) as f64 / n as f64;
                    let w = Complex::new(cos(a), sin(a));
                    let p = v.mul(w);
                    Complex::new(acc.re + p.re, acc.im + p.im)
                })
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_and_inverts() {
        let x: Vec<Complex> = (0..16)
            .map(|i| Complex::new(sin(i as f64 * 0.7) + 0.1 * i as f64, cos(i as f64)))
            .collect();
        let mut y = x.clone();
        fft_in_place(&mut y, false);
        for (a, b) in y.iter().zip(naive_dft(&x)) {
            assert!((a.re - b.re).abs() < 1e-10 && (a.im - b.im).abs() < 1e-10);
        }
        fft_in_place(&mut y, true);
        for (a, b) in y.iter().zip(&x) {
            assert!((a.re - b.re).abs() < 1e-12 && (a.im - b.im).abs() < 1e-12);
        }
    }

    #[test]
    #[should_panic]
    fn rejects_non_power_of_two() {
        fft_in_place(&mut [Complex::default(); 6], false);
    }
}
