//! Zero-padded linear convolution through rustfft.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Smallest 5-smooth integer >= n.
pub fn fft_size(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut p5 = 1usize;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut m = p35;
            while m < n {
                m *= 2;
            }
            best = best.min(m);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

pub struct Transform {
    pub len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Transform {
    pub fn new(min_len: usize) -> Self {
        let len = fft_size(min_len);
        let mut planner = FftPlanner::new();
        Self { len, forward: planner.plan_fft_forward(len), inverse: planner.plan_fft_inverse(len) }
    }

    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex<f64>> {
        assert!(x.len() <= self.len);
        let mut buf = vec![Complex::new(0.0, 0.0); self.len];
        for (b, v) in buf.iter_mut().zip(x) {
            b.re = *v;
        }
        self.forward.process(&mut buf);
        buf
    }

    /// Inverse transform, scaled so that `inverse(forward(x)) == x`; real part only.
    pub fn inverse_real(&self, mut spec: Vec<Complex<f64>>) -> Vec<f64> {
        self.inverse.process(&mut spec);
        let s = 1.0 / self.len as f64;
        spec.into_iter().map(|c| c.re * s).collect()
    }
}

/// Full linear self-convolution `a * a`, length `2 len(a) - 1`.
pub fn self_convolve(a: &[f64]) -> Vec<f64> {
    let n = 2 * a.len() - 1;
    let t = Transform::new(n);
    let spec: Vec<_> = t.forward_real(a).into_iter().map(|z| z * z).collect();
    let mut out = t.inverse_real(spec);
    out.truncate(n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_are_smooth_and_minimal() {
        assert_eq!(fft_size(1), 1);
        assert_eq!(fft_size(7), 8);
        assert_eq!(fft_size(11), 12);
        assert_eq!(fft_size(198_001), 200_000);
        for n in 1..500 {
            let s = fft_size(n);
            assert!(s >= n);
            let mut r = s;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            assert_eq!(r, 1);
        }
    }

    #[test]
    fn matches_direct_convolution() {
        let a = [1.0, 2.0, 0.5, 0.0, 3.0];
        let c = self_convolve(&a);
        for (j, cj) in c.iter().enumerate() {
            let direct: f64 = (0..a.len())
                .filter(|&i| j >= i && j - i < a.len())
                .map(|i| a[i] * a[j - i])
                .sum();
            assert!((cj - direct).abs() < 1e-12);
        }
    }
}
