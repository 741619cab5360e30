//! Evaluation of finite Fourier sums on the uniform torus grid.
//!
//! `theta_m = -pi + 2 pi m / G`. For power-of-two `G` the sums go through an
//! iterative radix-2 transform, otherwise they are evaluated directly.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

pub(crate) fn theta(m: usize, grid_size: usize) -> f64 {
    -PI + 2.0 * PI * m as f64 / grid_size as f64
}

/// `S_m = sum_j c_j exp(i * sign * j * theta_m)` for `j = offset + t`.
pub(crate) fn torus_sum(offset: i64, coeffs: &[f64], sign: i32, grid_size: usize) -> Vec<Complex64> {
    debug_assert!(sign == 1 || sign == -1);
    if grid_size.is_power_of_two() && grid_size >= 2 {
        // exp(i s j theta_m) = (-1)^j * exp(2 pi i (s j mod G) m / G)
        let g = grid_size as i64;
        let mut buf = vec![Complex64::new(0.0, 0.0); grid_size];
        for (t, &c) in coeffs.iter().enumerate() {
            let j = offset + t as i64;
            let parity = if j.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let bucket = (sign as i64 * j).rem_euclid(g) as usize;
            buf[bucket].re += parity * c;
        }
        transform(&mut buf, 1);
        buf
    } else {
        (0..grid_size)
            .map(|m| {
                let th = theta(m, grid_size);
                coeffs.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (t, &c)| {
                    let arg = sign as f64 * (offset + t as i64) as f64 * th;
                    acc + Complex64::new(c * libm::cos(arg), c * libm::sin(arg))
                })
            })
            .collect()
    }
}

/// In-place unnormalized DFT `X_m = sum_b x_b exp(sign * 2 pi i b m / N)`, `N` a power of two.
pub(crate) fn transform(buf: &mut [Complex64], sign: i32) {
    let n = buf.len();
    assert!(n.is_power_of_two());
    if n < 2 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|k| {
            let a = sign as f64 * 2.0 * PI * k as f64 / n as f64;
            Complex64::new(libm::cos(a), libm::sin(a))
        })
        .collect();
    let mut len = 2;
    while len <= n {
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..len / 2 {
                let w = twiddles[k * stride];
                let u = buf[start + k];
                let v = buf[start + k + len / 2] * w;
                buf[start + k] = u + v;
                buf[start + k + len / 2] = u - v;
            }
        }
        len <<= 1;
    }
}

/// Linear autocorrelation `c_d = sum_k x_k x_{k+d}` for `d = 0..len`.
pub(crate) fn autocorrelation(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(size, Complex64::new(0.0, 0.0));
    transform(&mut buf, -1);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    transform(&mut buf, 1);
    let scale = 1.0 / size as f64;
    buf.iter().take(n).map(|v| v.re * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(offset: i64, coeffs: &[f64], sign: i32, g: usize) -> Vec<Complex64> {
        (0..g)
            .map(|m| {
                let th = theta(m, g);
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, &c) in coeffs.iter().enumerate() {
                    let a = sign as f64 * (offset + t as i64) as f64 * th;
                    acc += Complex64::new(c * libm::cos(a), c * libm::sin(a));
                }
                acc
            })
            .collect()
    }

    #[test]
    fn radix2_matches_direct_sum() {
        let coeffs = [0.3, -1.2, 2.0, 0.7, 0.0, 1.1, -0.4];
        for &(offset, sign) in &[(-3i64, 1), (1, -1), (5, 1), (-40, -1)] {
            let fast = torus_sum(offset, &coeffs, sign, 64);
            let slow = direct(offset, &coeffs, sign, 64);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn aliased_indices_still_exact_on_grid() {
        let coeffs: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let fast = torus_sum(0, &coeffs, 1, 8);
        let slow = direct(0, &coeffs, 1, 8);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-11);
        }
    }

    #[test]
    fn autocorrelation_matches_brute_force() {
        let x = [1.0, 2.0, 3.0, -1.5, 0.25];
        let c = autocorrelation(&x);
        for d in 0..x.len() {
            let brute: f64 = (0..x.len() - d).map(|k| x[k] * x[k + d]).sum();
            assert!((c[d] - brute).abs() < 1e-12);
        }
    }
}
