//! Radix-2 complex FFT along arbitrary axes of a row-major array.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64 as C64;
#[allow(unused_imports)]
use num_traits::Float;

/// Precomputed twiddles and bit reversal for one power-of-two length.
#[derive(Clone, Debug)]
pub struct Radix2 {
    n: usize,
    twiddles: Vec<C64>,
    rev: Vec<usize>,
}

impl Radix2 {
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT length must be a power of two");
        let bits = n.trailing_zeros();
        let rev = (0..n)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                C64::new(a.cos(), a.sin())
            })
            .collect();
        Self { n, twiddles, rev }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized transform: forward uses e^{-2πi jk/N}, inverse e^{+2πi jk/N}.
    pub fn process(&self, data: &mut [C64], inverse: bool) {
        let n = self.n;
        debug_assert_eq!(data.len(), n);
        for i in 0..n {
            let j = self.rev[i];
            if j > i {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let step = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * step];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

/// Row-major strides for `sizes`.
pub fn strides(sizes: &[usize]) -> Vec<usize> {
    let mut s = alloc::vec![1usize; sizes.len()];
    for a in (0..sizes.len().saturating_sub(1)).rev() {
        s[a] = s[a + 1] * sizes[a + 1];
    }
    s
}

/// Apply `f` to every 1-D lane of `data` along `axis`.
pub fn for_each_lane(
    data: &mut [C64],
    sizes: &[usize],
    axis: usize,
    mut f: impl FnMut(&mut [C64]),
) {
    let st = strides(sizes);
    let n = sizes[axis];
    let stride = st[axis];
    let total: usize = sizes.iter().product();
    let outer = total / (n * stride);
    let mut lane = alloc::vec![C64::new(0.0, 0.0); n];
    for o in 0..outer {
        for inner in 0..stride {
            let base = o * n * stride + inner;
            for j in 0..n {
                lane[j] = data[base + j * stride];
            }
            f(&mut lane);
            for j in 0..n {
                data[base + j * stride] = lane[j];
            }
        }
    }
}

/// Unnormalized FFT along each listed axis.
pub fn fft_axes(data: &mut [C64], sizes: &[usize], axes: &[usize], inverse: bool) {
    for &axis in axes {
        let plan = Radix2::new(sizes[axis]);
        for_each_lane(data, sizes, axis, |lane| plan.process(lane, inverse));
    }
}

/// Signed DFT wavenumber index for bin `m` of an `n`-point transform.
pub fn signed_index(m: usize, n: usize) -> i64 {
    if m < n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[C64]) -> Vec<C64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(C64::new(0.0, 0.0), |acc, (j, v)| {
                    let a = -2.0 * PI * (j * k) as f64 / n as f64;
                    acc + v * C64::new(a.cos(), a.sin())
                })
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        let x: Vec<C64> = (0..16).map(|j| C64::new((j as f64).sin(), 0.3 * j as f64)).collect();
        let mut y = x.clone();
        Radix2::new(16).process(&mut y, false);
        for (a, b) in y.iter().zip(naive(&x)) {
            assert!((a - b).norm() < 1e-12);
        }
        Radix2::new(16).process(&mut y, true);
        for (a, b) in y.iter().zip(&x) {
            assert!((a / 16.0 - b).norm() < 1e-14);
        }
    }

    #[test]
    fn axis_transform_2d() {
        let sizes = [8, 16];
        let data: Vec<C64> = (0..128).map(|j| C64::new(1.0 / (1.0 + j as f64), 0.0)).collect();
        let mut a = data.clone();
        fft_axes(&mut a, &sizes, &[1], false);
        for row in 0..8 {
            let want = naive(&data[row * 16..(row + 1) * 16]);
            for (k, w) in want.iter().enumerate() {
                assert!((a[row * 16 + k] - w).norm() < 1e-12);
            }
        }
    }
}
