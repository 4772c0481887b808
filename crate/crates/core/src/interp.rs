//! Band-limited (trigonometric) interpolation and spectral derivatives on periodic grids.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64 as C64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::fft::{fft_axes, signed_index};
use crate::grid::{separable_sum, Grid};

/// Trigonometric interpolant of samples on a periodic grid.
///
/// The Nyquist mode is split symmetrically into a cosine so that real data
/// interpolate to real values. Points outside the box evaluate to zero.
#[derive(Clone, Debug)]
pub struct TrigInterpolator {
    grid: Grid,
    values: Vec<C64>,
    coeffs: Vec<C64>,
}

impl TrigInterpolator {
    pub fn new(grid: &Grid, values: &[C64]) -> Self {
        let mut coeffs = values.to_vec();
        let axes: Vec<usize> = (0..grid.dim()).collect();
        fft_axes(&mut coeffs, grid.sizes(), &axes, false);
        let scale = 1.0 / grid.len() as f64;
        for c in &mut coeffs {
            *c *= scale;
        }
        Self { grid: grid.clone(), values: values.to_vec(), coeffs }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        let g = &self.grid;
        debug_assert_eq!(x.len(), g.dim());
        let mut on_node = true;
        let mut node_index = 0usize;
        for (a, &xa) in x.iter().enumerate() {
            let l = g.half_width(a);
            if !(xa >= -l - 1e-12 * l && xa <= l + 1e-12 * l) {
                return C64::new(0.0, 0.0);
            }
            let s = (xa + l) / g.spacing(a);
            let j = s.round();
            if (s - j).abs() > 1e-10 {
                on_node = false;
            } else {
                let j = (j as usize) % g.size(a);
                node_index = node_index * g.size(a) + j;
            }
        }
        if on_node {
            return self.values[node_index];
        }
        let factors: Vec<Vec<C64>> = (0..g.dim())
            .map(|a| {
                let n = g.size(a);
                let s = (x[a] + g.half_width(a)) / (2.0 * g.half_width(a));
                let w = C64::from_polar(1.0, 2.0 * PI * s);
                let mut f = vec![C64::new(0.0, 0.0); n];
                let mut p = C64::new(1.0, 0.0);
                for k in 0..n / 2 {
                    f[k] = p;
                    if k > 0 {
                        f[n - k] = p.conj();
                    }
                    // Renormalize to keep |w^k| = 1 over long recurrences.
                    p *= w;
                    if k % 64 == 63 {
                        p = C64::from_polar(1.0, 2.0 * PI * s * (k + 1) as f64);
                    }
                }
                f[n / 2] = C64::new((PI * n as f64 * s).cos(), 0.0);
                f
            })
            .collect();
        separable_sum(&self.coeffs, g.sizes(), &factors)
    }
}

/// Spectral derivative of order `order` along `axis` (Nyquist mode dropped for odd orders).
pub fn spectral_derivative(grid: &Grid, values: &[C64], axis: usize, order: u32) -> Vec<C64> {
    if order == 0 {
        return values.to_vec();
    }
    let mut data = values.to_vec();
    let sizes = grid.sizes();
    let n = sizes[axis];
    let l = grid.half_width(axis);
    let mult: Vec<C64> = (0..n)
        .map(|m| {
            if m == n / 2 && order % 2 == 1 {
                return C64::new(0.0, 0.0);
            }
            let k = PI * signed_index(m, n) as f64 / l;
            let k = if m == n / 2 { PI * (n / 2) as f64 / l } else { k };
            C64::new(0.0, k).powu(order) / n as f64
        })
        .collect();
    fft_axes(&mut data, sizes, &[axis], false);
    crate::fft::for_each_lane(&mut data, sizes, axis, |lane| {
        for (v, m) in lane.iter_mut().zip(&mult) {
            *v *= m;
        }
    });
    fft_axes(&mut data, sizes, &[axis], true);
    data
}

/// Spectral Laplacian-type multiplier sum over all axes: returns Σ_a ∂²_a values.
pub fn spectral_laplacian(grid: &Grid, values: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); values.len()];
    for a in 0..grid.dim() {
        let d = spectral_derivative(grid, values, a, 2);
        for (o, v) in out.iter_mut().zip(d) {
            *o += v;
        }
    }
    out
}
