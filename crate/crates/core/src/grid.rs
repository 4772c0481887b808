//! Periodic box grids, sampled fields, the semiclassical Fourier transform
//! and coherent-state (Husimi) densities.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64 as C64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fft::{fft_axes, for_each_lane, signed_index};

/// Relative spectral mass threshold above which transforms log an aliasing warning.
pub const ALIASING_WARN: f64 = 1e-8;

/// A uniform periodic grid on the box Π[−L_i, L_i).
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    half_widths: Vec<f64>,
    sizes: Vec<usize>,
}

/// Construct a grid; see [`Grid::new`].
pub fn make_grid(half_widths: &[f64], sizes: &[usize]) -> Result<Grid> {
    Grid::new(half_widths, sizes)
}

impl Grid {
    pub fn new(half_widths: &[f64], sizes: &[usize]) -> Result<Self> {
        if half_widths.len() != sizes.len() || sizes.is_empty() {
            return Err(Error::Dimension(format!(
                "{} half-widths for {} sizes",
                half_widths.len(),
                sizes.len()
            )));
        }
        for (axis, &size) in sizes.iter().enumerate() {
            if size < 8 || !size.is_power_of_two() {
                return Err(Error::BadGridSize { axis, size });
            }
        }
        for (axis, &width) in half_widths.iter().enumerate() {
            if !(width > 0.0 && width.is_finite()) {
                return Err(Error::BadHalfWidth { axis, width });
            }
        }
        Ok(Self { half_widths: half_widths.to_vec(), sizes: sizes.to_vec() })
    }

    /// Square grid with the same half-width and size on every axis.
    pub fn cube(dim: usize, half_width: f64, size: usize) -> Result<Self> {
        Self::new(&vec![half_width; dim], &vec![size; dim])
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }
    pub fn half_widths(&self) -> &[f64] {
        &self.half_widths
    }
    pub fn size(&self, axis: usize) -> usize {
        self.sizes[axis]
    }
    pub fn half_width(&self, axis: usize) -> f64 {
        self.half_widths[axis]
    }
    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.half_widths[axis] / self.sizes[axis] as f64
    }
    pub fn node(&self, axis: usize, m: usize) -> f64 {
        -self.half_widths[axis] + m as f64 * self.spacing(axis)
    }
    pub fn nodes(&self, axis: usize) -> Vec<f64> {
        (0..self.sizes[axis]).map(|m| self.node(axis, m)).collect()
    }
    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Multi-index of a flat (row-major) node index.
    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.dim()).rev() {
            out[a] = flat % self.sizes[a];
            flat /= self.sizes[a];
        }
    }

    /// Coordinates of a flat node index.
    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut rest = flat;
        for a in (0..self.dim()).rev() {
            let m = rest % self.sizes[a];
            rest /= self.sizes[a];
            out[a] = self.node(a, m);
        }
    }

    /// Coordinates of every node, row-major.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut p = vec![0.0; self.dim()];
        (0..self.len())
            .map(|j| {
                self.point(j, &mut p);
                p.clone()
            })
            .collect()
    }

    /// Largest momentum resolved on `axis`: πℏN/(2L).
    pub fn nyquist_momentum(&self, axis: usize, hbar: f64) -> f64 {
        PI * hbar * self.sizes[axis] as f64 / (2.0 * self.half_widths[axis])
    }

    /// The momentum grid carrying semiclassical Fourier transforms at `hbar`.
    pub fn dual(&self, hbar: f64) -> Grid {
        self.dual_axes(hbar, &(0..self.dim()).collect::<Vec<_>>())
    }

    /// Dual grid with only the listed axes transformed.
    pub fn dual_axes(&self, hbar: f64, axes: &[usize]) -> Grid {
        let mut g = self.clone();
        for &a in axes {
            g.half_widths[a] = self.nyquist_momentum(a, hbar);
        }
        g
    }

    /// Half-width of the grid that is its own dual at `hbar`.
    pub fn self_dual_half_width(size: usize, hbar: f64) -> f64 {
        (PI * hbar * size as f64 / 2.0).sqrt()
    }

    /// Sub-grid made from the listed axes.
    pub fn sub_grid(&self, axes: &[usize]) -> Grid {
        Grid {
            half_widths: axes.iter().map(|&a| self.half_widths[a]).collect(),
            sizes: axes.iter().map(|&a| self.sizes[a]).collect(),
        }
    }

    /// Cartesian product `self × other`.
    pub fn product(&self, other: &Grid) -> Grid {
        let mut g = self.clone();
        g.half_widths.extend_from_slice(&other.half_widths);
        g.sizes.extend_from_slice(&other.sizes);
        g
    }

    /// Same sizes and half-widths up to relative rounding.
    pub fn compatible(&self, other: &Grid) -> bool {
        self.sizes == other.sizes
            && self
                .half_widths
                .iter()
                .zip(&other.half_widths)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()))
    }
}

/// Σ_m values[m]·Π_a factors[a][m_a], contracting the last axis first.
pub(crate) fn separable_sum(values: &[C64], sizes: &[usize], factors: &[Vec<C64>]) -> C64 {
    let mut cur: Vec<C64> = values.to_vec();
    for a in (0..sizes.len()).rev() {
        let n = sizes[a];
        let outer = cur.len() / n;
        let f = &factors[a];
        cur = (0..outer)
            .map(|o| cur[o * n..(o + 1) * n].iter().zip(f).fold(C64::new(0.0, 0.0), |s, (v, w)| s + v * w))
            .collect();
    }
    cur[0]
}

/// Complex samples on a grid together with the ℏ they were built at.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    hbar: f64,
    values: Vec<C64>,
}

impl Field {
    pub fn new(grid: Grid, hbar: f64, values: Vec<C64>) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidArgument(format!("hbar = {hbar}")));
        }
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(format!("field node {j}")));
        }
        Ok(Self { grid, hbar, values })
    }

    pub fn zeros(grid: Grid, hbar: f64) -> Self {
        let n = grid.len();
        Self { grid, hbar, values: vec![C64::new(0.0, 0.0); n] }
    }

    /// Sample `f` at every node.
    pub fn from_fn(grid: Grid, hbar: f64, mut f: impl FnMut(&[f64]) -> C64) -> Result<Self> {
        let mut p = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|j| {
                grid.point(j, &mut p);
                f(&p)
            })
            .collect();
        Self::new(grid, hbar, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn hbar(&self) -> f64 {
        self.hbar
    }
    pub fn values(&self) -> &[C64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    /// Replace the values, keeping grid and ℏ.
    pub fn with_values(&self, values: Vec<C64>) -> Result<Self> {
        Self::new(self.grid.clone(), self.hbar, values)
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self { grid: self.grid.clone(), hbar: self.hbar, values: self.values.iter().map(|v| v * s).collect() }
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: C64, other: &Field) -> Result<Self> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        Ok(Self { grid: self.grid.clone(), hbar: self.hbar, values })
    }

    pub fn check_same(&self, other: &Field) -> Result<()> {
        if !self.grid.compatible(&other.grid) || (self.hbar - other.hbar).abs() > 1e-15 * self.hbar {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    /// Relative spectral mass in the outer sixteenth of the frequency band on any axis.
    pub fn nyquist_fraction(&self) -> f64 {
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let mut spec = self.values.clone();
        let axes: Vec<usize> = (0..self.grid.dim()).collect();
        fft_axes(&mut spec, self.grid.sizes(), &axes, false);
        let spec_total: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
        let mut idx = vec![0usize; self.grid.dim()];
        let mut outer = 0.0;
        for (j, v) in spec.iter().enumerate() {
            self.grid.multi_index(j, &mut idx);
            let shell = idx.iter().enumerate().any(|(a, &m)| {
                let n = self.grid.size(a) as i64;
                signed_index(m, n as usize).abs() >= n / 2 - n / 32
            });
            if shell {
                outer += v.norm_sqr();
            }
        }
        outer / spec_total
    }

    /// Relative mass at nodes within the outer sixteenth of the box on any axis.
    pub fn boundary_fraction(&self) -> f64 {
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let mut idx = vec![0usize; self.grid.dim()];
        let mut edge = 0.0;
        for (j, v) in self.values.iter().enumerate() {
            self.grid.multi_index(j, &mut idx);
            let near = idx.iter().enumerate().any(|(a, &m)| {
                let n = self.grid.size(a);
                let band = (n / 32).max(1);
                m < band || m >= n - band
            });
            if near {
                edge += v.norm_sqr();
            }
        }
        edge / total
    }
}

/// ⟨f, g⟩ = Σ conj(f)·g·ΔV.
pub fn inner_product(f: &Field, g: &Field) -> Result<C64> {
    f.check_same(g)?;
    let s = f.values.iter().zip(&g.values).fold(C64::new(0.0, 0.0), |s, (a, b)| s + a.conj() * b);
    Ok(s * f.grid.cell_volume())
}

/// Unitary semiclassical Fourier transform over all axes.
pub fn semiclassical_fourier(f: &Field, sign: i32) -> Result<Field> {
    let axes: Vec<usize> = (0..f.grid.dim()).collect();
    semiclassical_fourier_axes(f, sign, &axes)
}

/// (2πℏ)^{-m/2}∫e^{−i·sign·x·ξ/ℏ}f dx over the listed axes; output on the dual grid.
pub fn semiclassical_fourier_axes(f: &Field, sign: i32, axes: &[usize]) -> Result<Field> {
    if sign != 1 && sign != -1 {
        return Err(Error::InvalidArgument(format!("Fourier sign {sign}")));
    }
    for &a in axes {
        if a >= f.grid.dim() {
            return Err(Error::InvalidArgument(format!("axis {a} out of range")));
        }
    }
    let frac = f.nyquist_fraction();
    if frac > ALIASING_WARN {
        log::warn!("semiclassical Fourier: Nyquist-shell mass {frac:.3e}");
    }
    let mut data = f.values.clone();
    let sizes = f.grid.sizes().to_vec();
    for &a in axes {
        let c = f.grid.spacing(a) / (2.0 * PI * f.hbar).sqrt();
        for_each_lane(&mut data, &sizes, a, |lane| {
            for (j, v) in lane.iter_mut().enumerate() {
                if j % 2 == 1 {
                    *v = -*v;
                }
            }
        });
        fft_axes(&mut data, &sizes, &[a], sign == -1);
        let half = sizes[a] / 2;
        for_each_lane(&mut data, &sizes, a, |lane| {
            for (m, v) in lane.iter_mut().enumerate() {
                let s = if (m + half) % 2 == 1 { -c } else { c };
                *v *= s;
            }
        });
    }
    Ok(Field { grid: f.grid.dual_axes(f.hbar, axes), hbar: f.hbar, values: data })
}

/// A point (x, ξ) of phase space T*ℝⁿ.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        if x.len() != xi.len() {
            return Err(Error::Dimension("position and momentum lengths differ".to_string()));
        }
        if x.iter().chain(&xi).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("phase point".to_string()));
        }
        Ok(Self { x, xi })
    }
    pub fn origin(n: usize) -> Self {
        Self { x: vec![0.0; n], xi: vec![0.0; n] }
    }
    pub fn dim(&self) -> usize {
        self.x.len()
    }
    pub fn distance(&self, other: &PhasePoint) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .chain(self.xi.iter().zip(&other.xi))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Per-axis factors of the standard coherent state at `z`.
fn coherent_factors(grid: &Grid, hbar: f64, z: &PhasePoint) -> Vec<Vec<C64>> {
    let norm = (PI * hbar).powf(-0.25);
    (0..grid.dim())
        .map(|a| {
            grid.nodes(a)
                .iter()
                .map(|&x| {
                    let d = x - z.x[a];
                    C64::from_polar(norm * (-d * d / (2.0 * hbar)).exp(), z.xi[a] * d / hbar)
                })
                .collect()
        })
        .collect()
}

/// The coherent state (πℏ)^{-n/4}e^{iξ_z·(x−x_z)/ℏ}e^{−|x−x_z|²/2ℏ} sampled on `grid`.
pub fn coherent_state(grid: &Grid, hbar: f64, z: &PhasePoint) -> Result<Field> {
    if z.dim() != grid.dim() {
        return Err(Error::Dimension("phase point does not match grid".to_string()));
    }
    let fac = coherent_factors(grid, hbar, z);
    let mut idx = vec![0usize; grid.dim()];
    let values = (0..grid.len())
        .map(|j| {
            grid.multi_index(j, &mut idx);
            idx.iter().enumerate().fold(C64::new(1.0, 0.0), |p, (a, &m)| p * fac[a][m])
        })
        .collect();
    Field::new(grid.clone(), hbar, values)
}

/// |⟨f, g_z⟩|².
pub fn husimi_transform(f: &Field, z: &PhasePoint) -> Result<f64> {
    if z.dim() != f.grid.dim() {
        return Err(Error::Dimension("phase point does not match grid".to_string()));
    }
    let fac: Vec<Vec<C64>> = coherent_factors(&f.grid, f.hbar, z)
        .into_iter()
        .map(|v| v.into_iter().map(|c| c.conj()).collect())
        .collect();
    let s = separable_sum(&f.values, f.grid.sizes(), &fac) * f.grid.cell_volume();
    Ok(s.norm_sqr())
}

/// Husimi density sampled on a position sub-lattice times a momentum sub-lattice.
#[derive(Clone, Debug)]
pub struct HusimiLattice {
    /// Lattice positions, one coordinate vector each.
    pub positions: Vec<Vec<f64>>,
    /// Lattice momenta, one coordinate vector each.
    pub momenta: Vec<Vec<f64>>,
    /// `density[p][q]` is the Husimi value at (positions[p], momenta[q]).
    pub density: Vec<Vec<f64>>,
    /// Phase-space volume represented by one lattice sample.
    pub cell: f64,
    pub hbar: f64,
}

impl HusimiLattice {
    /// Riemann sum (2πℏ)^{-n}·Σ Q·cell, which approximates ‖f‖².
    pub fn total_mass(&self) -> f64 {
        let n = self.positions.first().map_or(0, |p| p.len()) as i32;
        let s: f64 = self.density.iter().flatten().sum();
        s * self.cell / (2.0 * PI * self.hbar).powi(n)
    }

    /// Mass restricted to samples where `keep(x, ξ)` holds.
    pub fn mass_where(&self, mut keep: impl FnMut(&[f64], &[f64]) -> bool) -> f64 {
        let n = self.positions.first().map_or(0, |p| p.len()) as i32;
        let mut s = 0.0;
        for (p, row) in self.positions.iter().zip(&self.density) {
            for (q, v) in self.momenta.iter().zip(row) {
                if keep(p, q) {
                    s += v;
                }
            }
        }
        s * self.cell / (2.0 * PI * self.hbar).powi(n)
    }

    /// Lattice sample with the largest density.
    pub fn peak(&self) -> PhasePoint {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (p, row) in self.density.iter().enumerate() {
            for (q, &v) in row.iter().enumerate() {
                if v > best.2 {
                    best = (p, q, v);
                }
            }
        }
        PhasePoint { x: self.positions[best.0].clone(), xi: self.momenta[best.1].clone() }
    }
}

/// Husimi density on every `x_stride`-th node in position and every `xi_stride`-th
/// node of the dual lattice in momentum, by windowed FFTs.
pub fn husimi_lattice(f: &Field, x_stride: usize, xi_stride: usize) -> Result<HusimiLattice> {
    if x_stride == 0 || xi_stride == 0 {
        return Err(Error::InvalidArgument("lattice strides must be positive".to_string()));
    }
    let g = &f.grid;
    let n = g.dim();
    let hbar = f.hbar;
    let pos_grid = Grid {
        half_widths: g.half_widths.clone(),
        sizes: g.sizes.iter().map(|&s| (s / x_stride).max(1)).collect(),
    };
    let dual = g.dual(hbar);
    let mom_sizes: Vec<usize> = g.sizes.iter().map(|&s| (s / xi_stride).max(1)).collect();
    let n_pos: usize = pos_grid.sizes.iter().product();
    let n_mom: usize = mom_sizes.iter().product();
    let mut idx = vec![0usize; n];
    let mut positions = Vec::with_capacity(n_pos);
    for j in 0..n_pos {
        let mut r = j;
        let mut p = vec![0.0; n];
        for a in (0..n).rev() {
            let m = r % pos_grid.sizes[a];
            r /= pos_grid.sizes[a];
            p[a] = g.node(a, m * x_stride);
        }
        positions.push(p);
    }
    let mut mom_flat = Vec::with_capacity(n_mom);
    let mut momenta = Vec::with_capacity(n_mom);
    for j in 0..n_mom {
        let mut r = j;
        let mut q = vec![0.0; n];
        let mut flat = 0usize;
        let mut mi = vec![0usize; n];
        for a in (0..n).rev() {
            let m = r % mom_sizes[a];
            r /= mom_sizes[a];
            mi[a] = m * xi_stride;
            q[a] = dual.node(a, mi[a]);
        }
        for (&s, &m) in g.sizes.iter().zip(&mi) {
            flat = flat * s + m;
        }
        mom_flat.push(flat);
        momenta.push(q);
    }
    let pref = 2f64.powi(n as i32) * (PI * hbar).powf(n as f64 / 2.0);
    let mut density = Vec::with_capacity(n_pos);
    for xz in &positions {
        let win: Vec<Vec<f64>> = (0..n)
            .map(|a| g.nodes(a).iter().map(|&x| (-(x - xz[a]) * (x - xz[a]) / (2.0 * hbar)).exp()).collect())
            .collect();
        let vals: Vec<C64> = f
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| {
                g.multi_index(j, &mut idx);
                let w: f64 = idx.iter().enumerate().map(|(a, &m)| win[a][m]).product();
                v * w
            })
            .collect();
        let wf = Field { grid: g.clone(), hbar, values: vals };
        let ft = semiclassical_fourier_quiet(&wf, 1);
        density.push(mom_flat.iter().map(|&k| pref * ft[k].norm_sqr()).collect());
    }
    let cell: f64 = (0..n)
        .map(|a| g.spacing(a) * x_stride as f64 * dual.spacing(a) * xi_stride as f64)
        .product();
    Ok(HusimiLattice { positions, momenta, density, cell, hbar })
}

/// Full transform without the aliasing diagnostic (used on windowed pieces).
pub(crate) fn semiclassical_fourier_quiet(f: &Field, sign: i32) -> Vec<C64> {
    let mut data = f.values.clone();
    let sizes = f.grid.sizes().to_vec();
    for a in 0..sizes.len() {
        let c = f.grid.spacing(a) / (2.0 * PI * f.hbar).sqrt();
        for_each_lane(&mut data, &sizes, a, |lane| {
            for (j, v) in lane.iter_mut().enumerate() {
                if j % 2 == 1 {
                    *v = -*v;
                }
            }
        });
        fft_axes(&mut data, &sizes, &[a], sign == -1);
        let half = sizes[a] / 2;
        for_each_lane(&mut data, &sizes, a, |lane| {
            for (m, v) in lane.iter_mut().enumerate() {
                *v *= if (m + half) % 2 == 1 { -c } else { c };
            }
        });
    }
    data
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(hbar: f64, l: f64, n: usize) -> Field {
        let g = Grid::new(&[l], &[n]).unwrap();
        Field::from_fn(g, hbar, |x| C64::new((-x[0] * x[0] / (2.0 * hbar)).exp() / (PI * hbar).powf(0.25), 0.0))
            .unwrap()
    }

    #[test]
    fn grid_examples() {
        let g = make_grid(&[8.0], &[256]).unwrap();
        assert_eq!(g.spacing(0), 0.0625);
        let g = make_grid(&[8.0, 8.0], &[128, 128]).unwrap();
        assert_eq!(g.spacing(1), 0.125);
        assert!(matches!(make_grid(&[8.0], &[100]), Err(Error::BadGridSize { .. })));
        assert!(matches!(make_grid(&[0.0], &[128]), Err(Error::BadHalfWidth { .. })));
        assert!(matches!(make_grid(&[1.0], &[4]), Err(Error::BadGridSize { .. })));
    }

    #[test]
    fn gaussian_norm_and_fourier_fixed_point() {
        let f = gaussian(0.01, 8.0, 1024);
        assert!((inner_product(&f, &f).unwrap().re - 1.0).abs() < 1e-10);
        let ff = semiclassical_fourier(&f, 1).unwrap();
        // Dual grid of this box is different; compare against the Gaussian sampled there.
        let want = Field::from_fn(ff.grid().clone(), 0.01, |x| {
            C64::new((-x[0] * x[0] / 0.02).exp() / (PI * 0.01).powf(0.25), 0.0)
        })
        .unwrap();
        let d = ff.axpy(C64::new(-1.0, 0.0), &want).unwrap().norm();
        assert!(d < 1e-8, "{d}");
        let back = semiclassical_fourier(&ff, -1).unwrap();
        assert!(back.grid().compatible(f.grid()));
        let err = back.values().iter().zip(f.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn mismatch_and_zero() {
        let f = gaussian(0.01, 8.0, 1024);
        let g = gaussian(0.01, 8.0, 512);
        assert_eq!(inner_product(&f, &g), Err(Error::GridMismatch));
        let z = Field::zeros(f.grid().clone(), 0.01);
        assert_eq!(inner_product(&z, &z).unwrap(), C64::new(0.0, 0.0));
        assert_eq!(husimi_transform(&z, &PhasePoint::origin(1)).unwrap(), 0.0);
    }

    #[test]
    fn plane_wave_peak() {
        let hbar = 0.01;
        let xi0 = 0.7;
        for &n in &[512usize, 1024, 2048] {
            let g = Grid::new(&[8.0], &[n]).unwrap();
            let f = Field::from_fn(g, hbar, |x| C64::from_polar((-x[0] * x[0] / 8.0).exp(), x[0] * xi0 / hbar)).unwrap();
            let ff = semiclassical_fourier(&f, 1).unwrap();
            let (m, _) = ff
                .values()
                .iter()
                .enumerate()
                .fold((0, 0.0), |b, (j, v)| if v.norm() > b.1 { (j, v.norm()) } else { b });
            let nodes = ff.grid().nodes(0);
            let nearest = nodes.iter().map(|q| (q - xi0).abs()).fold(f64::INFINITY, f64::min);
            assert!(((nodes[m] - xi0).abs() - nearest).abs() < 1e-12);
        }
    }

    #[test]
    fn husimi_examples() {
        let hbar = 0.01;
        let g = Grid::new(&[4.0], &[512]).unwrap();
        let z0 = PhasePoint::new(vec![0.3], vec![-0.2]).unwrap();
        let f = coherent_state(&g, hbar, &z0).unwrap();
        assert!((husimi_transform(&f, &z0).unwrap() - 1.0).abs() < 1e-8);
        let far = PhasePoint::new(vec![0.3 + 10.0 * hbar.sqrt()], vec![-0.2]).unwrap();
        assert!(husimi_transform(&f, &far).unwrap() <= (-25.0f64).exp() * 1.0001);
        let lat = husimi_lattice(&f, 4, 4).unwrap();
        assert!((lat.total_mass() - 1.0).abs() < 0.01, "{}", lat.total_mass());
        let pk = lat.peak();
        assert!(pk.distance(&z0) < 0.05);
    }
}
