//! Model isotropic states ℏ^r Σ ℏ^{j/2} a_j(t, u/√ℏ) and their rescaled profiles.

use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use num_complex::Complex64 as C64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fft::for_each_lane;
use crate::grid::{semiclassical_fourier_axes, Field, Grid, PhasePoint};
use crate::interp::{spectral_derivative, TrigInterpolator};

/// Relative mass allowed at the box edge for built states.
pub const BOX_ESCAPE_TOL: f64 = 1e-10;

/// A half-integer, stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HalfInt(pub i32);

impl HalfInt {
    pub const ZERO: HalfInt = HalfInt(0);
    pub fn from_twice(twice: i32) -> Self {
        HalfInt(twice)
    }
    /// Nearest half-integer; errors if `v` is not one.
    pub fn from_f64(v: f64) -> Result<Self> {
        let t = (2.0 * v).round();
        if (2.0 * v - t).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("{v} is not a half-integer")));
        }
        Ok(HalfInt(t as i32))
    }
    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }
    pub fn twice(self) -> i32 {
        self.0
    }
}

impl core::ops::Add for HalfInt {
    type Output = HalfInt;
    fn add(self, o: HalfInt) -> HalfInt {
        HalfInt(self.0 + o.0)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

/// Splitting ℝⁿ = ℝᵏ_t × ℝˡ_u; the first k axes are t.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Splitting {
    pub k: usize,
    pub l: usize,
}

impl Splitting {
    pub fn new(k: usize, l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidArgument("splitting needs l >= 1".to_string()));
        }
        Ok(Self { k, l })
    }
    pub fn dim(&self) -> usize {
        self.k + self.l
    }
    pub fn t_axes(&self) -> core::ops::Range<usize> {
        0..self.k
    }
    pub fn u_axes(&self) -> core::ops::Range<usize> {
        self.k..self.k + self.l
    }
    fn check(&self, grid: &Grid) -> Result<()> {
        if grid.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "splitting ({}, {}) on a {}-dimensional grid",
                self.k,
                self.l,
                grid.dim()
            )));
        }
        Ok(())
    }
}

/// Samples of a Schwartz function on ℝˡ attached to a base point t_⋆.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub grid: Grid,
    pub values: Vec<C64>,
    pub base_point: Vec<f64>,
}

impl Profile {
    pub fn new(grid: Grid, values: Vec<C64>, base_point: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        if let Some(j) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(format!("profile node {j}")));
        }
        Ok(Self { grid, values, base_point })
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> C64) -> Self {
        let mut p = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|j| {
                grid.point(j, &mut p);
                f(&p)
            })
            .collect();
        Self { grid: grid.clone(), values, base_point: Vec::new() }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), values: vec![C64::new(0.0, 0.0); grid.len()], base_point: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn inner(&self, other: &Profile) -> C64 {
        self.values.iter().zip(&other.values).fold(C64::new(0.0, 0.0), |s, (a, b)| s + a.conj() * b)
            * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn map(&self, mut f: impl FnMut(&[f64], C64) -> C64) -> Profile {
        let mut p = vec![0.0; self.dim()];
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                self.grid.point(j, &mut p);
                f(&p, v)
            })
            .collect();
        Profile { grid: self.grid.clone(), values, base_point: self.base_point.clone() }
    }

    pub fn scaled(&self, s: C64) -> Profile {
        self.map(|_, v| v * s)
    }

    /// `self + s·other` on the same grid.
    pub fn axpy(&self, s: C64, other: &Profile) -> Result<Profile> {
        if !self.grid.compatible(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect();
        Ok(Profile { grid: self.grid.clone(), values, base_point: self.base_point.clone() })
    }

    /// ‖self − reference‖ / ‖reference‖ (absolute when the reference vanishes).
    pub fn relative_error(&self, reference: &Profile) -> Result<f64> {
        let d = self.axpy(C64::new(-1.0, 0.0), reference)?.norm();
        let r = reference.norm();
        Ok(if r > 0.0 { d / r } else { d })
    }

    /// Spectral ∂ along `axis`.
    pub fn derivative(&self, axis: usize, order: u32) -> Profile {
        Profile {
            grid: self.grid.clone(),
            values: spectral_derivative(&self.grid, &self.values, axis, order),
            base_point: self.base_point.clone(),
        }
    }

    /// Relative mass outside the box shrunk by 2 on every axis.
    pub fn schwartz_tail(&self) -> f64 {
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let mut p = vec![0.0; self.dim()];
        let mut out = 0.0;
        for (j, v) in self.values.iter().enumerate() {
            self.grid.point(j, &mut p);
            if p.iter().enumerate().any(|(a, x)| x.abs() > self.grid.half_width(a) - 2.0) {
                out += v.norm_sqr();
            }
        }
        out / total
    }

    /// Schwartz proxy: tails of the profile and its first two derivatives.
    pub fn check_schwartz(&self, tol: f64) -> Result<()> {
        let mut worst = self.schwartz_tail();
        for a in 0..self.dim() {
            for order in 1..=2 {
                worst = worst.max(self.derivative(a, order).schwartz_tail());
            }
        }
        if worst > tol {
            return Err(Error::Precondition { what: "profile tail mass".to_string(), magnitude: worst });
        }
        Ok(())
    }

    /// Evaluate by band-limited interpolation.
    pub fn interpolator(&self) -> TrigInterpolator {
        TrigInterpolator::new(&self.grid, &self.values)
    }

    pub fn as_field(&self, hbar: f64) -> Result<Field> {
        Field::new(self.grid.clone(), hbar, self.values.clone())
    }
}

pub type TuFn = Arc<dyn Fn(&[f64], &[f64]) -> C64 + Send + Sync>;
pub type TuGradFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<C64> + Send + Sync>;

/// A smooth evaluator a(t, u), with an optional analytic t-gradient.
#[derive(Clone)]
pub struct SmoothProfile {
    f: TuFn,
    dt: Option<TuGradFn>,
}

impl fmt::Debug for SmoothProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothProfile").field("analytic_dt", &self.dt.is_some()).finish()
    }
}

impl SmoothProfile {
    pub fn new(f: impl Fn(&[f64], &[f64]) -> C64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), dt: None }
    }

    pub fn with_t_gradient(mut self, g: impl Fn(&[f64], &[f64]) -> Vec<C64> + Send + Sync + 'static) -> Self {
        self.dt = Some(Arc::new(g));
        self
    }

    /// A t-independent profile (zero t-gradient).
    pub fn u_only(f: impl Fn(&[f64]) -> C64 + Send + Sync + 'static) -> Self {
        Self::new(move |_, u| f(u)).with_t_gradient(|t, _| vec![C64::new(0.0, 0.0); t.len()])
    }

    /// T(t)·U(u), with T' supplied.
    pub fn separable(
        t_factor: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        t_grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        u_factor: impl Fn(&[f64]) -> C64 + Send + Sync + 'static,
    ) -> Self {
        let t_factor = Arc::new(t_factor);
        let u_factor = Arc::new(u_factor);
        let (tf, uf) = (t_factor.clone(), u_factor.clone());
        Self::new(move |t, u| tf(t) * uf(u)).with_t_gradient(move |t, u| {
            let v = u_factor(u);
            t_grad(t).into_iter().map(|d| v * d).collect()
        })
    }

    pub fn eval(&self, t: &[f64], u: &[f64]) -> C64 {
        (self.f)(t, u)
    }

    pub fn has_analytic_t_gradient(&self) -> bool {
        self.dt.is_some()
    }

    /// ∂a/∂t_i at (t, u); central differences when no analytic gradient is known.
    pub fn t_gradient(&self, t: &[f64], u: &[f64]) -> Vec<C64> {
        if let Some(g) = &self.dt {
            return g(t, u);
        }
        let mut tp = t.to_vec();
        (0..t.len())
            .map(|i| {
                let h = 1e-5 * (1.0 + t[i].abs());
                tp[i] = t[i] + h;
                let fp = self.eval(&tp, u);
                tp[i] = t[i] - h;
                let fm = self.eval(&tp, u);
                tp[i] = t[i];
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    /// Sample u ↦ a(t, u) on `ugrid`.
    pub fn sample(&self, ugrid: &Grid, t: &[f64]) -> Profile {
        let mut p = Profile::from_fn(ugrid, |u| self.eval(t, u));
        p.base_point = t.to_vec();
        p
    }

    /// Sample u ↦ ∂a/∂t_i(t, u) on `ugrid`.
    pub fn sample_t_derivative(&self, ugrid: &Grid, t: &[f64], i: usize) -> Profile {
        let mut p = Profile::from_fn(ugrid, |u| self.t_gradient(t, u)[i]);
        p.base_point = t.to_vec();
        p
    }
}

/// Terms a_0, a_1, … of ℏ^r Σ ℏ^{j/2} a_j.
#[derive(Clone, Debug)]
pub struct ProfileStack {
    pub order: HalfInt,
    pub terms: Vec<SmoothProfile>,
}

impl ProfileStack {
    pub fn new(order: HalfInt, terms: Vec<SmoothProfile>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("profile stack needs at least a_0".to_string()));
        }
        Ok(Self { order, terms })
    }

    pub fn single(order: HalfInt, a0: SmoothProfile) -> Self {
        Self { order, terms: vec![a0] }
    }

    pub fn leading(&self) -> &SmoothProfile {
        &self.terms[0]
    }

    /// Σ_j s^j a_j(t, u) with s = √ℏ.
    pub fn eval(&self, t: &[f64], u: &[f64], sqrt_hbar: f64) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        let mut w = 1.0;
        for a in &self.terms {
            s += a.eval(t, u) * w;
            w *= sqrt_hbar;
        }
        s
    }

    /// Schwartz proxy for every term at every sample point.
    pub fn check_schwartz(&self, ugrid: &Grid, t_samples: &[Vec<f64>], tol: f64) -> Result<()> {
        for a in &self.terms {
            for t in t_samples {
                a.sample(ugrid, t).check_schwartz(tol)?;
            }
        }
        Ok(())
    }
}

/// Smooth cutoff in t: 1 on |t_i| ≤ flat, 0 on |t_i| ≥ edge.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TWindow {
    pub flat: f64,
    pub edge: f64,
}

fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    a / (a + b)
}

impl TWindow {
    pub fn new(flat: f64, edge: f64) -> Result<Self> {
        if !(flat >= 0.0 && edge > flat && edge.is_finite()) {
            return Err(Error::InvalidArgument(format!("window flat {flat}, edge {edge}")));
        }
        Ok(Self { flat, edge })
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        t.iter()
            .map(|&x| 1.0 - smooth_step((x.abs() - self.flat) / (self.edge - self.flat)))
            .product()
    }
}

/// A field tagged as a member of I^r(Σ₀).
#[derive(Clone, Debug)]
pub struct IsotropicState {
    pub field: Field,
    pub splitting: Splitting,
    pub order: HalfInt,
    pub stack: Option<ProfileStack>,
    pub window: Option<TWindow>,
}

impl IsotropicState {
    /// Wrap an operator output; no stack is attached.
    pub fn from_field(field: Field, splitting: Splitting, order: HalfInt) -> Result<Self> {
        splitting.check(field.grid())?;
        Ok(Self { field, splitting, order, stack: None, window: None })
    }

    pub fn hbar(&self) -> f64 {
        self.field.hbar()
    }

    pub fn with_field(&self, field: Field, order: HalfInt) -> Self {
        Self { field, splitting: self.splitting, order, stack: None, window: self.window }
    }
}

/// Sample ℏ^r Σ ℏ^{j/2} a_j(t, u/√ℏ)·window(t) on `grid`.
pub fn build_model_state(
    stack: &ProfileStack,
    splitting: Splitting,
    grid: &Grid,
    hbar: f64,
    window: Option<TWindow>,
) -> Result<IsotropicState> {
    splitting.check(grid)?;
    let k = splitting.k;
    if k >= 1 {
        let w = window.ok_or_else(|| Error::InvalidArgument("a t-window is required when k >= 1".to_string()))?;
        for a in 0..k {
            if w.edge >= grid.half_width(a) {
                return Err(Error::InvalidArgument(format!(
                    "window edge {} not inside t half-width {}",
                    w.edge,
                    grid.half_width(a)
                )));
            }
        }
    }
    let s = hbar.sqrt();
    let pref = hbar.powf(stack.order.value());
    let mut u = vec![0.0; splitting.l];
    let field = Field::from_fn(grid.clone(), hbar, |x| {
        let t = &x[..k];
        let w = window.map_or(1.0, |w| w.eval(t));
        if w == 0.0 {
            return C64::new(0.0, 0.0);
        }
        for i in 0..splitting.l {
            u[i] = x[k + i] / s;
        }
        stack.eval(t, &u, s) * (pref * w)
    })?;
    let edge = field.boundary_fraction();
    if edge > BOX_ESCAPE_TOL {
        return Err(Error::BoxEscape { fraction: edge, context: "build_model_state".to_string() });
    }
    Ok(IsotropicState { field, splitting, order: stack.order, stack: Some(stack.clone()), window })
}

/// Index of the t-node nearest `t_star` and its coordinates.
fn snap_t(grid: &Grid, k: usize, t_star: &[f64]) -> Result<(usize, Vec<f64>)> {
    if t_star.len() != k {
        return Err(Error::Dimension(format!("t_star has {} entries, k = {k}", t_star.len())));
    }
    let mut flat = 0usize;
    let mut snapped = vec![0.0; k];
    for a in 0..k {
        let m = ((t_star[a] + grid.half_width(a)) / grid.spacing(a)).round();
        if m < 0.0 || m >= grid.size(a) as f64 {
            return Err(Error::InvalidArgument(format!("t_star[{a}] = {} outside the box", t_star[a])));
        }
        let m = m as usize;
        snapped[a] = grid.node(a, m);
        flat = flat * grid.size(a) + m;
    }
    Ok((flat, snapped))
}

/// The u-slice of `field` at the t-node `t_index`.
fn u_slice(field: &Field, splitting: Splitting, t_index: usize) -> (Grid, Vec<C64>) {
    let ug = field.grid().sub_grid(&splitting.u_axes().collect::<Vec<_>>());
    let m = ug.len();
    (ug, field.values()[t_index * m..(t_index + 1) * m].to_vec())
}

/// ℏ^{-r}·Υ(t_⋆, √ℏ·u) on `ugrid`, t_⋆ snapped to the nearest node.
pub fn extract_profile(state: &IsotropicState, t_star: &[f64], ugrid: &Grid) -> Result<Profile> {
    let sp = state.splitting;
    if ugrid.dim() != sp.l {
        return Err(Error::Dimension("profile grid does not match l".to_string()));
    }
    let g = state.field.grid();
    let hbar = state.hbar();
    let s = hbar.sqrt();
    for i in 0..sp.l {
        let df = g.spacing(sp.k + i);
        if df > s * ugrid.spacing(i) * (1.0 + 1e-9) {
            return Err(Error::Resolution(format!(
                "u-axis {i}: field spacing {df:.3e} coarser than sqrt(hbar)*profile spacing {:.3e}",
                s * ugrid.spacing(i)
            )));
        }
    }
    let (ti, snapped) = snap_t(g, sp.k, t_star)?;
    let (ug, slice) = u_slice(&state.field, sp, ti);
    let interp = TrigInterpolator::new(&ug, &slice);
    let scale = hbar.powf(-state.order.value());
    let mut x = vec![0.0; sp.l];
    let mut prof = Profile::from_fn(ugrid, |u| {
        for i in 0..sp.l {
            x[i] = s * u[i];
        }
        interp.eval(&x) * scale
    });
    prof.base_point = snapped;
    Ok(prof)
}

/// Result of extrapolating extracted profiles to ℏ = 0.
#[derive(Clone, Debug)]
pub struct LeadingSymbolFit {
    pub profile: Profile,
    /// Log-log slope of ‖extracted − fit‖/‖fit‖ against ℏ; `None` at the noise floor.
    pub rate: Option<f64>,
    pub hbars: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Verify ℏ_{m+1} = ℏ_m/2 for at least three points.
pub fn check_geometric_schedule(hbars: &[f64]) -> Result<()> {
    if hbars.len() < 3 {
        return Err(Error::Schedule(format!("{} points; at least 3 are required", hbars.len())));
    }
    for w in hbars.windows(2) {
        if !(w[0] > 0.0) || (w[1] / w[0] - 0.5).abs() > 1e-9 {
            return Err(Error::Schedule(format!("{} -> {} is not a halving", w[0], w[1])));
        }
    }
    Ok(())
}

/// Least-squares slope of log(y) against log(x).
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Neville extrapolation to s = 0 of samples y(s_m).
pub(crate) fn neville_at_zero(s: &[f64], y: &[C64]) -> C64 {
    let mut p = y.to_vec();
    let n = s.len();
    for level in 1..n {
        for i in 0..n - level {
            let (si, sj) = (s[i], s[i + level]);
            p[i] = (p[i] * sj - p[i + 1] * si) / (sj - si);
        }
    }
    p[0]
}

/// Pointwise Richardson extrapolation in √ℏ of extracted profiles.
pub fn fit_leading_symbol(states: &[IsotropicState], t_star: &[f64], ugrid: &Grid) -> Result<LeadingSymbolFit> {
    let hbars: Vec<f64> = states.iter().map(|s| s.hbar()).collect();
    check_geometric_schedule(&hbars)?;
    let sp = states[0].splitting;
    if states.iter().any(|s| s.splitting != sp || s.order != states[0].order) {
        return Err(Error::InvalidArgument("inconsistent splittings or orders across the schedule".to_string()));
    }
    let profs: Vec<Profile> = states.iter().map(|s| extract_profile(s, t_star, ugrid)).collect::<Result<_>>()?;
    let svals: Vec<f64> = hbars.iter().map(|h| h.sqrt()).collect();
    let mut fit = Profile::zeros(ugrid);
    fit.base_point = profs[0].base_point.clone();
    let mut col = vec![C64::new(0.0, 0.0); profs.len()];
    for j in 0..ugrid.len() {
        for (c, p) in col.iter_mut().zip(&profs) {
            *c = p.values[j];
        }
        fit.values[j] = neville_at_zero(&svals, &col);
    }
    let residuals: Vec<f64> = profs.iter().map(|p| p.relative_error(&fit)).collect::<Result<_>>()?;
    let rate = if residuals.iter().all(|&r| r > 1e-12) { Some(loglog_slope(&hbars, &residuals)) } else { None };
    Ok(LeadingSymbolFit { profile: fit, rate, hbars, residuals })
}

/// ℏ^{r+l/4}(∫∫|a_0|²·window² du dt)^{1/2}, the leading term of ‖Υ‖.
pub fn predicted_norm(state: &IsotropicState) -> Result<f64> {
    let stack = state.stack.as_ref().ok_or(Error::MissingStack)?;
    let sp = state.splitting;
    let g = state.field.grid();
    let hbar = state.hbar();
    let s = hbar.sqrt();
    let a0 = stack.leading();
    let mut x = vec![0.0; g.dim()];
    let mut u = vec![0.0; sp.l];
    let mut acc = 0.0;
    for j in 0..g.len() {
        g.point(j, &mut x);
        let t = &x[..sp.k];
        let w = state.window.map_or(1.0, |w| w.eval(t));
        if w == 0.0 {
            continue;
        }
        for i in 0..sp.l {
            u[i] = x[sp.k + i] / s;
        }
        acc += a0.eval(t, &u).norm_sqr() * w * w;
    }
    // Field cell = Δt^k·ℏ^{l/2}Δu^l in profile units.
    let cell = g.cell_volume() / hbar.powf(sp.l as f64 / 2.0);
    Ok(hbar.powf(stack.order.value() + sp.l as f64 / 4.0) * (acc * cell).sqrt())
}

/// |‖Υ‖ − predicted| / predicted.
pub fn norm_relative_error(state: &IsotropicState) -> Result<f64> {
    let p = predicted_norm(state)?;
    Ok((state.field.norm() - p).abs() / p)
}

/// Fraction of Husimi mass at distance > `radius` from Σ₀ = {u = 0, ξ = 0}.
///
/// The t-position of the coherent-state centre is integrated out exactly (Plancherel),
/// which leaves a Gaussian smoothing of the t-momentum. Supports k ≤ 1.
pub fn wavefront_mass(state: &IsotropicState, radius: f64) -> Result<f64> {
    let sp = state.splitting;
    let hbar = state.hbar();
    if radius < 3.0 * hbar.sqrt() * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(format!("radius {radius} below 3*sqrt(hbar)")));
    }
    if sp.k > 1 {
        return Err(Error::InvalidArgument("wavefront_mass supports k <= 1".to_string()));
    }
    let g = state.field.grid().clone();
    let t_axes: Vec<usize> = sp.t_axes().collect();
    let ft = if sp.k > 0 { semiclassical_fourier_axes(&state.field, 1, &t_axes)? } else { state.field.clone() };
    let eta_nodes: Vec<f64> = if sp.k > 0 { ft.grid().nodes(0) } else { vec![0.0] };
    let ug = g.sub_grid(&sp.u_axes().collect::<Vec<_>>());
    let m = ug.len();
    let l = sp.l;
    // Position stride keeping the lattice spacing ≤ √ℏ/2.
    let stride: Vec<usize> = (0..l)
        .map(|a| {
            let mut st = 1usize;
            while (st * 2) as f64 * ug.spacing(a) <= 0.5 * hbar.sqrt() && st * 2 < ug.size(a) {
                st *= 2;
            }
            st
        })
        .collect();
    let mom = ug.dual(hbar);
    let (mut total, mut outer) = (0.0f64, 0.0f64);
    let r2 = radius * radius;
    let sq = hbar.sqrt();
    let mut idx = vec![0usize; l];
    let mut pos = vec![0.0; l];
    let mut zu = vec![0usize; l];
    for (ei, &eta) in eta_nodes.iter().enumerate() {
        let slice = ft.values()[ei * m..(ei + 1) * m].to_vec();
        if slice.iter().all(|v| v.norm_sqr() == 0.0) {
            continue;
        }
        let n_pos: usize = (0..l).map(|a| ug.size(a) / stride[a]).product();
        for pj in 0..n_pos {
            let mut r = pj;
            for a in (0..l).rev() {
                let cnt = ug.size(a) / stride[a];
                zu[a] = (r % cnt) * stride[a];
                r /= cnt;
                pos[a] = ug.node(a, zu[a]);
            }
            let mut w: Vec<C64> = slice
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    ug.multi_index(j, &mut idx);
                    let d2: f64 = (0..l)
                        .map(|a| {
                            let d = ug.node(a, idx[a]) - pos[a];
                            d * d
                        })
                        .sum();
                    v * (-d2 / (2.0 * hbar)).exp()
                })
                .collect();
            let sizes = ug.sizes().to_vec();
            for a in 0..l {
                for_each_lane(&mut w, &sizes, a, |lane| {
                    for (j, v) in lane.iter_mut().enumerate() {
                        if j % 2 == 1 {
                            *v = -*v;
                        }
                    }
                });
            }
            crate::fft::fft_axes(&mut w, &sizes, &(0..l).collect::<Vec<_>>(), false);
            let u2: f64 = pos.iter().map(|p| p * p).sum();
            for (q, v) in w.iter().enumerate() {
                let amp = v.norm_sqr();
                if amp == 0.0 {
                    continue;
                }
                ug.multi_index(q, &mut idx);
                let mu2: f64 = (0..l).map(|a| mom.node(a, idx[a]).powi(2)).sum();
                let rho2 = u2 + mu2;
                total += amp;
                if rho2 >= r2 {
                    outer += amp;
                } else if sp.k == 1 {
                    let big_r = (r2 - rho2).sqrt();
                    let miss = 0.5 * (libm::erfc((big_r - eta) / sq) + libm::erfc((big_r + eta) / sq));
                    outer += amp * miss;
                }
            }
        }
    }
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok((outer / total).clamp(0.0, 1.0))
}

/// Place a profile as a coherent-type state at `z`:
/// scale·ℏ^{-n/4}·e^{iξ_z·(x−x_z)/ℏ}·σ((x−x_z)/√ℏ).
pub fn place_profile(prof: &Profile, z: &PhasePoint, grid: &Grid, hbar: f64, scale: f64) -> Result<Field> {
    let n = grid.dim();
    if prof.dim() != n || z.dim() != n {
        return Err(Error::Dimension("profile, phase point and grid dimensions differ".to_string()));
    }
    let s = hbar.sqrt();
    let interp = prof.interpolator();
    let pref = scale * hbar.powf(-(n as f64) / 4.0);
    let mut y = vec![0.0; n];
    Field::from_fn(grid.clone(), hbar, |x| {
        let mut ph = 0.0;
        for a in 0..n {
            let d = x[a] - z.x[a];
            y[a] = d / s;
            ph += z.xi[a] * d / hbar;
        }
        interp.eval(&y) * C64::from_polar(pref, ph)
    })
}

/// Inverse of [`place_profile`]: σ(y) = ℏ^{n/4}e^{−iξ_z·√ℏy/ℏ}·Υ(x_z + √ℏy)/scale.
pub fn read_profile(field: &Field, z: &PhasePoint, ugrid: &Grid, scale: f64) -> Result<Profile> {
    let n = field.grid().dim();
    if ugrid.dim() != n || z.dim() != n {
        return Err(Error::Dimension("profile grid, phase point and field dimensions differ".to_string()));
    }
    let hbar = field.hbar();
    let s = hbar.sqrt();
    let interp = TrigInterpolator::new(field.grid(), field.values());
    let pref = hbar.powf(n as f64 / 4.0) / scale;
    let mut x = vec![0.0; n];
    Ok(Profile::from_fn(ugrid, |y| {
        let mut ph = 0.0;
        for a in 0..n {
            x[a] = z.x[a] + s * y[a];
            ph -= z.xi[a] * y[a] / s;
        }
        interp.eval(&x) * C64::from_polar(pref, ph)
    }))
}

/// Normalized Hermite function h_m(x).
pub fn hermite_function(m: usize, x: f64) -> f64 {
    let h0 = PI.powf(-0.25) * (-x * x / 2.0).exp();
    if m == 0 {
        return h0;
    }
    let mut prev = h0;
    let mut cur = 2f64.sqrt() * x * h0;
    for j in 1..m {
        let jf = j as f64;
        let next = (2.0 / (jf + 1.0)).sqrt() * x * cur - (jf / (jf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Π_i h_{m_i}(u_i/w_i)/√w_i as a t-independent profile.
pub fn hermite_profile(multi_index: &[i64], width: &[f64]) -> Result<SmoothProfile> {
    if multi_index.len() != width.len() {
        return Err(Error::Dimension("index and width lengths differ".to_string()));
    }
    if let Some(&m) = multi_index.iter().find(|&&m| m < 0) {
        return Err(Error::InvalidArgument(format!("negative Hermite index {m}")));
    }
    if width.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidArgument("Hermite widths must be positive".to_string()));
    }
    let idx: Vec<usize> = multi_index.iter().map(|&m| m as usize).collect();
    let width = width.to_vec();
    Ok(SmoothProfile::u_only(move |u| {
        let v: f64 = idx
            .iter()
            .zip(&width)
            .zip(u)
            .map(|((&m, &w), &x)| hermite_function(m, x / w) / w.sqrt())
            .product();
        C64::new(v, 0.0)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_u() -> SmoothProfile {
        hermite_profile(&[0], &[1.0]).unwrap()
    }

    fn self_dual_1d(hbar: f64) -> Grid {
        Grid::new(&[Grid::self_dual_half_width(128, hbar)], &[128]).unwrap()
    }

    fn profile_grid() -> Grid {
        Grid::new(&[Grid::self_dual_half_width(128, 1.0)], &[128]).unwrap()
    }

    #[test]
    fn hermite_examples() {
        let g = profile_grid();
        let h0 = hermite_profile(&[0], &[1.0]).unwrap().sample(&g, &[]);
        let h1 = hermite_profile(&[1], &[1.0]).unwrap().sample(&g, &[]);
        assert!((h0.norm() - 1.0).abs() < 1e-10);
        assert!((h1.norm() - 1.0).abs() < 1e-10);
        assert!(h0.inner(&h1).norm() < 1e-10);
        for &x in &[-1.3, 0.2, 2.5] {
            let want = PI.powf(-0.25) * 2f64.sqrt() * x * (-x * x / 2.0).exp();
            assert!((hermite_function(1, x) - want).abs() < 1e-14);
        }
        assert!(hermite_profile(&[-1], &[1.0]).is_err());
    }

    #[test]
    fn coherent_state_norm_scaling() {
        let hbar = 1e-2;
        let st = build_model_state(
            &ProfileStack::single(HalfInt::ZERO, gauss_u()),
            Splitting::new(0, 1).unwrap(),
            &self_dual_1d(hbar),
            hbar,
            None,
        )
        .unwrap();
        assert!((st.field.norm() - hbar.powf(0.25)).abs() < 1e-10);
        assert!((predicted_norm(&st).unwrap() - hbar.powf(0.25)).abs() < 1e-10);
        let half = build_model_state(
            &ProfileStack::single(HalfInt(1), gauss_u()),
            Splitting::new(0, 1).unwrap(),
            &self_dual_1d(hbar),
            hbar,
            None,
        )
        .unwrap();
        for (a, b) in half.field.values().iter().zip(st.field.values()) {
            assert!((a - b * hbar.sqrt()).norm() < 1e-14);
        }
    }

    #[test]
    fn build_extract_roundtrip_2d() {
        let hbar = 1e-3;
        let grid = Grid::new(&[8.0, Grid::self_dual_half_width(128, hbar)], &[64, 128]).unwrap();
        let a0 = SmoothProfile::separable(
            |t| (-t[0] * t[0]).exp(),
            |t| vec![-2.0 * t[0] * (-t[0] * t[0]).exp()],
            |u| C64::new((-u[0] * u[0] / 2.0).exp(), 0.0),
        );
        let st = build_model_state(
            &ProfileStack::single(HalfInt::ZERO, a0.clone()),
            Splitting::new(1, 1).unwrap(),
            &grid,
            hbar,
            Some(TWindow::new(5.0, 7.0).unwrap()),
        )
        .unwrap();
        let p = extract_profile(&st, &[0.5], &profile_grid()).unwrap();
        let want = a0.sample(&profile_grid(), &p.base_point);
        assert!(p.relative_error(&want).unwrap() < 1e-8);
        let pn = predicted_norm(&st).unwrap();
        let exact = hbar.powf(0.25) * (PI / 2.0).powf(0.25) * PI.powf(0.25);
        assert!((pn - exact).abs() / exact < 1e-8);
    }

    #[test]
    fn richardson_recovers_leading_term() {
        let a1 = hermite_profile(&[1], &[1.0]).unwrap();
        let stack = ProfileStack::new(HalfInt::ZERO, vec![gauss_u(), a1]).unwrap();
        let hbars = [1e-2, 5e-3, 2.5e-3];
        let states: Vec<IsotropicState> = hbars
            .iter()
            .map(|&h| build_model_state(&stack, Splitting::new(0, 1).unwrap(), &self_dual_1d(h), h, None).unwrap())
            .collect();
        let fit = fit_leading_symbol(&states, &[], &profile_grid()).unwrap();
        let want = gauss_u().sample(&profile_grid(), &[]);
        assert!(fit.profile.relative_error(&want).unwrap() < 1e-6);
        assert!((fit.rate.unwrap() - 0.5).abs() < 0.05);
        assert!(fit_leading_symbol(&states[..2], &[], &profile_grid()).is_err());
    }

    #[test]
    fn wavefront_of_coherent_state() {
        let hbar = 1e-3;
        let st = build_model_state(
            &ProfileStack::single(HalfInt::ZERO, gauss_u()),
            Splitting::new(0, 1).unwrap(),
            &self_dual_1d(hbar),
            hbar,
            None,
        )
        .unwrap();
        assert!(wavefront_mass(&st, 1.0).unwrap() <= 1e-8);
    }

    #[test]
    fn place_read_roundtrip() {
        let hbar = 1e-3;
        let pg = Grid::new(&[16.0], &[256]).unwrap();
        let z = PhasePoint::new(vec![0.2], vec![-0.5]).unwrap();
        let fg = Grid::new(&[1.0], &[1024]).unwrap();
        let prof = hermite_profile(&[2], &[1.0]).unwrap().sample(&pg, &[]);
        let f = place_profile(&prof, &z, &fg, hbar, 1.0).unwrap();
        let back = read_profile(&f, &z, &pg, 1.0).unwrap();
        assert!(back.relative_error(&prof).unwrap() < 1e-4);
    }
}
