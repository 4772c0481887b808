//! Elementary Fourier integral operators preserving I(Σ₀): pullback by a
//! Σ₀-preserving diffeomorphism, multiplication by e^{iφ/ℏ} with φ vanishing
//! to second order on Y = {u = 0}, and the partial Fourier transform in u.

use alloc::format;
use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use num_complex::Complex64 as C64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::grid::{semiclassical_fourier_axes, Field};
use crate::interp::TrigInterpolator;
use crate::metaplectic::{apply_generator, Generator};
use crate::states::{
    build_model_state, check_geometric_schedule, extract_profile, IsotropicState, Profile, ProfileStack,
    SmoothProfile, Splitting,
};
use crate::symbolcalc::{ConvergenceReport, HarnessGrid};

type MapFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type JacFn = Arc<dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync>;
type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A diffeomorphism of ℝⁿ with f(Y) ⊆ Y.
#[derive(Clone)]
pub struct Diffeo {
    dim: usize,
    forward: MapFn,
    jacobian: JacFn,
    inverse: Option<MapFn>,
}

impl fmt::Debug for Diffeo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Diffeo").field("dim", &self.dim).field("explicit_inverse", &self.inverse.is_some()).finish()
    }
}

fn parse_components(src: &[&str], dim: usize) -> Result<Vec<Expr>> {
    if src.len() != dim {
        return Err(Error::Dimension(format!("{} components for dimension {dim}", src.len())));
    }
    let es: Vec<Expr> = src.iter().map(|s| Expr::parse(s)).collect::<Result<_>>()?;
    if let Some(e) = es.iter().find(|e| e.depends_on_xi() || e.arity() > dim) {
        return Err(Error::InvalidArgument(format!("component '{e}' must use x_1..x_{dim} only")));
    }
    Ok(es)
}

impl Diffeo {
    pub fn new(
        dim: usize,
        forward: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self { dim, forward: Arc::new(forward), jacobian: Arc::new(jacobian), inverse: None }
    }

    pub fn with_inverse(mut self, inverse: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.inverse = Some(Arc::new(inverse));
        self
    }

    /// Components as expressions in x_1..x_n; Jacobian by symbolic differentiation.
    pub fn from_exprs(forward: &[&str], inverse: Option<&[&str]>) -> Result<Self> {
        let dim = forward.len();
        let fw = parse_components(forward, dim)?;
        let jac: Vec<Vec<Expr>> = fw.iter().map(|e| (0..dim).map(|j| e.derivative(Var::X(j))).collect()).collect();
        let f2 = fw.clone();
        let mut d = Self::new(
            dim,
            move |x| f2.iter().map(|e| e.eval(x, &[]).re).collect(),
            move |x| jac.iter().map(|r| r.iter().map(|e| e.eval(x, &[]).re).collect()).collect(),
        );
        if let Some(inv) = inverse {
            let iv = parse_components(inv, dim)?;
            d = d.with_inverse(move |x| iv.iter().map(|e| e.eval(x, &[]).re).collect());
        }
        Ok(d)
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(
            dim,
            |x| x.to_vec(),
            move |_| (0..dim).map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
        )
        .with_inverse(|x| x.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.forward)(x)
    }

    pub fn jacobian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (self.jacobian)(x)
    }

    /// f⁻¹(y), explicit if supplied, else Newton from y.
    pub fn invert(&self, y: &[f64]) -> Result<Vec<f64>> {
        if let Some(inv) = &self.inverse {
            return Ok(inv(y));
        }
        let n = self.dim;
        let mut x = y.to_vec();
        for _ in 0..60 {
            let fx = self.apply(&x);
            let r: Vec<f64> = fx.iter().zip(y).map(|(a, b)| a - b).collect();
            if r.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-14 * (1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
                return Ok(x);
            }
            let j = self.jacobian(&x);
            let jm = nalgebra::DMatrix::from_fn(n, n, |a, b| j[a][b]);
            let rv = nalgebra::DVector::from_vec(r);
            let dx = jm.lu().solve(&rv).ok_or_else(|| Error::Singular("diffeo Jacobian".to_string()))?;
            for (xi, d) in x.iter_mut().zip(dx.iter()) {
                *xi -= d;
            }
        }
        Err(Error::InvalidArgument("Newton inversion of diffeo did not converge".to_string()))
    }

    /// f∘f⁻¹ = id and f(t, 0) ∈ Y on the probe t-values.
    pub fn check_invariants(&self, splitting: Splitting, probes: &[Vec<f64>]) -> Result<()> {
        for p in probes {
            let y = self.apply(&self.invert(p)?);
            let e = y.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if e > 1e-8 {
                return Err(Error::Precondition { what: "f(f^-1(x)) - x".to_string(), magnitude: e });
            }
            let mut t0 = p[..splitting.k].to_vec();
            t0.extend(vec![0.0; splitting.l]);
            let img = self.apply(&t0);
            let off = img[splitting.k..].iter().map(|v| v.abs()).fold(0.0, f64::max);
            if off > 1e-12 {
                return Err(Error::Precondition { what: "u-component of f(t, 0)".to_string(), magnitude: off });
            }
        }
        Ok(())
    }
}

/// Field(x) = state(f(x)) by band-limited interpolation; images outside the box read as 0.
pub fn pullback_apply(f: &Diffeo, state: &IsotropicState) -> Result<IsotropicState> {
    let g = state.field.grid();
    if f.dim() != g.dim() {
        return Err(Error::Dimension("diffeo dimension".to_string()));
    }
    let it = TrigInterpolator::new(g, state.field.values());
    let field = Field::from_fn(g.clone(), state.hbar(), |x| it.eval(&f.apply(x)))?;
    let edge = field.boundary_fraction();
    if edge > 1e-10 {
        return Err(Error::BoxEscape { fraction: edge, context: "pullback image".to_string() });
    }
    Ok(state.with_field(field, state.order))
}

/// Leading profile of f*Υ at t_⋆: v ↦ a0(f_t(t_⋆, 0), ∂_u f_u(t_⋆, 0)·v).
pub fn pullback_predicted_profile(
    f: &Diffeo,
    a0: &SmoothProfile,
    splitting: Splitting,
    t_star: &[f64],
    ugrid: &crate::grid::Grid,
) -> Result<Profile> {
    let (k, l) = (splitting.k, splitting.l);
    let mut s = t_star.to_vec();
    s.extend(vec![0.0; l]);
    let img = f.apply(&s);
    let jac = f.jacobian(&s);
    let t_img = img[..k].to_vec();
    let mut w = vec![0.0; l];
    let mut p = Profile::from_fn(ugrid, |v| {
        for i in 0..l {
            w[i] = (0..l).map(|j| jac[k + i][k + j] * v[j]).sum();
        }
        a0.eval(&t_img, &w)
    });
    p.base_point = t_star.to_vec();
    Ok(p)
}

/// Real phase φ(x) with φ = ∇φ = 0 on Y.
#[derive(Clone)]
pub struct QuadraticPhase {
    dim: usize,
    phi: ScalarFn,
    grad: ScalarVecFn,
    hessian_u: JacFn,
}

type ScalarVecFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

impl fmt::Debug for QuadraticPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuadraticPhase").field("dim", &self.dim).finish()
    }
}

impl QuadraticPhase {
    /// `hessian_u(t)` returns ψ_{rs}(t, 0) = ½∂²φ/∂u_r∂u_s(t, 0).
    pub fn new(
        dim: usize,
        phi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        hessian_u: impl Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self { dim, phi: Arc::new(phi), grad: Arc::new(grad), hessian_u: Arc::new(hessian_u) }
    }

    pub fn from_expr(src: &str, splitting: Splitting) -> Result<Self> {
        let dim = splitting.dim();
        let e = Expr::parse(src)?;
        if e.depends_on_xi() || e.arity() > dim {
            return Err(Error::InvalidArgument(format!("phase '{src}' must use x_1..x_{dim} only")));
        }
        let grad: Vec<Expr> = (0..dim).map(|j| e.derivative(Var::X(j))).collect();
        let k = splitting.k;
        let l = splitting.l;
        let hess: Vec<Vec<Expr>> =
            (0..l).map(|r| (0..l).map(|s| grad[k + r].derivative(Var::X(k + s))).collect()).collect();
        let e2 = e.clone();
        Ok(Self::new(
            dim,
            move |x| e2.eval(x, &[]).re,
            move |x| grad.iter().map(|g| g.eval(x, &[]).re).collect(),
            move |t| {
                let mut x = t.to_vec();
                x.extend(vec![0.0; l]);
                hess.iter().map(|r| r.iter().map(|h| 0.5 * h.eval(&x, &[]).re).collect()).collect()
            },
        ))
    }

    pub fn phi(&self, x: &[f64]) -> f64 {
        (self.phi)(x)
    }

    pub fn psi(&self, t: &[f64]) -> Vec<Vec<f64>> {
        (self.hessian_u)(t)
    }

    /// φ(t, 0) = 0 and the full gradient ∇φ(t, 0) = 0 on probe t-values.
    pub fn check_invariants(&self, splitting: Splitting, t_probes: &[Vec<f64>]) -> Result<()> {
        for t in t_probes {
            let mut x = t.clone();
            x.extend(vec![0.0; splitting.l]);
            let v = self.phi(&x).abs();
            if v > 1e-12 {
                return Err(Error::Precondition { what: "phi(t, 0)".to_string(), magnitude: v });
            }
            let g = (self.grad)(&x).iter().map(|v| v.abs()).fold(0.0, f64::max);
            if g > 1e-10 {
                return Err(Error::Precondition { what: "|grad phi(t, 0)|".to_string(), magnitude: g });
            }
        }
        Ok(())
    }
}

/// Multiply by e^{iφ/ℏ}.
pub fn quadratic_phase_apply(q: &QuadraticPhase, state: &IsotropicState) -> Result<IsotropicState> {
    let sp = state.splitting;
    let g = state.field.grid();
    let t_probes: Vec<Vec<f64>> = (0..g.size(0).min(8))
        .map(|m| (0..sp.k).map(|a| g.node(a, m * (g.size(a) / 8).max(1) % g.size(a))).collect())
        .collect();
    q.check_invariants(sp, &t_probes)?;
    let h = state.hbar();
    let mut p = vec![0.0; g.dim()];
    let values = state
        .field
        .values()
        .iter()
        .enumerate()
        .map(|(j, v)| {
            g.point(j, &mut p);
            v * C64::from_polar(1.0, q.phi(&p) / h)
        })
        .collect();
    Ok(state.with_field(state.field.with_values(values)?, state.order))
}

/// e^{iΣu_r u_s ψ_rs(t_⋆, 0)}·a0(t_⋆, u).
pub fn quadratic_phase_predicted_profile(
    q: &QuadraticPhase,
    a0: &SmoothProfile,
    t_star: &[f64],
    ugrid: &crate::grid::Grid,
) -> Profile {
    let psi = q.psi(t_star);
    let c = nalgebra::DMatrix::from_fn(psi.len(), psi.len(), |r, s| 2.0 * psi[r][s]);
    let base = a0.sample(ugrid, t_star);
    apply_generator(&Generator::Shear(c), &base).unwrap_or(base)
}

/// Unitary semiclassical Fourier transform in the u variables with t fixed.
///
/// Under the unitary normalization the order is unchanged and the new leading
/// profile is the unitary classical Fourier transform of a0 in u.
pub fn partial_fourier_apply(state: &IsotropicState) -> Result<IsotropicState> {
    let sp = state.splitting;
    let axes: Vec<usize> = sp.u_axes().collect();
    let ft = semiclassical_fourier_axes(&state.field, 1, &axes)?;
    let frac = ft.nyquist_fraction();
    if frac > crate::quantize::KN_ALIASING_TOL {
        return Err(Error::Aliasing { fraction: frac, context: "partial Fourier".to_string() });
    }
    Ok(state.with_field(ft, state.order))
}

/// Unitary classical Fourier transform of a0(t_⋆, ·).
pub fn partial_fourier_predicted_profile(a0: &SmoothProfile, t_star: &[f64], ugrid: &crate::grid::Grid) -> Result<Profile> {
    apply_generator(&Generator::Fourier, &a0.sample(ugrid, t_star))
}

/// Which elementary operator a convergence check exercises.
#[derive(Clone, Debug)]
pub enum ElementaryFio {
    Pullback(Diffeo),
    QuadraticPhase(QuadraticPhase),
    PartialFourier,
}

impl ElementaryFio {
    pub fn apply(&self, state: &IsotropicState) -> Result<IsotropicState> {
        match self {
            ElementaryFio::Pullback(f) => pullback_apply(f, state),
            ElementaryFio::QuadraticPhase(q) => quadratic_phase_apply(q, state),
            ElementaryFio::PartialFourier => partial_fourier_apply(state),
        }
    }

    pub fn predicted(
        &self,
        a0: &SmoothProfile,
        splitting: Splitting,
        t_star: &[f64],
        ugrid: &crate::grid::Grid,
    ) -> Result<Profile> {
        match self {
            ElementaryFio::Pullback(f) => pullback_predicted_profile(f, a0, splitting, t_star, ugrid),
            ElementaryFio::QuadraticPhase(q) => Ok(quadratic_phase_predicted_profile(q, a0, t_star, ugrid)),
            ElementaryFio::PartialFourier => partial_fourier_predicted_profile(a0, t_star, ugrid),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ElementaryFio::Pullback(_) => "pullback",
            ElementaryFio::QuadraticPhase(_) => "quadratic phase",
            ElementaryFio::PartialFourier => "partial Fourier",
        }
    }
}

/// Extracted profile of op(Υ) against its predicted symbol over the schedule.
pub fn fio_convergence(
    op: &ElementaryFio,
    stack: &ProfileStack,
    splitting: Splitting,
    schedule: &[f64],
    grid: &HarnessGrid,
    t_star: &[f64],
) -> Result<ConvergenceReport> {
    check_geometric_schedule(schedule)?;
    let ugrid = grid.profile_grid(splitting)?;
    let pred = op.predicted(stack.leading(), splitting, t_star, &ugrid)?;
    let mut residuals = Vec::with_capacity(schedule.len());
    for &h in schedule {
        let st = build_model_state(stack, splitting, &grid.field_grid(splitting, h)?, h, grid.window)?;
        let out = op.apply(&st)?;
        residuals.push(extract_profile(&out, t_star, &ugrid)?.relative_error(&pred)?);
    }
    Ok(ConvergenceReport::from_residuals(op.label(), schedule.to_vec(), residuals))
}
