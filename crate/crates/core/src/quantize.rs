//! Kohn–Nirenberg quantization of symbols p0 + ℏp1 acting on fields.

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
use crate::expr::{Expr, Var};
use crate::grid::{semiclassical_fourier, Field};

/// Output Nyquist-shell mass above which `apply_kn` refuses the result.
pub const KN_ALIASING_TOL: f64 = 1e-6;

pub type SymFn = Arc<dyn Fn(&[f64], &[f64]) -> C64 + Send + Sync>;
pub type HalfFn = Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>;
pub type JetFn = Arc<dyn Fn(&[f64], &[f64]) -> Jet + Send + Sync>;

/// Value, gradient and Hessian blocks of p0 at one phase-space point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub value: C64,
    pub dx: Vec<C64>,
    pub dxi: Vec<C64>,
    /// ∂²/∂x_i∂x_j
    pub dxx: Vec<Vec<C64>>,
    /// ∂²/∂x_i∂ξ_j
    pub dxxi: Vec<Vec<C64>>,
    /// ∂²/∂ξ_i∂ξ_j
    pub dxixi: Vec<Vec<C64>>,
}

/// A separable term f(x)·g(ξ).
#[derive(Clone)]
pub struct SeparableTerm {
    pub f: HalfFn,
    pub g: HalfFn,
}

/// p0 + ℏp1 with derivative access.
#[derive(Clone)]
pub struct SymbolOracle {
    dim: usize,
    p0: SymFn,
    p1: Option<SymFn>,
    jet: Option<JetFn>,
    separable: Option<Vec<SeparableTerm>>,
    separable_p1: Option<Vec<SeparableTerm>>,
    source: Option<(Expr, Option<Expr>)>,
}

impl fmt::Debug for SymbolOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("SymbolOracle");
        d.field("dim", &self.dim);
        if let Some((p0, p1)) = &self.source {
            d.field("p0", &format!("{p0}"));
            d.field("p1", &p1.as_ref().map(|e| format!("{e}")));
        }
        d.field("analytic_jet", &self.jet.is_some()).field("separable", &self.separable.is_some()).finish()
    }
}

fn fd_step(v: f64) -> f64 {
    1e-5 * (1.0 + v.abs())
}

fn fd2_step(v: f64) -> f64 {
    1e-4 * (1.0 + v.abs())
}

fn expr_terms(e: &Expr) -> Option<Vec<SeparableTerm>> {
    e.separable_terms().map(|ts| {
        ts.into_iter()
            .map(|(f, g)| {
                let f: HalfFn = Arc::new(move |x: &[f64]| f.eval(x, &[]));
                let g: HalfFn = Arc::new(move |xi: &[f64]| g.eval(&[], xi));
                SeparableTerm { f, g }
            })
            .collect()
    })
}

impl SymbolOracle {
    /// A symbol given only by its values; derivatives by finite differences.
    pub fn from_fn(dim: usize, p0: impl Fn(&[f64], &[f64]) -> C64 + Send + Sync + 'static) -> Self {
        Self { dim, p0: Arc::new(p0), p1: None, jet: None, separable: None, separable_p1: None, source: None }
    }

    pub fn with_p1(mut self, p1: impl Fn(&[f64], &[f64]) -> C64 + Send + Sync + 'static) -> Self {
        self.p1 = Some(Arc::new(p1));
        self.separable_p1 = None;
        self
    }

    pub fn with_jet(mut self, jet: impl Fn(&[f64], &[f64]) -> Jet + Send + Sync + 'static) -> Self {
        self.jet = Some(Arc::new(jet));
        self
    }

    pub fn with_separable(mut self, terms: Vec<SeparableTerm>) -> Self {
        self.separable = Some(terms);
        self
    }

    /// Parse p0 (and optionally p1); derivatives are symbolic.
    pub fn from_expr(p0: &str, p1: Option<&str>, dim: usize) -> Result<Self> {
        let e0 = Expr::parse(p0)?;
        let e1 = p1.map(Expr::parse).transpose()?;
        let arity = e0.arity().max(e1.as_ref().map_or(0, |e| e.arity()));
        if arity > dim {
            return Err(Error::Dimension(format!("symbol uses index {arity} in dimension {dim}")));
        }
        let n = dim;
        let grad_x: Vec<Expr> = (0..n).map(|i| e0.derivative(Var::X(i))).collect();
        let grad_xi: Vec<Expr> = (0..n).map(|i| e0.derivative(Var::Xi(i))).collect();
        let dxx: Vec<Vec<Expr>> =
            grad_x.iter().map(|d| (0..n).map(|j| d.derivative(Var::X(j))).collect()).collect();
        let dxxi: Vec<Vec<Expr>> =
            grad_x.iter().map(|d| (0..n).map(|j| d.derivative(Var::Xi(j))).collect()).collect();
        let dxixi: Vec<Vec<Expr>> =
            grad_xi.iter().map(|d| (0..n).map(|j| d.derivative(Var::Xi(j))).collect()).collect();
        let v0 = e0.clone();
        let jet = move |x: &[f64], xi: &[f64]| {
            let ev = |e: &Expr| e.eval(x, xi);
            let em = |m: &Vec<Vec<Expr>>| m.iter().map(|r| r.iter().map(ev).collect()).collect();
            Jet {
                value: v0.eval(x, xi),
                dx: grad_x.iter().map(ev).collect(),
                dxi: grad_xi.iter().map(ev).collect(),
                dxx: em(&dxx),
                dxxi: em(&dxxi),
                dxixi: em(&dxixi),
            }
        };
        let sep0 = expr_terms(&e0);
        let sep1 = e1.as_ref().and_then(expr_terms);
        let f0 = e0.clone();
        let mut o = Self::from_fn(dim, move |x, xi| f0.eval(x, xi)).with_jet(jet);
        if let Some(e) = e1.clone() {
            o = o.with_p1(move |x, xi| e.eval(x, xi));
        }
        o.separable = sep0;
        o.separable_p1 = sep1;
        o.source = Some((e0, e1));
        Ok(o)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p0(&self, x: &[f64], xi: &[f64]) -> C64 {
        (self.p0)(x, xi)
    }

    pub fn p1(&self, x: &[f64], xi: &[f64]) -> C64 {
        self.p1.as_ref().map_or(C64::new(0.0, 0.0), |p| p(x, xi))
    }

    pub fn has_p1(&self) -> bool {
        self.p1.is_some()
    }

    pub fn has_analytic_jet(&self) -> bool {
        self.jet.is_some()
    }

    pub fn separable_terms(&self) -> Option<&[SeparableTerm]> {
        self.separable.as_deref()
    }

    /// Value and derivatives of p0 up to order 2.
    pub fn jet(&self, x: &[f64], xi: &[f64]) -> Jet {
        match &self.jet {
            Some(j) => j(x, xi),
            None => self.fd_jet(x, xi),
        }
    }

    /// Central-difference jet.
    pub fn fd_jet(&self, x: &[f64], xi: &[f64]) -> Jet {
        let n = self.dim;
        let mut z: Vec<f64> = x.iter().chain(xi).copied().collect();
        let eval = |z: &[f64]| (self.p0)(&z[..n], &z[n..]);
        let mut grad = vec![C64::new(0.0, 0.0); 2 * n];
        for a in 0..2 * n {
            let h = fd_step(z[a]);
            let z0 = z[a];
            z[a] = z0 + h;
            let fp = eval(&z);
            z[a] = z0 - h;
            let fm = eval(&z);
            z[a] = z0;
            grad[a] = (fp - fm) / (2.0 * h);
        }
        let f0 = eval(&z);
        let mut hess = vec![vec![C64::new(0.0, 0.0); 2 * n]; 2 * n];
        for a in 0..2 * n {
            for b in a..2 * n {
                let (ha, hb) = (fd2_step(z[a]), fd2_step(z[b]));
                let (za, zb) = (z[a], z[b]);
                let v = if a == b {
                    z[a] = za + ha;
                    let fp = eval(&z);
                    z[a] = za - ha;
                    let fm = eval(&z);
                    z[a] = za;
                    (fp - f0 * 2.0 + fm) / (ha * ha)
                } else {
                    let mut corner = |sa: f64, sb: f64| {
                        z[a] = za + sa * ha;
                        z[b] = zb + sb * hb;
                        let v = eval(&z);
                        z[a] = za;
                        z[b] = zb;
                        v
                    };
                    (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * ha * hb)
                };
                hess[a][b] = v;
                hess[b][a] = v;
            }
        }
        let block = |r0: usize, c0: usize| -> Vec<Vec<C64>> {
            (0..n).map(|i| (0..n).map(|j| hess[r0 + i][c0 + j]).collect()).collect()
        };
        Jet {
            value: f0,
            dx: grad[..n].to_vec(),
            dxi: grad[n..].to_vec(),
            dxx: block(0, 0),
            dxxi: block(0, n),
            dxixi: block(n, n),
        }
    }

    /// σ_sub = p1 − (1/(2i))Σ_j ∂²p0/∂x_j∂ξ_j.
    pub fn subprincipal(&self, x: &[f64], xi: &[f64]) -> C64 {
        let j = self.jet(x, xi);
        let tr: C64 = (0..self.dim).map(|k| j.dxxi[k][k]).sum();
        self.p1(x, xi) - tr / (C64::new(0.0, 2.0))
    }

    /// Hamilton field (∂_ξ p0, −∂_x p0).
    pub fn hamilton_field(&self, x: &[f64], xi: &[f64]) -> Vec<C64> {
        let j = self.jet(x, xi);
        j.dxi.iter().copied().chain(j.dx.iter().map(|v| -v)).collect()
    }

    /// The symbol p0 − λ (p1 unchanged).
    pub fn shifted(&self, lambda: C64) -> Self {
        let p0 = self.p0.clone();
        let mut o = self.clone();
        o.p0 = Arc::new(move |x, xi| p0(x, xi) - lambda);
        if let Some(j) = &self.jet {
            let j = j.clone();
            o.jet = Some(Arc::new(move |x, xi| {
                let mut jj = j(x, xi);
                jj.value -= lambda;
                jj
            }));
        }
        if let Some(t) = &mut o.separable {
            t.push(SeparableTerm { f: Arc::new(move |_| -lambda), g: Arc::new(|_| C64::new(1.0, 0.0)) });
        }
        o.source = None;
        o
    }

    /// Largest |Im p0| on the probe points.
    pub fn max_imag(&self, probes: &[(Vec<f64>, Vec<f64>)]) -> f64 {
        probes.iter().map(|(x, xi)| self.p0(x, xi).im.abs()).fold(0.0, f64::max)
    }

    /// Supplied derivatives versus finite differences, and separable sum versus p0.
    pub fn check_invariants(&self, probes: &[(Vec<f64>, Vec<f64>)]) -> Result<()> {
        for (x, xi) in probes {
            if let Some(terms) = &self.separable {
                let s: C64 = terms.iter().map(|t| (t.f)(x) * (t.g)(xi)).sum();
                let p = self.p0(x, xi);
                let d = (s - p).norm();
                if d > 1e-10 * (1.0 + p.norm()) {
                    return Err(Error::Precondition { what: "separable terms vs p0".to_string(), magnitude: d });
                }
            }
            if self.jet.is_some() {
                let a = self.jet(x, xi);
                let f = self.fd_jet(x, xi);
                let scale = 1.0
                    + a.dx.iter().chain(&a.dxi).map(|v| v.norm()).fold(0.0, f64::max)
                    + [&a.dxx, &a.dxxi, &a.dxixi].iter().flat_map(|m| m.iter().flatten()).map(|v| v.norm()).fold(0.0, f64::max);
                let diff = a
                    .dx
                    .iter()
                    .zip(&f.dx)
                    .chain(a.dxi.iter().zip(&f.dxi))
                    .chain(a.dxx.iter().flatten().zip(f.dxx.iter().flatten()))
                    .chain(a.dxxi.iter().flatten().zip(f.dxxi.iter().flatten()))
                    .chain(a.dxixi.iter().flatten().zip(f.dxixi.iter().flatten()))
                    .map(|(p, q)| (p - q).norm())
                    .fold(0.0, f64::max);
                if diff > 1e-6 * scale {
                    return Err(Error::Precondition {
                        what: "analytic derivatives vs finite differences".to_string(),
                        magnitude: diff / scale,
                    });
                }
            }
        }
        Ok(())
    }
}

fn check_finite(v: C64, x: &[f64], xi: &[f64]) -> Result<C64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(format!("symbol at x = {x:?}, xi = {xi:?}")))
    }
}

/// Σ_i f_i(x)·ℱ⁻¹[g_i(ξ)·ĝ].
fn apply_separable(terms: &[SeparableTerm], f: &Field, ghat: &Field) -> Result<Vec<C64>> {
    let g = f.grid();
    let dual = ghat.grid();
    let nd = g.dim();
    let mut out = vec![C64::new(0.0, 0.0); g.len()];
    let mut p = vec![0.0; nd];
    for t in terms {
        let mut prod = Vec::with_capacity(dual.len());
        for (m, v) in ghat.values().iter().enumerate() {
            dual.point(m, &mut p);
            prod.push(v * check_finite((t.g)(&p), &[], &p)?);
        }
        let back = semiclassical_fourier(&ghat.with_values(prod)?, -1)?;
        for (j, (o, v)) in out.iter_mut().zip(back.values()).enumerate() {
            g.point(j, &mut p);
            *o += v * check_finite((t.f)(&p), &p, &[])?;
        }
    }
    Ok(out)
}

/// Direct quadrature Σ_m e^{ix·ξ_m/ℏ}p(x, ξ_m)ĝ_m·Δξ/(2πℏ)^{n/2} at every node.
fn apply_general(p: &dyn Fn(&[f64], &[f64]) -> C64, f: &Field, ghat: &Field) -> Result<Vec<C64>> {
    let g = f.grid();
    let dual = ghat.grid();
    let hbar = f.hbar();
    let nd = g.dim();
    let pref = dual.cell_volume() / (2.0 * PI * hbar).powf(nd as f64 / 2.0);
    let xis: Vec<Vec<f64>> = dual.points();
    let mut out = Vec::with_capacity(g.len());
    let mut x = vec![0.0; nd];
    for j in 0..g.len() {
        g.point(j, &mut x);
        let mut s = C64::new(0.0, 0.0);
        for (xi, gh) in xis.iter().zip(ghat.values()) {
            if *gh == C64::new(0.0, 0.0) {
                continue;
            }
            let ph: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() / hbar;
            s += C64::from_polar(1.0, ph) * check_finite(p(&x, xi), &x, xi)? * gh;
        }
        out.push(s * pref);
    }
    Ok(out)
}

/// Kohn–Nirenberg quantization (2πℏ)^{-n}∬e^{i(x−y)·ξ/ℏ}(p0 + ℏp1)(x, ξ)f(y) dy dξ.
pub fn apply_kn(p: &SymbolOracle, f: &Field) -> Result<Field> {
    if p.dim != f.grid().dim() {
        return Err(Error::Dimension(format!("symbol of dimension {} on a {}-D field", p.dim, f.grid().dim())));
    }
    let ghat = semiclassical_fourier(f, 1)?;
    let mut out = match &p.separable {
        Some(t) => apply_separable(t, f, &ghat)?,
        None => apply_general(&*p.p0, f, &ghat)?,
    };
    if let Some(p1) = &p.p1 {
        let lower = match &p.separable_p1 {
            Some(t) => apply_separable(t, f, &ghat)?,
            None => apply_general(&**p1, f, &ghat)?,
        };
        let h = f.hbar();
        for (o, v) in out.iter_mut().zip(lower) {
            *o += v * h;
        }
    }
    let res = f.with_values(out)?;
    // Output mass below 1e-10 of the input counts as roundoff, not aliasing.
    let (no, ni) = (res.norm().powi(2), f.norm().powi(2));
    let frac = res.nyquist_fraction() * no / no.max(1e-20 * ni).max(f64::MIN_POSITIVE);
    if frac > KN_ALIASING_TOL {
        return Err(Error::Aliasing { fraction: frac, context: "apply_kn output".to_string() });
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{coherent_state, inner_product, Grid, PhasePoint};

    fn coherent(hbar: f64) -> Field {
        let g = Grid::new(&[3.0], &[4096]).unwrap();
        coherent_state(&g, hbar, &PhasePoint::new(vec![0.3], vec![0.4]).unwrap()).unwrap()
    }

    #[test]
    fn identity_and_multiplication() {
        let f = coherent(1e-3);
        let id = SymbolOracle::from_expr("1", None, 1).unwrap();
        let r = apply_kn(&id, &f).unwrap();
        assert!(r.axpy(C64::new(-1.0, 0.0), &f).unwrap().norm() < 1e-10);
        let x = SymbolOracle::from_expr("x_1", None, 1).unwrap();
        let r = apply_kn(&x, &f).unwrap();
        let pts = f.grid().nodes(0);
        for (j, v) in r.values().iter().enumerate() {
            assert!((v - f.values()[j] * pts[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn momentum_expectation() {
        for &h in &[1e-2, 1e-3] {
            let f = coherent(h);
            let xi = SymbolOracle::from_expr("xi_1", None, 1).unwrap();
            let r = apply_kn(&xi, &f).unwrap();
            let e = inner_product(&f, &r).unwrap();
            assert!((e - C64::new(0.4, 0.0)).norm() < 10.0 * h);
        }
    }

    #[test]
    fn general_path_matches_separable() {
        let f = coherent(1e-2);
        let fast = SymbolOracle::from_expr("xi_1^2 + x_1*xi_1 + i*x_1", Some("x_1^2"), 1).unwrap();
        let e = Expr::parse("xi_1^2 + x_1*xi_1 + i*x_1").unwrap();
        let slow = SymbolOracle::from_fn(1, move |x, xi| e.eval(x, xi)).with_p1(|x, _| C64::new(x[0] * x[0], 0.0));
        let a = apply_kn(&fast, &f).unwrap();
        let b = apply_kn(&slow, &f).unwrap();
        let d = a.axpy(C64::new(-1.0, 0.0), &b).unwrap().norm();
        assert!(d < 1e-9 * a.norm(), "{d}");
    }

    #[test]
    fn subprincipal_and_jets() {
        let p = SymbolOracle::from_expr("x_1*xi_1 + sin(x_2)*xi_2^2", Some("x_1"), 2).unwrap();
        let (x, xi) = (vec![0.3, 0.7], vec![-0.2, 1.1]);
        let s = p.subprincipal(&x, &xi);
        let want = C64::new(0.3, 0.0) - C64::new(1.0 + 2.0 * 0.7f64.cos() * 1.1, 0.0) / C64::new(0.0, 2.0);
        assert!((s - want).norm() < 1e-12);
        p.check_invariants(&[(x, xi)]).unwrap();
    }

    #[test]
    fn nan_symbol_is_reported() {
        let f = coherent(1e-2);
        let p = SymbolOracle::from_fn(1, |x, _| if x[0] > 0.5 { C64::new(f64::NAN, 0.0) } else { C64::new(1.0, 0.0) });
        assert!(matches!(apply_kn(&p, &f), Err(Error::NonFinite(_))));
    }
}
