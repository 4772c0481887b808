//! Predicted symbols of P(Υ) at orders 0, 1/2, 1 and the ℏ-schedule harness
//! comparing them with extracted profiles of `apply_kn` output.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quantize::{apply_kn, Jet, SymbolOracle};
use crate::states::{
    build_model_state, check_geometric_schedule, extract_profile, loglog_slope, HalfInt, Profile, ProfileStack,
    SmoothProfile, Splitting, TWindow,
};

/// Minimum residual slope and maximum final residual for a passing harness.
pub const SLOPE_MIN: f64 = 0.4;
pub const RESIDUAL_MAX: f64 = 0.05;
const PRE_TOL: f64 = 1e-10;

/// A predicted rescaled symbol at `order` extra half-powers of ℏ.
#[derive(Clone, Debug)]
pub struct TransportPrediction {
    pub order: u8,
    pub profile: Profile,
}

/// Grid recipe for a schedule: fixed t-box, self-dual u-box at every ℏ.
#[derive(Clone, Debug, PartialEq)]
pub struct HarnessGrid {
    pub t_half_width: f64,
    pub t_size: usize,
    pub u_size: usize,
    pub window: Option<TWindow>,
}

impl HarnessGrid {
    /// Field grid at ℏ: u half-width √(πℏN_u/2), so field nodes are √ℏ·profile nodes.
    pub fn field_grid(&self, splitting: Splitting, hbar: f64) -> Result<Grid> {
        let mut hw = vec![self.t_half_width; splitting.k];
        let mut sz = vec![self.t_size; splitting.k];
        hw.extend(vec![Grid::self_dual_half_width(self.u_size, hbar); splitting.l]);
        sz.extend(vec![self.u_size; splitting.l]);
        Grid::new(&hw, &sz)
    }

    pub fn profile_grid(&self, splitting: Splitting) -> Result<Grid> {
        Grid::cube(splitting.l, Grid::self_dual_half_width(self.u_size, 1.0), self.u_size)
    }
}

/// Point s = (t_⋆, 0; 0, 0) as (x, ξ).
fn sigma0_point(splitting: Splitting, t_star: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut x = t_star.to_vec();
    x.extend(vec![0.0; splitting.l]);
    (x, vec![0.0; splitting.dim()])
}

fn require_small(what: &str, v: C64) -> Result<()> {
    if v.norm() > PRE_TOL {
        return Err(Error::Precondition { what: what.to_string(), magnitude: v.norm() });
    }
    Ok(())
}

/// Check the hypotheses of the requested order at s.
pub fn check_preconditions(jet: &Jet, splitting: Splitting, order: u8) -> Result<()> {
    if order >= 1 {
        require_small("p0(s)", jet.value)?;
    }
    if order >= 2 {
        for j in 0..splitting.l {
            require_small(&format!("dp0/du_{}", j + 1), jet.dx[splitting.k + j])?;
            require_small(&format!("dp0/dmu_{}", j + 1), jet.dxi[splitting.k + j])?;
        }
    }
    Ok(())
}

/// (u, μ)-Hessian of p0 at s as a 2l×2l complex matrix in (u, μ) block order.
pub fn normal_hessian(jet: &Jet, splitting: Splitting) -> DMatrix<C64> {
    let (k, l) = (splitting.k, splitting.l);
    let mut h = DMatrix::from_element(2 * l, 2 * l, C64::new(0.0, 0.0));
    for i in 0..l {
        for j in 0..l {
            h[(i, j)] = jet.dxx[k + i][k + j];
            h[(i, l + j)] = jet.dxxi[k + i][k + j];
            h[(l + j, i)] = jet.dxxi[k + i][k + j];
            h[(l + i, l + j)] = jet.dxixi[k + i][k + j];
        }
    }
    h
}

/// ½Σ[∂²_{u_iu_j}p0·u_iu_j·a0 + (2/i)∂²_{u_iμ_j}p0·u_i∂_ja0 − ∂²_{μ_iμ_j}p0·∂²_{ij}a0].
pub fn hessian_term(jet: &Jet, splitting: Splitting, a0: &Profile) -> Profile {
    let (k, l) = (splitting.k, splitting.l);
    let mi = C64::new(0.0, -1.0);
    let d1: Vec<Profile> = (0..l).map(|j| a0.derivative(j, 1)).collect();
    let mut out = a0.map(|u, v| {
        let mut q = C64::new(0.0, 0.0);
        for i in 0..l {
            for j in 0..l {
                q += jet.dxx[k + i][k + j] * u[i] * u[j];
            }
        }
        v * q * 0.5
    });
    let g = a0.grid.clone();
    let mut p = vec![0.0; l];
    for i in 0..l {
        for j in 0..l {
            let c_um = jet.dxxi[k + i][k + j];
            if c_um != C64::new(0.0, 0.0) {
                for (n, o) in out.values.iter_mut().enumerate() {
                    g.point(n, &mut p);
                    *o += mi * c_um * p[i] * d1[j].values[n];
                }
            }
            let c_mm = jet.dxixi[k + i][k + j];
            if c_mm != C64::new(0.0, 0.0) {
                let d2 = d1[i].derivative(j, 1);
                for (o, v) in out.values.iter_mut().zip(&d2.values) {
                    *o -= 0.5 * c_mm * v;
                }
            }
        }
    }
    out
}

/// Predicted rescaled symbol of P(Υ) at `order` ∈ {0, 1, 2}.
///
/// The t-derivative term of order 2 uses the analytic (or differenced)
/// t-gradient of `a0`.
pub fn transport_predict(
    p: &SymbolOracle,
    a0: &SmoothProfile,
    splitting: Splitting,
    t_star: &[f64],
    ugrid: &Grid,
    order: u8,
) -> Result<TransportPrediction> {
    if order > 2 {
        return Err(Error::InvalidArgument(format!("transport order {order} (expected 0, 1 or 2)")));
    }
    if t_star.len() != splitting.k || ugrid.dim() != splitting.l || p.dim() != splitting.dim() {
        return Err(Error::Dimension("t_star, profile grid or symbol do not match the splitting".to_string()));
    }
    let (x, xi) = sigma0_point(splitting, t_star);
    let jet = p.jet(&x, &xi);
    check_preconditions(&jet, splitting, order)?;
    let prof = a0.sample(ugrid, t_star);
    let (k, l) = (splitting.k, splitting.l);
    let mi = C64::new(0.0, -1.0);
    let profile = match order {
        0 => prof.scaled(jet.value),
        1 => {
            let mut out = prof.map(|u, v| {
                let s: C64 = (0..l).map(|j| jet.dx[k + j] * u[j]).sum();
                v * s
            });
            for j in 0..l {
                let c = jet.dxi[k + j];
                if c != C64::new(0.0, 0.0) {
                    out = out.axpy(mi * c, &prof.derivative(j, 1))?;
                }
            }
            out
        }
        _ => {
            let mut out = prof.scaled(p.p1(&x, &xi));
            for i in 0..k {
                let c = jet.dxi[i];
                if c != C64::new(0.0, 0.0) {
                    out = out.axpy(mi * c, &a0.sample_t_derivative(ugrid, t_star, i))?;
                }
            }
            out.axpy(C64::new(1.0, 0.0), &hessian_term(&jet, splitting, &prof))?
        }
    };
    Ok(TransportPrediction { order, profile })
}

/// Schedule measurements with a fitted slope and pass flag.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvergenceReport {
    pub label: alloc::string::String,
    pub hbars: Vec<f64>,
    pub residuals: Vec<f64>,
    pub slope: f64,
    pub final_residual: f64,
    pub slope_min: f64,
    pub residual_max: f64,
    pub pass: bool,
}

impl ConvergenceReport {
    pub fn from_residuals(label: &str, hbars: Vec<f64>, residuals: Vec<f64>) -> Self {
        Self::with_thresholds(label, hbars, residuals, SLOPE_MIN, RESIDUAL_MAX)
    }

    pub fn with_thresholds(label: &str, hbars: Vec<f64>, residuals: Vec<f64>, slope_min: f64, residual_max: f64) -> Self {
        let slope = loglog_slope(&hbars, &residuals);
        let final_residual = *residuals.last().unwrap_or(&f64::NAN);
        let pass = slope >= slope_min && final_residual <= residual_max && slope.is_finite();
        Self { label: label.to_string(), hbars, residuals, slope, final_residual, slope_min, residual_max, pass }
    }
}

impl core::fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "{}: slope {:.3} (>= {}), final residual {:.3e} (<= {})",
            self.label, self.slope, self.slope_min, self.final_residual, self.residual_max
        )
    }
}

/// Build, apply, extract at order r + order/2 and compare with the prediction at every ℏ.
pub fn transport_check(
    p: &SymbolOracle,
    stack: &ProfileStack,
    splitting: Splitting,
    order: u8,
    schedule: &[f64],
    grid: &HarnessGrid,
    t_star: &[f64],
) -> Result<ConvergenceReport> {
    check_geometric_schedule(schedule)?;
    let ugrid = grid.profile_grid(splitting)?;
    let pred = transport_predict(p, stack.leading(), splitting, t_star, &ugrid, order)?;
    let mut residuals = Vec::with_capacity(schedule.len());
    for &h in schedule {
        let st = build_model_state(stack, splitting, &grid.field_grid(splitting, h)?, h, grid.window)?;
        let out = apply_kn(p, &st.field)?;
        let shifted = st.with_field(out, st.order + HalfInt(order as i32));
        let got = extract_profile(&shifted, t_star, &ugrid)?;
        residuals.push(got.relative_error(&pred.profile)?);
    }
    Ok(ConvergenceReport::from_residuals(&format!("transport order {order}"), schedule.to_vec(), residuals))
}

/// Bounded-profile measurement for P∘Q(Υ) at order r+2.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegularityReport {
    pub hbars: Vec<f64>,
    /// ‖extracted profile at order r+2‖ per ℏ.
    pub norms: Vec<f64>,
    /// Log-log slope of the norms against ℏ; negative means growth as ℏ → 0.
    pub slope: f64,
    pub pass: bool,
}

/// Compose two symbols vanishing to second order on Σ₀ and check the order-(r+2) profile stays bounded.
pub fn regularity_check(
    p: &SymbolOracle,
    q: &SymbolOracle,
    stack: &ProfileStack,
    splitting: Splitting,
    schedule: &[f64],
    grid: &HarnessGrid,
    t_star: &[f64],
) -> Result<RegularityReport> {
    check_geometric_schedule(schedule)?;
    let ugrid = grid.profile_grid(splitting)?;
    let (x, xi) = sigma0_point(splitting, t_star);
    for o in [p, q] {
        check_preconditions(&o.jet(&x, &xi), splitting, 2)?;
    }
    let mut norms = Vec::with_capacity(schedule.len());
    for &h in schedule {
        let st = build_model_state(stack, splitting, &grid.field_grid(splitting, h)?, h, grid.window)?;
        let qf = apply_kn(q, &st.field)?;
        let pq = apply_kn(p, &qf)?;
        let shifted = st.with_field(pq, st.order + HalfInt(4));
        norms.push(extract_profile(&shifted, t_star, &ugrid)?.norm());
    }
    let slope = loglog_slope(schedule, &norms);
    let pass = slope >= -0.1 && norms.iter().all(|n| n.is_finite());
    Ok(RegularityReport { hbars: schedule.to_vec(), norms, slope, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metaplectic::{heisenberg_drho, quadratic_weyl, HeisenbergElement};
    use crate::states::hermite_profile;

    fn hg() -> HarnessGrid {
        HarnessGrid { t_half_width: 8.0, t_size: 64, u_size: 128, window: None }
    }

    #[test]
    fn order1_examples() {
        let sp = Splitting::new(0, 1).unwrap();
        let ug = hg().profile_grid(sp).unwrap();
        let a0 = hermite_profile(&[0], &[1.0]).unwrap();
        let g = a0.sample(&ug, &[]);
        let mu = SymbolOracle::from_expr("xi_1", None, 1).unwrap();
        let pr = transport_predict(&mu, &a0, sp, &[], &ug, 1).unwrap();
        let want = g.map(|u, v| -v * u[0] / C64::new(0.0, 1.0));
        assert!(pr.profile.relative_error(&want).unwrap() < 1e-10);
        let u = SymbolOracle::from_expr("x_1", None, 1).unwrap();
        let pr = transport_predict(&u, &a0, sp, &[], &ug, 1).unwrap();
        assert!(pr.profile.relative_error(&g.map(|u, v| v * u[0])).unwrap() < 1e-12);
        let bad = SymbolOracle::from_expr("1 + x_1", None, 1).unwrap();
        assert!(matches!(transport_predict(&bad, &a0, sp, &[], &ug, 1), Err(Error::Precondition { .. })));
    }

    #[test]
    fn order2_harmonic_identity() {
        let sp = Splitting::new(0, 1).unwrap();
        let ug = hg().profile_grid(sp).unwrap();
        let a0 = hermite_profile(&[0], &[1.0]).unwrap();
        let p = SymbolOracle::from_expr("x_1^2 + xi_1^2", None, 1).unwrap();
        let pr = transport_predict(&p, &a0, sp, &[], &ug, 2).unwrap();
        assert!(pr.profile.relative_error(&a0.sample(&ug, &[])).unwrap() < 1e-10);
        let lin = SymbolOracle::from_expr("x_1^2 + xi_1", None, 1).unwrap();
        assert!(transport_predict(&lin, &a0, sp, &[], &ug, 2).is_err());
    }

    #[test]
    fn heisenberg_and_hessian_identities() {
        let sp = Splitting::new(1, 1).unwrap();
        let ug = hg().profile_grid(sp).unwrap();
        let a0 = hermite_profile(&[1], &[1.2]).unwrap();
        let prof = a0.sample(&ug, &[0.5]);
        let p = SymbolOracle::from_expr("0.7*xi_2 - 1.3*x_2 + x_2*xi_1", None, 2).unwrap();
        let pr = transport_predict(&p, &a0, sp, &[0.5], &ug, 1).unwrap();
        let xi = HeisenbergElement { a: vec![C64::new(0.7, 0.0)], b: vec![C64::new(1.3, 0.0)], c: C64::new(0.0, 0.0) };
        let d = heisenberg_drho(&xi, &prof).unwrap();
        assert!(pr.profile.relative_error(&d).unwrap() < 1e-12);

        let q = SymbolOracle::from_expr("0.4*x_2^2 + 1.5*x_2*xi_2 + 0.8*xi_2^2", None, 2).unwrap();
        let jet = q.jet(&[0.5, 0.0], &[0.0, 0.0]);
        let line = hessian_term(&jet, sp, &prof);
        let h = normal_hessian(&jet, sp).map(|v| v.re);
        let w = quadratic_weyl(&h, &prof).unwrap();
        let shift = C64::new(0.0, 0.5) * h[(0, 1)];
        let want = w.axpy(shift, &prof).unwrap();
        assert!(line.relative_error(&want).unwrap() < 1e-10);
    }
}
