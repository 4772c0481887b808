//! Hamilton flows with the variational equation, metaplectic Gaussian
//! propagation, a split-step Schrödinger reference and orbit averages.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64 as C64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fft::{fft_axes, signed_index};
use crate::grid::{Field, Grid, PhasePoint};
use crate::metaplectic::{j_matrix, mp_apply, quadratic_weyl, sp_factor, symplectic_defect, Mat, SpMatrix};
use crate::quantize::SymbolOracle;
use crate::states::{place_profile, Profile};

/// Relative energy drift tolerated by [`hamilton_flow`].
pub const ENERGY_TOL: f64 = 1e-8;
/// Boundary-band mass that aborts the split-step solver.
pub const SPLIT_STEP_EDGE_TOL: f64 = 1e-8;

/// Point on a trajectory with its linearization S = dφ_t and the action ∫ξ·dx − H dt.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub z: PhasePoint,
    pub s: Mat,
    pub action: f64,
    pub t: f64,
    pub monitor: FlowMonitor,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowMonitor {
    pub energy_drift: f64,
    pub max_symplectic_defect: f64,
    pub reprojections: usize,
    pub steps: usize,
}

impl FlowState {
    pub fn initial(z0: &PhasePoint) -> Self {
        let n = z0.dim();
        Self { z: z0.clone(), s: Mat::identity(2 * n, 2 * n), action: 0.0, t: 0.0, monitor: FlowMonitor::default() }
    }

    pub fn sp_matrix(&self) -> Result<SpMatrix> {
        SpMatrix::new(self.s.clone())
    }
}

fn real_hessian(h: &SymbolOracle, x: &[f64], xi: &[f64]) -> (Vec<f64>, Mat) {
    let n = x.len();
    let j = h.jet(x, xi);
    let grad: Vec<f64> = j.dx.iter().chain(&j.dxi).map(|v| v.re).collect();
    let m = Mat::from_fn(2 * n, 2 * n, |a, b| match (a < n, b < n) {
        (true, true) => j.dxx[a][b].re,
        (true, false) => j.dxxi[a][b - n].re,
        (false, true) => j.dxxi[b][a - n].re,
        (false, false) => j.dxixi[a - n][b - n].re,
    });
    (grad, m)
}

/// Hessian of H at z in (x, ξ) order.
pub fn hessian(h: &SymbolOracle, z: &PhasePoint) -> Mat {
    real_hessian(h, &z.x, &z.xi).1
}

struct Packed {
    n: usize,
    y: Vec<f64>,
}

impl Packed {
    fn from_state(st: &FlowState) -> Self {
        let n = st.z.dim();
        let mut y = Vec::with_capacity(2 * n + 4 * n * n + 1);
        y.extend(&st.z.x);
        y.extend(&st.z.xi);
        for r in 0..2 * n {
            for c in 0..2 * n {
                y.push(st.s[(r, c)]);
            }
        }
        y.push(st.action);
        Self { n, y }
    }
}

fn rhs(h: &SymbolOracle, n: usize, y: &[f64]) -> Vec<f64> {
    let (x, xi) = (&y[..n], &y[n..2 * n]);
    let (g, m) = real_hessian(h, x, xi);
    let s = Mat::from_row_slice(2 * n, 2 * n, &y[2 * n..2 * n + 4 * n * n]);
    let ds = j_matrix(n) * m * s;
    let mut d = Vec::with_capacity(y.len());
    d.extend(&g[n..]);
    d.extend(g[..n].iter().map(|v| -v));
    for r in 0..2 * n {
        for c in 0..2 * n {
            d.push(ds[(r, c)]);
        }
    }
    let xdot: f64 = xi.iter().zip(&g[n..]).map(|(a, b)| a * b).sum();
    d.push(xdot - h.p0(x, xi).re);
    d
}

fn rk4(h: &SymbolOracle, p: &Packed, dt: f64) -> Vec<f64> {
    let n = p.n;
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * y).collect() };
    let k1 = rhs(h, n, &p.y);
    let k2 = rhs(h, n, &add(&p.y, &k1, dt / 2.0));
    let k3 = rhs(h, n, &add(&p.y, &k2, dt / 2.0));
    let k4 = rhs(h, n, &add(&p.y, &k3, dt));
    (0..p.y.len()).map(|i| p.y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
}

/// One RK4 step followed by the symplectic projection S ← S(I + ½JE) when needed.
pub fn flow_step(h: &SymbolOracle, st: &FlowState, dt: f64) -> FlowState {
    let n = st.z.dim();
    let y = rk4(h, &Packed::from_state(st), dt);
    let mut s = Mat::from_row_slice(2 * n, 2 * n, &y[2 * n..2 * n + 4 * n * n]);
    let t = st.t + dt;
    let mut mon = st.monitor.clone();
    let mut defect = symplectic_defect(&s);
    if defect > 1e-10 * t.abs().max(1e-3) {
        let j = j_matrix(n);
        let e = s.transpose() * &j * &s - &j;
        s = &s * (Mat::identity(2 * n, 2 * n) + 0.5 * &j * e);
        mon.reprojections += 1;
        defect = symplectic_defect(&s);
    }
    mon.max_symplectic_defect = mon.max_symplectic_defect.max(defect);
    mon.steps += 1;
    FlowState {
        z: PhasePoint { x: y[..n].to_vec(), xi: y[n..2 * n].to_vec() },
        s,
        action: y[2 * n + 4 * n * n],
        t,
        monitor: mon,
    }
}

fn check_real(h: &SymbolOracle, z: &PhasePoint) -> Result<()> {
    if h.dim() != z.dim() {
        return Err(Error::Dimension("Hamiltonian and phase point dimensions differ".to_string()));
    }
    let im = h.max_imag(&[(z.x.clone(), z.xi.clone())]);
    if im > 1e-12 {
        return Err(Error::InvalidArgument(format!("Hamiltonian has imaginary part {im:.3e}")));
    }
    Ok(())
}

fn integrate(h: &SymbolOracle, z0: &PhasePoint, t: f64, dt: f64) -> FlowState {
    let steps = (t.abs() / dt).ceil().max(1.0) as usize;
    let step = t / steps as f64;
    let mut st = FlowState::initial(z0);
    for _ in 0..steps {
        st = flow_step(h, &st, step);
    }
    st
}

/// RK4 flow to time t. The step is halved up to six times if the energy drift
/// exceeds ENERGY_TOL·(1 + |H(z0)|).
pub fn hamilton_flow(h: &SymbolOracle, z0: &PhasePoint, t: f64, dt: f64) -> Result<FlowState> {
    check_real(h, z0)?;
    if t == 0.0 {
        return Ok(FlowState::initial(z0));
    }
    if !(dt > 0.0) || dt > t.abs() / 100.0 {
        return Err(Error::InvalidArgument(format!("dt = {dt} must be positive and at most t/100")));
    }
    let e0 = h.p0(&z0.x, &z0.xi).re;
    let tol = ENERGY_TOL * (1.0 + e0.abs());
    let mut dt = dt;
    let mut drift = f64::INFINITY;
    for _ in 0..7 {
        let mut st = integrate(h, z0, t, dt);
        drift = (h.p0(&st.z.x, &st.z.xi).re - e0).abs();
        st.monitor.energy_drift = drift;
        if drift <= tol {
            return Ok(st);
        }
        log::debug!("energy drift {drift:.3e} at dt = {dt:.3e}; halving");
        dt /= 2.0;
    }
    Err(Error::EnergyDrift { drift })
}

/// First return time to z0 through the section ż(0)·(z − z0) = 0, refined by bisection.
pub fn find_period(h: &SymbolOracle, z0: &PhasePoint, dt: f64, t_max: f64) -> Result<f64> {
    check_real(h, z0)?;
    let n = z0.dim();
    let (g, _) = real_hessian(h, &z0.x, &z0.xi);
    let v0: Vec<f64> = g[n..].iter().copied().chain(g[..n].iter().map(|v| -v)).collect();
    let vn = v0.iter().map(|v| v * v).sum::<f64>().sqrt();
    if vn < 1e-14 {
        return Err(Error::NotPeriodic { distance: 0.0 });
    }
    let section = |z: &PhasePoint| -> f64 {
        z.x.iter().chain(&z.xi).zip(z0.x.iter().chain(&z0.xi)).zip(&v0).map(|((a, b), v)| (a - b) * v).sum()
    };
    let mut st = FlowState::initial(z0);
    let mut best = f64::INFINITY;
    let mut left = false;
    while st.t < t_max {
        let next = flow_step(h, &st, dt);
        let (s0, s1) = (section(&st.z), section(&next.z));
        let far = next.z.distance(z0);
        if far > 10.0 * dt * vn {
            left = true;
        }
        if left && s0 < 0.0 && s1 >= 0.0 {
            let (mut lo, mut hi) = (0.0, dt);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if section(&flow_step(h, &st, mid).z) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let tau = 0.5 * (lo + hi);
            let end = flow_step(h, &st, tau);
            let d = end.z.distance(z0);
            if d <= 1e-6 {
                return Ok(st.t + tau);
            }
            best = best.min(d);
        }
        st = next;
    }
    Err(Error::NotPeriodic { distance: best })
}

/// Gaussian-type state propagated by the flow and the metaplectic action of S_t.
#[derive(Clone, Debug)]
pub struct Propagated {
    pub field: Field,
    pub flow: FlowState,
    pub profile: Profile,
}

/// e^{iS_t/ℏ}·e^{iξ_t·(x−x_t)/ℏ}·ℏ^{−n/4}·[Mp(S_t)prof0]((x−x_t)/√ℏ).
pub fn propagate_gaussian(
    h: &SymbolOracle,
    z0: &PhasePoint,
    prof0: &Profile,
    t: f64,
    dt: f64,
    grid: &Grid,
    hbar: f64,
) -> Result<Propagated> {
    let flow = hamilton_flow(h, z0, t, dt)?;
    let profile = mp_apply(&sp_factor(&flow.sp_matrix()?)?, prof0)?;
    let field = place_profile(&profile, &flow.z, grid, hbar, 1.0)?.scaled(C64::from_polar(1.0, flow.action / hbar));
    Ok(Propagated { field, flow, profile })
}

/// (πℏ)^{−1/4}(1 + 2ict)^{−1/2}exp(−x²/(2ℏ(1 + 2ict))): exact evolution of the
/// normalized ground Gaussian under the symbol c·ξ².
pub fn free_gaussian(x: f64, hbar: f64, t: f64, c: f64) -> C64 {
    let w = C64::new(1.0, 2.0 * c * t);
    (PI * hbar).powf(-0.25) / w.sqrt() * (-C64::new(x * x, 0.0) / (w * 2.0 * hbar)).exp()
}

/// Strang splitting for iℏψ_t = −ℏ²Δψ + Vψ (classical symbol |ξ|² + V).
pub fn split_step_reference(v: &dyn Fn(&[f64]) -> f64, f: &Field, t: f64, dt: f64) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be positive".to_string()));
    }
    let g = f.grid().clone();
    let hbar = f.hbar();
    let sizes = g.sizes().to_vec();
    let axes: Vec<usize> = (0..g.dim()).collect();
    let steps = (t.abs() / dt).ceil() as usize;
    if steps == 0 {
        return Ok(f.clone());
    }
    let tau = t / steps as f64;
    let mut p = vec![0.0; g.dim()];
    let half_v: Vec<C64> = (0..g.len())
        .map(|j| {
            g.point(j, &mut p);
            C64::from_polar(1.0, -v(&p) * tau / (2.0 * hbar))
        })
        .collect();
    let mut idx = vec![0usize; g.dim()];
    let norm = 1.0 / g.len() as f64;
    let kin: Vec<C64> = (0..g.len())
        .map(|j| {
            g.multi_index(j, &mut idx);
            let k2: f64 = idx
                .iter()
                .enumerate()
                .map(|(a, &m)| {
                    let k = PI * signed_index(m, sizes[a]) as f64 / g.half_width(a);
                    k * k
                })
                .sum();
            C64::from_polar(norm, -hbar * k2 * tau)
        })
        .collect();
    let mut psi = f.values().to_vec();
    let check_every = (steps / 16).max(1);
    for step in 0..steps {
        for (x, m) in psi.iter_mut().zip(&half_v) {
            *x *= m;
        }
        fft_axes(&mut psi, &sizes, &axes, false);
        for (x, m) in psi.iter_mut().zip(&kin) {
            *x *= m;
        }
        fft_axes(&mut psi, &sizes, &axes, true);
        for (x, m) in psi.iter_mut().zip(&half_v) {
            *x *= m;
        }
        if (step + 1) % check_every == 0 || step + 1 == steps {
            let cur = Field::new(g.clone(), hbar, psi.clone())?;
            let edge = cur.boundary_fraction();
            if edge > SPLIT_STEP_EDGE_TOL {
                return Err(Error::BoxEscape { fraction: edge, context: format!("split step at t = {:.4}", tau * (step + 1) as f64) });
            }
        }
    }
    Field::new(g, hbar, psi)
}

/// |⟨f, g⟩|/(‖f‖‖g‖).
pub fn overlap(f: &Field, g: &Field) -> Result<f64> {
    Ok(crate::grid::inner_product(f, g)?.norm() / (f.norm() * g.norm()))
}

/// Result of [`orbit_average`].
#[derive(Clone, Debug)]
pub struct OrbitAverage {
    pub field: Field,
    pub period: f64,
    /// Demodulation energy: H(z0) shifted so the integrand is exactly T-periodic.
    pub lambda: f64,
    pub samples: usize,
}

/// ∫_0^T ρ(t)e^{iλt/ℏ}Ψ_t dt by the periodic trapezoid rule, Ψ_t the propagated
/// Gaussian with the Mp phase continued along the orbit.
#[allow(clippy::too_many_arguments)]
pub fn orbit_average(
    h: &SymbolOracle,
    z0: &PhasePoint,
    rho: &dyn Fn(f64) -> C64,
    n_steps: usize,
    prof0: &Profile,
    grid: &Grid,
    hbar: f64,
    dt: f64,
) -> Result<OrbitAverage> {
    if n_steps < 4 {
        return Err(Error::InvalidArgument("orbit_average needs at least 4 samples".to_string()));
    }
    let period = find_period(h, z0, dt, 1e3)?;
    let sub = (period / n_steps as f64 / dt).ceil().max(1.0) as usize;
    let step = period / (n_steps * sub) as f64;
    let e0 = h.p0(&z0.x, &z0.xi).re;
    let mut st = FlowState::initial(z0);
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(st.clone());
    for _ in 0..n_steps {
        for _ in 0..sub {
            st = flow_step(h, &st, step);
        }
        states.push(st.clone());
    }
    let drift = (h.p0(&st.z.x, &st.z.xi).re - e0).abs();
    if drift > ENERGY_TOL * (1.0 + e0.abs()) {
        return Err(Error::EnergyDrift { drift });
    }
    // Branch of Mp along the path: Pancharatnam alignment of consecutive
    // profiles times the dynamical phase −∫⟨q^W⟩.
    let mut profs: Vec<Profile> = Vec::with_capacity(n_steps + 1);
    let mut energies = Vec::with_capacity(n_steps + 1);
    let mut gamma = 0.0;
    let mut prev: Option<Profile> = None;
    for (j, s) in states.iter().enumerate() {
        let mut p = mp_apply(&sp_factor(&s.sp_matrix()?)?, prof0)?;
        if let Some(prev) = &prev {
            let ov = prev.inner(&p);
            if ov.norm() < 1e-3 * p.norm() * prev.norm() {
                return Err(Error::Resolution("consecutive orbit samples do not overlap".to_string()));
            }
            p = p.scaled(C64::from_polar(1.0, -ov.arg()));
        }
        let q = quadratic_weyl(&hessian(h, &s.z), &p)?;
        let e = p.inner(&q).re / p.inner(&p).re;
        if j > 0 {
            gamma -= 0.5 * (energies[j - 1] + e) * (s.t - states[j - 1].t);
        }
        energies.push(e);
        profs.push(p.scaled(C64::from_polar(1.0, gamma)));
        prev = Some(p);
    }
    let phase_of = |j: usize| (states[j].action + e0 * states[j].t) / hbar;
    let close = profs[0].inner(&profs[n_steps]);
    let theta = phase_of(n_steps) + close.arg();
    // Ties between two levels go to the lower one.
    let m = (theta / (2.0 * PI) - 0.5 - 1e-6).ceil();
    let delta = hbar * (2.0 * PI * m - theta) / period;
    let lambda = e0 + delta;
    let w = period / n_steps as f64;
    let mut acc = Field::zeros(grid.clone(), hbar);
    for j in 0..n_steps {
        let t = states[j].t;
        let c = rho(t) * C64::from_polar(w, phase_of(j) + delta * t / hbar);
        let fj = place_profile(&profs[j], &states[j].z, grid, hbar, 1.0)?;
        acc = acc.axpy(c, &fj)?;
    }
    Ok(OrbitAverage { field: acc, period, lambda, samples: n_steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{coherent_state, husimi_lattice};
    use crate::metaplectic::self_dual_grid;
    use crate::states::hermite_function;

    fn osc() -> SymbolOracle {
        SymbolOracle::from_expr("(x_1^2 + xi_1^2)/2", None, 1).unwrap()
    }

    fn ground(l: usize) -> Profile {
        let g = self_dual_grid(l, 256).unwrap();
        Profile::from_fn(&g, |u| C64::new(u.iter().map(|&v| hermite_function(0, v)).product(), 0.0))
    }

    #[test]
    fn harmonic_and_free_flows() {
        let z0 = PhasePoint::new(vec![1.0], vec![0.0]).unwrap();
        let st = hamilton_flow(&osc(), &z0, PI / 2.0, 1e-3).unwrap();
        assert!((st.z.x[0]).abs() < 1e-8 && (st.z.xi[0] + 1.0).abs() < 1e-8, "{:?}", st.z);
        let rot = SpMatrix::rotation(1, -PI / 2.0);
        let exact = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!((&st.s - &exact).amax() < 1e-8, "{} vs {}", st.s, rot.matrix());
        let free = SymbolOracle::from_expr("xi_1^2/2", None, 1).unwrap();
        let st = hamilton_flow(&free, &PhasePoint::new(vec![0.0], vec![1.0]).unwrap(), 1.0, 1e-3).unwrap();
        assert!((st.z.x[0] - 1.0).abs() < 1e-12 && (st.z.xi[0] - 1.0).abs() < 1e-12);
        assert!((&st.s - Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).amax() < 1e-12);
        assert!((st.action - 0.5).abs() < 1e-12);
        let st0 = hamilton_flow(&free, &z0, 0.0, 1e-3).unwrap();
        assert_eq!(st0.action, 0.0);
        assert_eq!(st0.s, Mat::identity(2, 2));
        assert!(hamilton_flow(&free, &z0, 1.0, 0.1).is_err());
    }

    #[test]
    fn period_of_oscillators() {
        let z0 = PhasePoint::new(vec![1.0], vec![0.0]).unwrap();
        let t = find_period(&osc(), &z0, 1e-3, 20.0).unwrap();
        assert!((t - 2.0 * PI).abs() < 1e-9, "{t}");
        let h = SymbolOracle::from_expr("xi_1^2 + x_1^2", None, 1).unwrap();
        let t = find_period(&h, &z0, 1e-3, 20.0).unwrap();
        assert!((t - PI).abs() < 1e-9, "{t}");
        let free = SymbolOracle::from_expr("xi_1^2", None, 1).unwrap();
        assert!(matches!(find_period(&free, &z0, 1e-2, 5.0), Err(Error::NotPeriodic { .. })));
    }

    #[test]
    fn propagation_matches_free_spreading() {
        let hbar = 1e-3;
        let grid = Grid::cube(1, 1.0, 1024).unwrap();
        let z0 = PhasePoint::origin(1);
        let free = SymbolOracle::from_expr("xi_1^2/2", None, 1).unwrap();
        let p0 = propagate_gaussian(&free, &z0, &ground(1), 0.0, 1e-3, &grid, hbar).unwrap();
        let cs = coherent_state(&grid, hbar, &z0).unwrap();
        assert!(p0.field.axpy(C64::new(-1.0, 0.0), &cs).unwrap().norm() < 1e-10);
        let p1 = propagate_gaussian(&free, &z0, &ground(1), 1.0, 1e-3, &grid, hbar).unwrap();
        let exact = Field::from_fn(grid.clone(), hbar, |x| free_gaussian(x[0], hbar, 1.0, 0.5)).unwrap();
        assert!(1.0 - overlap(&p1.field, &exact).unwrap() < 1e-6);
        assert!((p1.field.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn split_step_free_and_order() {
        let hbar = 1e-3;
        let grid = Grid::cube(1, 1.0, 1024).unwrap();
        let f0 = Field::from_fn(grid.clone(), hbar, |x| free_gaussian(x[0], hbar, 0.0, 1.0)).unwrap();
        let out = split_step_reference(&|_| 0.0, &f0, 0.5, 1e-3).unwrap();
        let exact = Field::from_fn(grid.clone(), hbar, |x| free_gaussian(x[0], hbar, 0.5, 1.0)).unwrap();
        assert!(out.axpy(C64::new(-1.0, 0.0), &exact).unwrap().norm() < 1e-8);
        let v = |x: &[f64]| x[0] * x[0] + x[0].powi(4);
        let z = PhasePoint::new(vec![0.2], vec![0.0]).unwrap();
        let g0 = coherent_state(&grid, hbar, &z).unwrap();
        let run = |dt: f64| split_step_reference(&v, &g0, 0.2, dt).unwrap();
        let reff = run(2.5e-4);
        let e1 = run(2e-3).axpy(C64::new(-1.0, 0.0), &reff).unwrap().norm();
        let e2 = run(1e-3).axpy(C64::new(-1.0, 0.0), &reff).unwrap().norm();
        assert!(e1 / e2 > 3.5 && e1 / e2 < 4.6, "{e1} {e2}");
    }

    #[test]
    fn orbit_average_concentrates_on_circle() {
        let hbar = 1e-3;
        let grid = Grid::cube(1, 2.0, 2048).unwrap();
        let z0 = PhasePoint::new(vec![1.0], vec![0.0]).unwrap();
        let one = |_: f64| C64::new(1.0, 0.0);
        let a = orbit_average(&osc(), &z0, &one, 256, &ground(1), &grid, hbar, 1e-3).unwrap();
        assert!((a.period - 2.0 * PI).abs() < 1e-9);
        let level = a.lambda / hbar - 0.5;
        assert!((level - level.round()).abs() < 1e-6, "{}", a.lambda);
        assert!((a.lambda - 0.5).abs() <= hbar / 2.0 + 1e-12);
        let hl = husimi_lattice(&a.field, 4, 4).unwrap();
        let near = hl.mass_where(|x, xi| ((x[0] * x[0] + xi[0] * xi[0]).sqrt() - 1.0).abs() <= 0.2);
        assert!(near / hl.total_mass() >= 0.9, "{}", near / hl.total_mass());
        let b = orbit_average(&osc(), &z0, &one, 512, &ground(1), &grid, hbar, 1e-3).unwrap();
        let d = a.field.axpy(C64::new(-1.0, 0.0), &b.field).unwrap().norm() / b.field.norm();
        assert!(d < 1e-6, "{d} {} {}", a.lambda, b.lambda);
    }

    #[test]
    fn orbit_average_norm_follows_mean_square_amplitude() {
        let hbar = 1e-3;
        let grid = Grid::cube(1, 2.0, 2048).unwrap();
        let z0 = PhasePoint::new(vec![1.0], vec![0.0]).unwrap();
        let one = |_: f64| C64::new(1.0, 0.0);
        let base = orbit_average(&osc(), &z0, &one, 256, &ground(1), &grid, hbar, 1e-3).unwrap();
        let t = base.period;
        let check = |rho: &dyn Fn(f64) -> C64, mean_sq: f64| {
            let a = orbit_average(&osc(), &z0, rho, 256, &ground(1), &grid, hbar, 1e-3).unwrap();
            let ratio = (a.field.norm() / base.field.norm()).powi(2);
            assert!((ratio - mean_sq).abs() < 0.05 * mean_sq, "{ratio} vs {mean_sq}");
        };
        check(&|s| C64::new((2.0 * PI * s / t).cos(), 0.0), 0.5);
        check(&|s| C64::new(1.0 + 0.5 * (4.0 * PI * s / t).sin(), 0.0), 1.125);
    }
}
