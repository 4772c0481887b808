//! Experiment dispatch. Config problems surface as [`RunError::Config`]; numerical
//! failures are recorded in the report, which is still written.

use std::f64::consts::PI;

use isoclass_core::dynamics::{
    find_period, flow_step, orbit_average, overlap, propagate_gaussian, split_step_reference, FlowState,
};
use isoclass_core::expr::Expr;
use isoclass_core::fio::{fio_convergence, partial_fourier_apply, Diffeo, ElementaryFio, QuadraticPhase};
use isoclass_core::grid::{coherent_state, husimi_lattice, Field, Grid, HusimiLattice, PhasePoint};
use isoclass_core::metaplectic::{metaplectic_check, mp_apply, self_dual_grid, sp_factor, test_profile, SpMatrix};
use isoclass_core::quantize::SymbolOracle;
use isoclass_core::quasimode::quasimode_sweep;
use isoclass_core::states::{
    build_model_state, check_geometric_schedule, hermite_function, loglog_slope, norm_relative_error, predicted_norm,
    wavefront_mass, HalfInt, Profile, ProfileStack, SmoothProfile, Splitting, TWindow,
};
use isoclass_core::symbolcalc::{transport_check, ConvergenceReport, HarnessGrid};
use isoclass_core::C64;
use rand_chacha::rand_core::SeedableRng;

use crate::config::*;
use crate::container::Container;
use crate::report::{Criterion, Report, Table, WordEntry};
use crate::RunError;

/// A finished run: the report and any binary dumps keyed by artifact suffix.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub dumps: Vec<(String, Container)>,
}

type Harness = isoclass_core::Result<()>;

fn bad(ctx: &str) -> impl Fn(isoclass_core::Error) -> RunError + '_ {
    move |e| RunError::Config(format!("{ctx}: {e}"))
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<(), RunError> {
    if ok {
        Ok(())
    } else {
        Err(RunError::Config(msg()))
    }
}

/// Validate the config, run the experiment and assemble its report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Outcome, RunError> {
    let mut out = Outcome { report: Report::new(config), dumps: Vec::new() };
    let result = match config {
        ExperimentConfig::TransportCheck(c) => {
            let p = TransportPrep::new(c)?;
            p.run(&mut out)
        }
        ExperimentConfig::NormCheck(c) => {
            let p = NormPrep::new(c)?;
            p.run(&mut out)
        }
        ExperimentConfig::MetaplecticCheck(c) => {
            let p = MetaplecticPrep::new(c)?;
            p.run(&mut out)
        }
        ExperimentConfig::FioCheck(c) => {
            let p = FioPrep::new(c)?;
            p.run(&mut out)
        }
        ExperimentConfig::Propagate(c) => {
            let p = PropagatePrep::new(c)?;
            p.run(&mut out)
        }
        ExperimentConfig::OrbitAverage(c) => {
            let p = OrbitPrep::new(c)?;
            p.run(&mut out)
        }
        ExperimentConfig::Quasimode(c) => {
            let p = QuasimodePrep::new(c)?;
            p.run(&mut out)
        }
        ExperimentConfig::HusimiDump(c) => {
            let p = HusimiPrep::new(c)?;
            p.run(&mut out)
        }
    };
    if let Err(e) = result {
        out.report.error = Some(e.to_string());
    }
    out.report.finalize();
    Ok(out)
}

fn splitting(c: &SplittingConfig) -> Result<Splitting, RunError> {
    Splitting::new(c.k, c.l).map_err(bad("splitting"))
}

fn harness_grid(c: &HarnessGridConfig, sp: Splitting, schedule: &[f64]) -> Result<HarnessGrid, RunError> {
    let window = c.window.map(|w| TWindow::new(w.flat, w.edge)).transpose().map_err(bad("grid.window"))?;
    let g = HarnessGrid { t_half_width: c.t_half_width, t_size: c.t_size, u_size: c.u_size, window };
    g.profile_grid(sp).map_err(bad("grid"))?;
    for &h in schedule {
        g.field_grid(sp, h).map_err(bad("grid"))?;
    }
    Ok(g)
}

fn schedule(s: &[f64]) -> Result<(), RunError> {
    check_geometric_schedule(s).map_err(bad("schedule"))
}

fn point(c: &PointConfig, ctx: &str) -> Result<PhasePoint, RunError> {
    PhasePoint::new(c.x.clone(), c.xi.clone()).map_err(bad(ctx))
}

fn t_star(t: &[f64], sp: Splitting) -> Result<(), RunError> {
    require(t.len() == sp.k, || format!("t_star has {} entries, splitting has k = {}", t.len(), sp.k))
}

fn hermite_sum(terms: &[HermiteTerm], sp: Splitting) -> Result<SmoothProfile, RunError> {
    require(!terms.is_empty(), || "stack: empty profile term".to_string())?;
    for t in terms {
        require(t.hermite.len() == sp.l, || format!("stack: Hermite index {:?} needs {} entries", t.hermite, sp.l))?;
        require(t.t_width > 0.0 && t.t_width.is_finite(), || format!("stack: t_width {} must be positive", t.t_width))?;
    }
    let terms: Vec<HermiteTerm> = terms.to_vec();
    let u_part = |t: &HermiteTerm, u: &[f64]| -> C64 {
        let h: f64 = t.hermite.iter().zip(u).map(|(&m, &x)| hermite_function(m, x)).product();
        C64::new(t.re, t.im) * h
    };
    let g = |t: &HermiteTerm, s: &[f64]| (-s.iter().map(|v| v * v).sum::<f64>() / (2.0 * t.t_width * t.t_width)).exp();
    let grad_terms = terms.clone();
    Ok(SmoothProfile::new(move |s, u| terms.iter().map(|t| u_part(t, u) * g(t, s)).sum()).with_t_gradient(move |s, u| {
        let mut out = vec![C64::new(0.0, 0.0); s.len()];
        for t in &grad_terms {
            let v = u_part(t, u) * g(t, s);
            for (o, &si) in out.iter_mut().zip(s) {
                *o -= v * (si / (t.t_width * t.t_width));
            }
        }
        out
    }))
}

fn stack(c: &StackConfig, sp: Splitting) -> Result<ProfileStack, RunError> {
    let order = HalfInt::from_f64(c.order).map_err(bad("stack.order"))?;
    let terms = c.terms.iter().map(|t| hermite_sum(t, sp)).collect::<Result<Vec<_>, _>>()?;
    ProfileStack::new(order, terms).map_err(bad("stack"))
}

fn oracle(src: &str, sub: Option<&str>, dim: usize, ctx: &str) -> Result<SymbolOracle, RunError> {
    SymbolOracle::from_expr(src, sub, dim).map_err(bad(ctx))
}

fn ground_profile(n: usize) -> Profile {
    let g = self_dual_grid(n, if n == 1 { 256 } else { 64 }).unwrap_or_else(|e| unreachable!("{e}"));
    Profile::from_fn(&g, |u| C64::new(u.iter().map(|&x| hermite_function(0, x)).product(), 0.0))
}

fn convergence_rows(r: &ConvergenceReport) -> Table {
    let mut t = Table::new("residuals", &["hbar", "residual"]);
    for (&h, &v) in r.hbars.iter().zip(&r.residuals) {
        t.push(vec![h, v]);
    }
    t
}

fn convergence_criteria(out: &mut Outcome, r: &ConvergenceReport, th: &ConvergenceThresholds) {
    out.report.fits.insert("residual_slope".into(), r.slope);
    out.report.criteria.push(Criterion::at_least("residual slope", r.slope, th.slope_min));
    out.report.criteria.push(Criterion::at_most("final residual", r.final_residual, th.residual_max));
}

struct TransportPrep<'a> {
    c: &'a TransportConfig,
    p: SymbolOracle,
    sp: Splitting,
    grid: HarnessGrid,
    stack: ProfileStack,
}

impl<'a> TransportPrep<'a> {
    fn new(c: &'a TransportConfig) -> Result<Self, RunError> {
        let sp = splitting(&c.splitting)?;
        let p = oracle(&c.symbol, c.symbol_sub.as_deref(), sp.dim(), "symbol")?;
        require(c.order <= 2, || format!("order {} is not one of 0, 1, 2", c.order))?;
        schedule(&c.schedule)?;
        t_star(&c.t_star, sp)?;
        let grid = harness_grid(&c.grid, sp, &c.schedule)?;
        let stack = stack(&c.stack, sp)?;
        Ok(Self { c, p, sp, grid, stack })
    }

    fn run(&self, out: &mut Outcome) -> Harness {
        let c = self.c;
        let r = transport_check(&self.p, &self.stack, self.sp, c.order, &c.schedule, &self.grid, &c.t_star)?;
        out.report.tables.push(convergence_rows(&r));
        convergence_criteria(out, &r, &c.thresholds);
        Ok(())
    }
}

struct NormPrep<'a> {
    c: &'a NormConfig,
    sp: Splitting,
    grid: HarnessGrid,
    stack: ProfileStack,
}

impl<'a> NormPrep<'a> {
    fn new(c: &'a NormConfig) -> Result<Self, RunError> {
        let sp = splitting(&c.splitting)?;
        require(c.schedule.len() >= 2, || "norm-check needs at least two hbar values".to_string())?;
        require(c.schedule.iter().all(|&h| h > 0.0), || "hbar values must be positive".to_string())?;
        let grid = harness_grid(&c.grid, sp, &c.schedule)?;
        let stack = stack(&c.stack, sp)?;
        Ok(Self { c, sp, grid, stack })
    }

    fn run(&self, out: &mut Outcome) -> Harness {
        let c = self.c;
        let mut t = Table::new("norms", &["hbar", "norm", "predicted", "relative_error"]);
        let mut errs = Vec::new();
        for &h in &c.schedule {
            let st = build_model_state(&self.stack, self.sp, &self.grid.field_grid(self.sp, h)?, h, self.grid.window)?;
            let e = norm_relative_error(&st)?;
            t.push(vec![h, st.field.norm(), predicted_norm(&st)?, e]);
            errs.push(e);
        }
        out.report.tables.push(t);
        let slope = loglog_slope(&c.schedule, &errs);
        let th = &c.thresholds;
        out.report.fits.insert("relative_error_slope".into(), slope);
        out.report.criteria.push(Criterion::at_most("|slope - target|", (slope - th.slope_target).abs(), th.slope_tol));
        out.report.criteria.push(Criterion::at_most("final relative error", *errs.last().unwrap_or(&f64::NAN), th.final_max));
        Ok(())
    }
}

struct MetaplecticPrep<'a> {
    c: &'a MetaplecticConfig,
    matrices: Vec<SpMatrix>,
}

impl<'a> MetaplecticPrep<'a> {
    fn new(c: &'a MetaplecticConfig) -> Result<Self, RunError> {
        let mut matrices = Vec::with_capacity(c.matrices.len());
        for (i, rows) in c.matrices.iter().enumerate() {
            let n = rows.len();
            require(n >= 2 && n % 2 == 0 && rows.iter().all(|r| r.len() == n), || {
                format!("matrices[{i}] must be a square 2l x 2l list of rows")
            })?;
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            matrices.push(SpMatrix::from_row_major(n / 2, &flat).map_err(bad(&format!("matrices[{i}]")))?);
        }
        Ok(Self { c, matrices })
    }

    fn run(&self, out: &mut Outcome) -> Harness {
        let c = self.c;
        out.report.seed = Some(c.seed);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(c.seed);
        let r = metaplectic_check(&mut rng, c.samples)?;
        let mut t = Table::new(
            "summary",
            &["samples", "factor_error", "max_word_length", "unitarity_error", "intertwining_defect", "projective_defect"],
        );
        t.push(vec![
            r.samples as f64,
            r.factor_error,
            r.max_word_length as f64,
            r.unitarity_error,
            r.intertwining_defect,
            r.projective_defect,
        ]);
        out.report.tables.push(t);
        let (mut factor, mut length, mut unitarity) = (r.factor_error, r.max_word_length, r.unitarity_error);
        if !self.matrices.is_empty() {
            let mut mt = Table::new("matrices", &["index", "l", "word_length", "factor_error", "unitarity_error"]);
            for (i, s) in self.matrices.iter().enumerate() {
                let w = sp_factor(s)?;
                let fe = (w.matrix() - s.matrix()).amax();
                let prof = test_profile(s.l());
                let ue = (mp_apply(&w, &prof)?.norm() - prof.norm()).abs() / prof.norm();
                mt.push(vec![i as f64, s.l() as f64, w.len() as f64, fe, ue]);
                factor = factor.max(fe);
                length = length.max(w.len());
                unitarity = unitarity.max(ue);
                out.report.words.push(WordEntry::from_word(&w));
            }
            out.report.tables.push(mt);
        }
        let cr = &mut out.report.criteria;
        cr.push(Criterion::at_most("factorization reconstruction", factor, 1e-10));
        cr.push(Criterion::at_most("word length", length as f64, 6.0));
        cr.push(Criterion::at_most("unitarity", unitarity, 1e-8));
        cr.push(Criterion::at_most("Heisenberg intertwining", r.intertwining_defect, 1e-6));
        cr.push(Criterion::at_most("projective homomorphism", r.projective_defect, 1e-6));
        Ok(())
    }
}

struct FioPrep<'a> {
    c: &'a FioConfig,
    op: ElementaryFio,
    sp: Splitting,
    grid: HarnessGrid,
    stack: ProfileStack,
}

impl<'a> FioPrep<'a> {
    fn new(c: &'a FioConfig) -> Result<Self, RunError> {
        let sp = splitting(&c.splitting)?;
        let op = match &c.operator {
            FioOperator::QuadraticPhase { phase } => {
                ElementaryFio::QuadraticPhase(QuadraticPhase::from_expr(phase, sp).map_err(bad("operator.phase"))?)
            }
            FioOperator::PartialFourier => ElementaryFio::PartialFourier,
            FioOperator::Pullback { forward, inverse } => {
                require(forward.len() == sp.dim(), || format!("operator.forward needs {} components", sp.dim()))?;
                let fw: Vec<&str> = forward.iter().map(String::as_str).collect();
                let inv: Option<Vec<&str>> = inverse.as_ref().map(|v| v.iter().map(String::as_str).collect());
                ElementaryFio::Pullback(Diffeo::from_exprs(&fw, inv.as_deref()).map_err(bad("operator"))?)
            }
        };
        schedule(&c.schedule)?;
        t_star(&c.t_star, sp)?;
        let mut all = c.schedule.clone();
        if let Some(w) = &c.wavefront {
            require(w.hbars.len() >= 2 && w.hbars.iter().all(|&h| h > 0.0), || "wavefront.hbars needs two positive values".into())?;
            require(w.radius > 0.0, || "wavefront.radius must be positive".into())?;
            all.extend(&w.hbars);
        }
        let grid = harness_grid(&c.grid, sp, &all)?;
        let stack = stack(&c.stack, sp)?;
        Ok(Self { c, op, sp, grid, stack })
    }

    fn run(&self, out: &mut Outcome) -> Harness {
        let c = self.c;
        let r = fio_convergence(&self.op, &self.stack, self.sp, &c.schedule, &self.grid, &c.t_star)?;
        out.report.tables.push(convergence_rows(&r));
        convergence_criteria(out, &r, &c.thresholds);
        if matches!(self.op, ElementaryFio::PartialFourier) {
            let mut t = Table::new("unitarity", &["hbar", "relative_norm_change"]);
            let mut worst = 0.0f64;
            for &h in &c.schedule {
                let st = self.build(h)?;
                let ft = partial_fourier_apply(&st)?;
                let d = (ft.field.norm() - st.field.norm()).abs() / st.field.norm();
                worst = worst.max(d);
                t.push(vec![h, d]);
            }
            out.report.tables.push(t);
            out.report.criteria.push(Criterion::at_most("partial Fourier unitarity", worst, c.unitarity_max));
        }
        if let Some(w) = &c.wavefront {
            let mut t = Table::new("wavefront", &["hbar", "before", "after"]);
            let (mut before, mut after) = (Vec::new(), Vec::new());
            for &h in &w.hbars {
                let st = self.build(h)?;
                let b = wavefront_mass(&st, w.radius)?;
                let a = wavefront_mass(&self.op.apply(&st)?, w.radius)?;
                t.push(vec![h, b, a]);
                before.push(b);
                after.push(a);
            }
            out.report.tables.push(t);
            let drop = |m: &[f64]| m.windows(2).map(|p| p[0] / p[1]).fold(f64::INFINITY, f64::min);
            out.report.criteria.push(Criterion::at_least("wavefront drop before", drop(&before), w.min_drop));
            out.report.criteria.push(Criterion::at_least("wavefront drop after", drop(&after), w.min_drop));
        }
        Ok(())
    }

    fn build(&self, h: f64) -> isoclass_core::Result<isoclass_core::states::IsotropicState> {
        build_model_state(&self.stack, self.sp, &self.grid.field_grid(self.sp, h)?, h, self.grid.window)
    }
}

/// Σ ξ_i² + V, the symbol of −ℏ²Δ + V.
fn schrodinger_symbol(potential: &str, n: usize, ctx: &str) -> Result<(SymbolOracle, SymbolOracle), RunError> {
    let v = oracle(potential, None, n, ctx)?;
    let kinetic: Vec<String> = (1..=n).map(|i| format!("xi_{i}^2")).collect();
    let h = oracle(&format!("{} + ({potential})", kinetic.join(" + ")), None, n, ctx)?;
    Ok((h, v))
}

fn cube(b: &BoxConfig, n: usize, ctx: &str) -> Result<Grid, RunError> {
    Grid::cube(n, b.half_width, b.size).map_err(bad(ctx))
}

struct PropagatePrep<'a> {
    c: &'a PropagateConfig,
    h: SymbolOracle,
    v: SymbolOracle,
    z0: PhasePoint,
    grid: Grid,
}

impl<'a> PropagatePrep<'a> {
    fn new(c: &'a PropagateConfig) -> Result<Self, RunError> {
        let z0 = point(&c.z0, "z0")?;
        let (h, v) = schrodinger_symbol(&c.potential, z0.dim(), "potential")?;
        let grid = cube(&c.grid, z0.dim(), "grid")?;
        require(!c.hbars.is_empty() && c.hbars.iter().all(|&h| h > 0.0), || "hbars must be positive and non-empty".into())?;
        require(c.time > 0.0 && c.pde_dt > 0.0 && c.flow_dt > 0.0, || "time, flow_dt and pde_dt must be positive".into())?;
        require(c.trajectory_samples > 0, || "trajectory_samples must be positive".into())?;
        Ok(Self { c, h, v, z0, grid })
    }

    fn run(&self, out: &mut Outcome) -> Harness {
        let c = self.c;
        let n = self.z0.dim();
        let prof0 = ground_profile(n);
        let v = |x: &[f64]| self.v.p0(x, &vec![0.0; x.len()]).re;
        let mut t = Table::new(
            "sweep",
            &["hbar", "overlap", "defect", "center_distance", "center_over_sqrt_hbar", "energy_drift", "symplectic_defect"],
        );
        let (mut defects, mut centers, mut overlaps) = (Vec::new(), Vec::new(), Vec::new());
        for &hb in &c.hbars {
            let tg = propagate_gaussian(&self.h, &self.z0, &prof0, c.time, c.flow_dt, &self.grid, hb)?;
            let pde = split_step_reference(&v, &coherent_state(&self.grid, hb, &self.z0)?, c.time, c.pde_dt)?;
            let ov = overlap(&tg.field, &pde)?;
            let dist = husimi_lattice(&pde, 2, 2)?.peak().distance(&tg.flow.z);
            let m = &tg.flow.monitor;
            t.push(vec![hb, ov, 1.0 - ov, dist, dist / hb.sqrt(), m.energy_drift, m.max_symplectic_defect]);
            defects.push(1.0 - ov);
            centers.push(dist / hb.sqrt());
            overlaps.push(ov);
        }
        out.report.tables.push(t);
        out.report.tables.push(self.trajectory());
        let constant = c.hbars.iter().zip(&defects).map(|(h, d)| d / h.sqrt()).fold(0.0, f64::max);
        out.report.fits.insert("defect_over_sqrt_hbar".into(), constant);
        let th = &c.thresholds;
        let cr = &mut out.report.criteria;
        if c.hbars.len() >= 2 {
            let slope = loglog_slope(&c.hbars, &defects);
            out.report.fits.insert("defect_slope".into(), slope);
            cr.push(Criterion::at_least("overlap defect slope", slope, th.slope_min));
        }
        if th.overlap_min > 0.0 {
            cr.push(Criterion::at_least("minimum overlap", overlaps.iter().copied().fold(f64::INFINITY, f64::min), th.overlap_min));
        }
        cr.push(Criterion::at_most("Husimi peak offset / sqrt(hbar)", centers.iter().copied().fold(0.0, f64::max), th.center_sqrt_hbar));
        Ok(())
    }

    fn trajectory(&self) -> Table {
        let n = self.z0.dim();
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=n).map(|i| format!("x_{i}")));
        cols.extend((1..=n).map(|i| format!("xi_{i}")));
        cols.push("energy".into());
        let mut t = Table::with_columns("trajectory", cols);
        let samples = self.c.trajectory_samples;
        let sub = (self.c.time / samples as f64 / self.c.flow_dt).ceil().max(1.0) as usize;
        let dt = self.c.time / (samples * sub) as f64;
        let mut st = FlowState::initial(&self.z0);
        let row = |st: &FlowState| {
            let mut r = vec![st.t];
            r.extend(&st.z.x);
            r.extend(&st.z.xi);
            r.push(self.h.p0(&st.z.x, &st.z.xi).re);
            r
        };
        t.push(row(&st));
        for _ in 0..samples {
            for _ in 0..sub {
                st = flow_step(&self.h, &st, dt);
            }
            t.push(row(&st));
        }
        t
    }
}

struct OrbitPrep<'a> {
    c: &'a OrbitConfig,
    h: SymbolOracle,
    rho: Expr,
    z0: PhasePoint,
    grid: Grid,
}

impl<'a> OrbitPrep<'a> {
    fn new(c: &'a OrbitConfig) -> Result<Self, RunError> {
        let z0 = point(&c.z0, "z0")?;
        let h = oracle(&c.hamiltonian, None, z0.dim(), "hamiltonian")?;
        let rho = Expr::parse(&c.rho).map_err(bad("rho"))?;
        require(!rho.depends_on_xi() && rho.arity() <= 1, || "rho may depend on x_1 (the orbit angle) only".into())?;
        let grid = cube(&c.grid, z0.dim(), "grid")?;
        require(c.hbar > 0.0 && c.flow_dt > 0.0, || "hbar and flow_dt must be positive".into())?;
        require(c.husimi_stride > 0 && c.samples >= 4, || "husimi_stride must be positive and samples at least 4".into())?;
        Ok(Self { c, h, rho, z0, grid })
    }

    fn run(&self, out: &mut Outcome) -> Harness {
        let c = self.c;
        let n = self.z0.dim();
        let period = find_period(&self.h, &self.z0, c.flow_dt, 1e3)?;
        let rho = |t: f64| self.rho.eval(&[2.0 * PI * t / period], &[]);
        let avg = orbit_average(&self.h, &self.z0, &rho, c.samples, &ground_profile(n), &self.grid, c.hbar, c.flow_dt)?;
        let orbit = self.orbit(avg.period);
        let lattice = husimi_lattice(&avg.field, c.husimi_stride, c.husimi_stride)?;
        let r2 = c.tube_radius * c.tube_radius;
        let near = lattice.mass_where(|x, xi| {
            orbit.iter().any(|z| {
                let d: f64 = x.iter().zip(&z.x).chain(xi.iter().zip(&z.xi)).map(|(a, b)| (a - b) * (a - b)).sum();
                d <= r2
            })
        });
        let total = lattice.total_mass();
        let mut t = Table::new("summary", &["period", "lambda", "norm", "husimi_mass", "tube_mass", "tube_fraction"]);
        t.push(vec![avg.period, avg.lambda, avg.field.norm(), total, near, near / total]);
        out.report.tables.push(t);
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=n).map(|i| format!("x_{i}")));
        cols.extend((1..=n).map(|i| format!("xi_{i}")));
        let mut ot = Table::with_columns("orbit", cols);
        for (j, z) in orbit.iter().enumerate() {
            let mut r = vec![avg.period * j as f64 / orbit.len() as f64];
            r.extend(&z.x);
            r.extend(&z.xi);
            ot.push(r);
        }
        out.report.tables.push(ot);
        out.report.criteria.push(Criterion::at_least("Husimi mass near the orbit", near / total, c.tube_mass_min));
        push_dump(out, "field", Container::from_field(&avg.field));
        Ok(())
    }

    fn orbit(&self, period: f64) -> Vec<PhasePoint> {
        let m = 512;
        let sub = (period / m as f64 / self.c.flow_dt).ceil().max(1.0) as usize;
        let dt = period / (m * sub) as f64;
        let mut st = FlowState::initial(&self.z0);
        let mut pts = Vec::with_capacity(m);
        for _ in 0..m {
            pts.push(st.z.clone());
            for _ in 0..sub {
                st = flow_step(&self.h, &st, dt);
            }
        }
        pts
    }
}

fn push_dump(out: &mut Outcome, suffix: &str, c: Container) {
    out.report.artifacts.push(format!("{}.{suffix}.bin", out.report.experiment));
    out.dumps.push((suffix.to_string(), c));
}

struct QuasimodePrep<'a> {
    c: &'a QuasimodeConfig,
    a: SymbolOracle,
    p: PhasePoint,
}

impl<'a> QuasimodePrep<'a> {
    fn new(c: &'a QuasimodeConfig) -> Result<Self, RunError> {
        let p = point(&c.point, "point")?;
        let a = oracle(&c.symbol, None, p.dim(), "symbol")?;
        require(!c.hbars.is_empty() && c.hbars.iter().all(|&h| h > 0.0), || "hbars must be positive and non-empty".into())?;
        require(c.n_max <= isoclass_core::quasimode::MAX_ORDER, || {
            format!("n_max {} exceeds {}", c.n_max, isoclass_core::quasimode::MAX_ORDER)
        })?;
        Ok(Self { c, a, p })
    }

    fn run(&self, out: &mut Outcome) -> Harness {
        let c = self.c;
        let sw = quasimode_sweep(&self.a, &self.p, c.n_max, &c.hbars)?;
        let mut t = Table::new("ratios", &["N", "hbar", "ratio", "slope"]);
        for (k, (rs, &s)) in sw.ratios.iter().zip(&sw.slopes).enumerate() {
            for (&h, &r) in c.hbars.iter().zip(rs) {
                t.push(vec![k as f64, h, r, s]);
            }
            out.report.fits.insert(format!("slope_N{k}"), s);
        }
        out.report.tables.push(t);
        if c.hbars.len() >= 2 {
            for (k, (&s, &min)) in sw.slopes.iter().zip(&c.slope_min).enumerate() {
                out.report.criteria.push(Criterion::at_least(&format!("residual slope N={k}"), s, min));
            }
        }
        if let Some(max) = c.ratio_max {
            let last = sw.ratios[c.n_max].last().copied().unwrap_or(f64::NAN);
            out.report.criteria.push(Criterion::at_most(&format!("ratio N={} at smallest hbar", c.n_max), last, max));
        }
        Ok(())
    }
}

struct HusimiPrep<'a> {
    c: &'a HusimiConfig,
    z0: PhasePoint,
    h: Option<SymbolOracle>,
    grid: Grid,
}

impl<'a> HusimiPrep<'a> {
    fn new(c: &'a HusimiConfig) -> Result<Self, RunError> {
        let (z0, h) = match &c.state {
            HusimiSource::Coherent { z0 } => (point(z0, "state.z0")?, None),
            HusimiSource::Propagated { potential, z0, time, flow_dt } => {
                let z = point(z0, "state.z0")?;
                require(*time > 0.0 && *flow_dt > 0.0, || "state.time and state.flow_dt must be positive".into())?;
                let (h, _) = schrodinger_symbol(potential, z.dim(), "state.potential")?;
                (z, Some(h))
            }
        };
        let grid = cube(&c.grid, z0.dim(), "grid")?;
        require(c.hbar > 0.0, || "hbar must be positive".into())?;
        require(c.x_stride > 0 && c.xi_stride > 0, || "strides must be positive".into())?;
        Ok(Self { c, z0, h, grid })
    }

    fn field(&self) -> isoclass_core::Result<Field> {
        match (&self.c.state, &self.h) {
            (HusimiSource::Propagated { time, flow_dt, .. }, Some(h)) => {
                Ok(propagate_gaussian(h, &self.z0, &ground_profile(self.z0.dim()), *time, *flow_dt, &self.grid, self.c.hbar)?.field)
            }
            _ => coherent_state(&self.grid, self.c.hbar, &self.z0),
        }
    }

    fn run(&self, out: &mut Outcome) -> Harness {
        let c = self.c;
        let f = self.field()?;
        let lat = husimi_lattice(&f, c.x_stride, c.xi_stride)?;
        let norm2 = f.norm().powi(2);
        let total = lat.total_mass();
        let peak = lat.peak();
        let n = self.z0.dim();
        let mut cols: Vec<String> = vec!["norm_squared".into(), "husimi_mass".into()];
        cols.extend((1..=n).map(|i| format!("peak_x_{i}")));
        cols.extend((1..=n).map(|i| format!("peak_xi_{i}")));
        let mut t = Table::with_columns("summary", cols);
        let mut row = vec![norm2, total];
        row.extend(&peak.x);
        row.extend(&peak.xi);
        t.push(row);
        out.report.tables.push(t);
        out.report.criteria.push(Criterion::at_most("relative Husimi mass defect", (total - norm2).abs() / norm2, c.mass_tol));
        push_dump(out, "husimi", husimi_container(&lat, &self.grid, c));
        push_dump(out, "field", Container::from_field(&f));
        Ok(())
    }
}

/// Density on the 2n-dimensional lattice: position axes, then momentum axes.
fn husimi_container(lat: &HusimiLattice, g: &Grid, c: &HusimiConfig) -> Container {
    let n = g.dim();
    let mut sizes: Vec<usize> = g.sizes().iter().map(|&s| (s / c.x_stride).max(1)).collect();
    sizes.extend(g.sizes().iter().map(|&s| (s / c.xi_stride).max(1)));
    let mut half_widths = g.half_widths().to_vec();
    half_widths.extend((0..n).map(|a| g.nyquist_momentum(a, c.hbar)));
    let values = lat.density.iter().flatten().map(|&d| C64::new(d, 0.0)).collect();
    Container { sizes, half_widths, hbar: c.hbar, values }
}
