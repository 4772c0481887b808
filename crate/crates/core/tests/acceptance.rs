use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use isoclass_core::dynamics::{orbit_average, overlap, propagate_gaussian, split_step_reference};
use isoclass_core::fio::{fio_convergence, partial_fourier_apply, pullback_apply, quadratic_phase_apply, Diffeo, ElementaryFio, QuadraticPhase};
use isoclass_core::grid::{coherent_state, husimi_lattice, Grid, PhasePoint};
use isoclass_core::metaplectic::{metaplectic_check, self_dual_grid};
use isoclass_core::quantize::SymbolOracle;
use isoclass_core::quasimode::{build_quasimode, quasimode_sweep};
use isoclass_core::states::{
    build_model_state, hermite_function, loglog_slope, norm_relative_error, wavefront_mass, HalfInt, IsotropicState,
    Profile, ProfileStack, SmoothProfile, Splitting, TWindow,
};
use isoclass_core::symbolcalc::{regularity_check, transport_check, transport_predict, HarnessGrid};
use isoclass_core::C64;
use rand::SeedableRng;

type Outcome = Result<(bool, String), String>;
type Check = (&'static str, f64, fn() -> Outcome);

fn schedule() -> Vec<f64> {
    (0..8).map(|m| 1.28e-2 / 2f64.powi(m)).collect()
}

fn harness(window: bool) -> HarnessGrid {
    HarnessGrid { t_half_width: 8.0, t_size: 64, u_size: 128, window: window.then(|| TWindow::new(5.0, 7.0).unwrap()) }
}

fn term(m: usize, c: f64) -> SmoothProfile {
    SmoothProfile::separable(
        |t| (-t[0] * t[0] / 2.0).exp(),
        |t| vec![-t[0] * (-t[0] * t[0] / 2.0).exp()],
        move |u| C64::new(c * hermite_function(m, u[0]), 0.0),
    )
}

fn stack_k1() -> ProfileStack {
    ProfileStack::new(HalfInt::ZERO, vec![term(0, 1.0), term(1, 0.5)]).unwrap()
}

fn stack_k0() -> ProfileStack {
    let u = |m: usize, c: f64| SmoothProfile::u_only(move |u| C64::new(c * hermite_function(m, u[0]), 0.0));
    ProfileStack::new(HalfInt::ZERO, vec![u(0, 1.0), u(1, 0.5)]).unwrap()
}

fn k1() -> Splitting {
    Splitting::new(1, 1).unwrap()
}

fn k0() -> Splitting {
    Splitting::new(0, 1).unwrap()
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn c1() -> Outcome {
    let p = SymbolOracle::from_expr("1 + x_1^2", None, 2).map_err(err)?;
    let r = transport_check(&p, &stack_k1(), k1(), 0, &schedule(), &harness(true), &[0.5]).map_err(err)?;
    Ok((r.final_residual <= 0.05 && (r.slope - 0.5).abs() <= 0.1, format!("slope {:.3}, residual at 1e-4 {:.2e}", r.slope, r.final_residual)))
}

fn c2() -> Outcome {
    let p = SymbolOracle::from_expr("xi_2 + x_2", None, 2).map_err(err)?;
    let r = transport_check(&p, &stack_k1(), k1(), 1, &schedule(), &harness(true), &[0.5]).map_err(err)?;
    Ok((r.final_residual <= 0.05 && (r.slope - 0.5).abs() <= 0.1, format!("slope {:.3}, residual at 1e-4 {:.2e}", r.slope, r.final_residual)))
}

fn c3() -> Outcome {
    let p = SymbolOracle::from_expr("x_2^2 + xi_2^2", None, 2).map_err(err)?;
    let stack = stack_k1();
    let ugrid = harness(true).profile_grid(k1()).map_err(err)?;
    let pred = transport_predict(&p, stack.leading(), k1(), &[0.5], &ugrid, 2).map_err(err)?;
    let identity = pred.profile.relative_error(&stack.leading().sample(&ugrid, &[0.5])).map_err(err)?;
    let r = transport_check(&p, &stack, k1(), 2, &schedule(), &harness(true), &[0.5]).map_err(err)?;
    Ok((
        r.final_residual <= 0.05 && identity <= 1e-8,
        format!("extracted vs a0 at 1e-4 {:.2e} (slope {:.3}), predicted vs a0 {:.1e}", r.final_residual, r.slope, identity),
    ))
}

fn c4() -> Outcome {
    let a1 = SmoothProfile::separable(|t| (-t[0] * t[0] / 2.0).exp(), |t| vec![-t[0] * (-t[0] * t[0] / 2.0).exp()], |u| {
        C64::new(0.5 * hermite_function(0, u[0]) + 0.3 * hermite_function(2, u[0]), 0.0)
    });
    let stack = ProfileStack::new(HalfInt::from_twice(1), vec![term(0, 1.0), a1]).map_err(err)?;
    let hbars = [8e-4, 4e-4, 2e-4, 1e-4];
    let g = harness(true);
    let mut errs = Vec::new();
    for &h in &hbars {
        let st = build_model_state(&stack, k1(), &g.field_grid(k1(), h).map_err(err)?, h, g.window).map_err(err)?;
        errs.push(norm_relative_error(&st).map_err(err)?);
    }
    let slope = loglog_slope(&hbars, &errs);
    let last = errs[3];
    Ok(((slope - 0.5).abs() <= 0.1 && last <= 0.01, format!("relative error slope {slope:.3}, error at 1e-4 {last:.2e}")))
}

fn c5() -> Outcome {
    let seed = 20_240_611u64;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let r = metaplectic_check(&mut rng, 100).map_err(err)?;
    Ok((
        r.pass,
        format!(
            "seed {seed}: factorization {:.1e}, max word {}, unitarity {:.1e}, intertwining {:.1e}, projective {:.1e}",
            r.factor_error, r.max_word_length, r.unitarity_error, r.intertwining_defect, r.projective_defect
        ),
    ))
}

fn c6() -> Outcome {
    let phase = ElementaryFio::QuadraticPhase(QuadraticPhase::from_expr("x_1^2/2", k0()).map_err(err)?);
    let pull = ElementaryFio::Pullback(Diffeo::from_exprs(&["x_1", "2*x_2"], None).map_err(err)?);
    let r15 = fio_convergence(&phase, &stack_k0(), k0(), &schedule(), &harness(false), &[]).map_err(err)?;
    let r18 = fio_convergence(&ElementaryFio::PartialFourier, &stack_k0(), k0(), &schedule(), &harness(false), &[]).map_err(err)?;
    let r23 = fio_convergence(&pull, &stack_k1(), k1(), &schedule(), &harness(true), &[0.5]).map_err(err)?;
    let h = 1e-4;
    let st = build_model_state(&stack_k1(), k1(), &harness(true).field_grid(k1(), h).map_err(err)?, h, harness(true).window).map_err(err)?;
    let ft = partial_fourier_apply(&st).map_err(err)?;
    let unit = (ft.field.norm() - st.field.norm()).abs() / st.field.norm();
    let ok = [&r15, &r18, &r23].iter().all(|r| r.final_residual <= 0.05 && r.slope >= 0.4) && unit <= 1e-10;
    Ok((
        ok,
        format!(
            "phase slope {:.3} res {:.2e}; fourier slope {:.3} res {:.2e}; pullback slope {:.3} res {:.2e}; unitarity {unit:.1e}",
            r15.slope, r15.final_residual, r18.slope, r18.final_residual, r23.slope, r23.final_residual
        ),
    ))
}

fn c7() -> Outcome {
    let sp = k1();
    let hbars = [0.04, 0.02, 0.01, 0.005];
    let radius = 0.6;
    let pull = Diffeo::from_exprs(&["x_1", "2*x_2"], None).map_err(err)?;
    let phase = QuadraticPhase::from_expr("x_2^2/2", sp).map_err(err)?;
    let mut worst = f64::INFINITY;
    let mut ok = true;
    let names = ["built", "pullback", "phase", "fourier"];
    for (i, name) in names.iter().enumerate() {
        let mut masses = Vec::new();
        for &h in &hbars {
            let g = harness(true);
            let st = build_model_state(&stack_k1(), sp, &g.field_grid(sp, h).map_err(err)?, h, g.window).map_err(err)?;
            let out: IsotropicState = match i {
                0 => st,
                1 => pullback_apply(&pull, &st).map_err(err)?,
                2 => quadratic_phase_apply(&phase, &st).map_err(err)?,
                _ => partial_fourier_apply(&st).map_err(err)?,
            };
            masses.push(wavefront_mass(&out, radius).map_err(err)?);
        }
        for w in masses.windows(2) {
            if w[1].is_nan() || w[1] <= 0.0 {
                return Err(format!("{name}: wavefront mass vanished {masses:?}"));
            }
            worst = worst.min(w[0] / w[1]);
            ok &= w[0] >= 4.0 * w[1];
        }
    }
    Ok((ok, format!("radius {radius}, smallest drop per halving x{worst:.1} over built, pullback, phase, fourier")))
}

fn ground() -> Profile {
    let g = self_dual_grid(1, 256).unwrap();
    Profile::from_fn(&g, |u| C64::new(hermite_function(0, u[0]), 0.0))
}

fn c8() -> Outcome {
    let hbar = 1e-3;
    let grid = Grid::cube(1, 2.5, 4096).map_err(err)?;
    let h = SymbolOracle::from_expr("xi_1^2 + x_1^2", None, 1).map_err(err)?;
    let z0 = PhasePoint::new(vec![1.0], vec![0.0]).map_err(err)?;
    let tg = propagate_gaussian(&h, &z0, &ground(), PI, 1e-3, &grid, hbar).map_err(err)?;
    let pde = split_step_reference(&|x: &[f64]| x[0] * x[0], &coherent_state(&grid, hbar, &z0).map_err(err)?, PI, 5e-4).map_err(err)?;
    let revival = overlap(&tg.field, &pde).map_err(err)?;
    let ha = SymbolOracle::from_expr("xi_1^2 + x_1^2 + 0.5*x_1^4", None, 1).map_err(err)?;
    let v = |x: &[f64]| x[0] * x[0] + 0.5 * x[0].powi(4);
    let za = PhasePoint::new(vec![0.5], vec![0.0]).map_err(err)?;
    let ga = Grid::cube(1, 3.0, 2048).map_err(err)?;
    let hbars = [4e-3, 2e-3, 1e-3];
    let mut defects = Vec::new();
    for &hb in &hbars {
        let tg = propagate_gaussian(&ha, &za, &ground(), 1.0, 1e-3, &ga, hb).map_err(err)?;
        let pde = split_step_reference(&v, &coherent_state(&ga, hb, &za).map_err(err)?, 1.0, 2.5e-4).map_err(err)?;
        defects.push(1.0 - overlap(&tg.field, &pde).map_err(err)?);
    }
    let slope = loglog_slope(&hbars, &defects);
    Ok((
        revival >= 1.0 - 1e-4 && slope >= 0.4,
        format!("harmonic revival overlap {revival:.8}; anharmonic defects {defects:?}, slope {slope:.3}"),
    ))
}

fn c9() -> Outcome {
    let hbar = 1e-3;
    let grid = Grid::cube(1, 2.0, 2048).map_err(err)?;
    let h = SymbolOracle::from_expr("(x_1^2 + xi_1^2)/2", None, 1).map_err(err)?;
    let z0 = PhasePoint::new(vec![1.0], vec![0.0]).map_err(err)?;
    let avg = orbit_average(&h, &z0, &|_| C64::new(1.0, 0.0), 512, &ground(), &grid, hbar, 1e-3).map_err(err)?;
    let hl = husimi_lattice(&avg.field, 4, 4).map_err(err)?;
    let near = hl.mass_where(|x, xi| ((x[0] * x[0] + xi[0] * xi[0]).sqrt() - 1.0).abs() <= 0.2) / hl.total_mass();
    Ok((near >= 0.9, format!("period {:.9}, Husimi mass within 0.2 of the orbit {near:.4}", avg.period)))
}

fn c10() -> Outcome {
    let exact = SymbolOracle::from_expr("xi_1 - i*x_1", None, 1).map_err(err)?;
    let q = build_quasimode(&exact, &PhasePoint::origin(1), 0, 1e-3).map_err(err)?;
    let nl = SymbolOracle::from_expr("xi_1^2 + i*x_1", None, 1).map_err(err)?;
    let sw = quasimode_sweep(&nl, &PhasePoint::new(vec![0.0], vec![-1.0]).map_err(err)?, 2, &[4e-3, 2e-3, 1e-3]).map_err(err)?;
    let s = &sw.slopes;
    Ok((
        q.ratios[0] <= 1e-8 && s[0] >= 0.85 && s[1] >= 1.4 && s[2] >= 1.85,
        format!("exact model ratio {:.1e}; slopes N=0 {:.3}, N=1 {:.3}, N=2 {:.3}", q.ratios[0], s[0], s[1], s[2]),
    ))
}

fn c11() -> Outcome {
    let p = SymbolOracle::from_expr("x_2^2 + xi_2^2", None, 2).map_err(err)?;
    let q = SymbolOracle::from_expr("x_2*xi_2", None, 2).map_err(err)?;
    let r = regularity_check(&p, &q, &stack_k1(), k1(), &schedule(), &harness(true), &[0.5]).map_err(err)?;
    let (lo, hi) = r.norms.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    Ok((r.pass, format!("rescaled profile norms in [{lo:.3}, {hi:.3}], slope {:.4}", r.slope)))
}

fn main() -> ExitCode {
    let criteria: [Check; 11] = [
        ("order-0 symbol calculus", 60.0, c1),
        ("first transport equation", 60.0, c2),
        ("second transport equation", 120.0, c3),
        ("norm estimate", f64::INFINITY, c4),
        ("metaplectic suite", 120.0, c5),
        ("FIO symbol laws", f64::INFINITY, c6),
        ("wave-front containment", f64::INFINITY, c7),
        ("propagation", 600.0, c8),
        ("orbit average", 300.0, c9),
        ("pseudospectrum quasimode", 600.0, c10),
        ("isotropic regularity", f64::INFINITY, c11),
    ];
    let mut failures = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok((p, d)) => (p && secs <= *budget, d),
            Err(e) => (false, format!("error: {e}")),
        };
        let limit = if budget.is_finite() { format!(", limit {budget:.0} s") } else { String::new() };
        println!("{} [{:>2}] {name}: {detail} ({secs:.1} s{limit})", if pass { "PASS" } else { "FAIL" }, i + 1);
        if !pass {
            failures += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
