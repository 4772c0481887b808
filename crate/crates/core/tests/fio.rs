use isoclass_core::fio::{partial_fourier_apply, pullback_apply, quadratic_phase_apply, Diffeo, QuadraticPhase};
use isoclass_core::states::{
    build_model_state, extract_profile, hermite_function, wavefront_mass, HalfInt, IsotropicState, ProfileStack,
    SmoothProfile, Splitting, TWindow,
};
use isoclass_core::symbolcalc::HarnessGrid;
use isoclass_core::C64;

fn hg(window: bool) -> HarnessGrid {
    HarnessGrid { t_half_width: 8.0, t_size: 64, u_size: 128, window: window.then(|| TWindow::new(5.0, 7.0).unwrap()) }
}

fn u_state(m: usize, hbar: f64) -> IsotropicState {
    let sp = Splitting::new(0, 1).unwrap();
    let stack = ProfileStack::single(HalfInt::ZERO, SmoothProfile::u_only(move |u| C64::new(hermite_function(m, u[0]), 0.0)));
    build_model_state(&stack, sp, &hg(false).field_grid(sp, hbar).unwrap(), hbar, None).unwrap()
}

#[test]
fn partial_fourier_hermite_and_parity() {
    let hbar = 1e-4;
    let sp = Splitting::new(0, 1).unwrap();
    let ugrid = hg(false).profile_grid(sp).unwrap();
    let st = u_state(1, hbar);
    let once = partial_fourier_apply(&st).unwrap();
    let got = extract_profile(&once, &[], &ugrid).unwrap();
    let want = ugrid_profile(&ugrid, |u| C64::new(0.0, -hermite_function(1, u)));
    assert!(got.relative_error(&want).unwrap() < 1e-8);
    assert!((once.field.norm() - st.field.norm()).abs() <= 1e-10 * st.field.norm());
    let twice = partial_fourier_apply(&once).unwrap();
    let p2 = extract_profile(&twice, &[], &ugrid).unwrap();
    let parity = ugrid_profile(&ugrid, |u| C64::new(hermite_function(1, -u).abs(), 0.0));
    let mag = p2.map(|_, v| C64::new(v.norm(), 0.0));
    assert!(mag.relative_error(&parity).unwrap() < 0.05);
}

fn ugrid_profile(g: &isoclass_core::grid::Grid, f: impl Fn(f64) -> C64) -> isoclass_core::states::Profile {
    isoclass_core::states::Profile::from_fn(g, |u| f(u[0]))
}

#[test]
fn identity_pullback_and_zero_phase_are_exact() {
    let st = u_state(0, 1e-3);
    let id = pullback_apply(&Diffeo::identity(1), &st).unwrap();
    assert!(id.field.axpy(C64::new(-1.0, 0.0), &st.field).unwrap().norm() < 1e-8 * st.field.norm());
    let q = QuadraticPhase::from_expr("0", Splitting::new(0, 1).unwrap()).unwrap();
    let z = quadratic_phase_apply(&q, &st).unwrap();
    assert_eq!(z.field.values(), st.field.values());
}

#[test]
fn box_escape_is_reported() {
    let st = u_state(0, 1e-2);
    let shrink = Diffeo::from_exprs(&["0.1*x_1"], Some(&["10*x_1"])).unwrap();
    assert!(pullback_apply(&shrink, &st).is_err());
    let bad = QuadraticPhase::from_expr("x_1", Splitting::new(0, 1).unwrap()).unwrap();
    assert!(quadratic_phase_apply(&bad, &st).is_err());
}

#[test]
fn wavefront_decays_before_and_after_each_fio() {
    let sp = Splitting::new(1, 1).unwrap();
    let term = |m: usize, c: f64| {
        SmoothProfile::new(move |t: &[f64], u: &[f64]| C64::new(c * (-(t[0] - 0.3).powi(2) / 2.0).exp() * hermite_function(m, u[0]), 0.0))
    };
    let stack = ProfileStack::new(HalfInt::ZERO, vec![term(0, 1.0), term(1, 0.5)]).unwrap();
    let hbars = [0.04, 0.02, 0.01, 0.005];
    let radius = 0.6;
    type Op<'a> = Box<dyn Fn(&IsotropicState) -> IsotropicState + 'a>;
    let ops: Vec<(&str, Op)> = vec![
        ("built", Box::new(|s: &IsotropicState| s.clone())),
        ("pullback", Box::new(|s: &IsotropicState| pullback_apply(&Diffeo::from_exprs(&["x_1", "2*x_2"], None).unwrap(), s).unwrap())),
        ("phase", Box::new(|s: &IsotropicState| quadratic_phase_apply(&QuadraticPhase::from_expr("x_2^2/2", sp).unwrap(), s).unwrap())),
        ("fourier", Box::new(|s: &IsotropicState| partial_fourier_apply(s).unwrap())),
    ];
    for (name, op) in &ops {
        let masses: Vec<f64> = hbars
            .iter()
            .map(|&h| {
                let st = build_model_state(&stack, sp, &hg(true).field_grid(sp, h).unwrap(), h, hg(true).window).unwrap();
                wavefront_mass(&op(&st), radius).unwrap()
            })
            .collect();
        println!("{name}: {masses:?}");
        for w in masses.windows(2) {
            assert!(w[1] > 0.0 && w[0] >= 4.0 * w[1], "{name}: {masses:?}");
        }
    }
}
