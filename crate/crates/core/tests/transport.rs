use isoclass_core::quantize::SymbolOracle;
use isoclass_core::states::{hermite_function, HalfInt, ProfileStack, SmoothProfile, Splitting, TWindow};
use isoclass_core::symbolcalc::{regularity_check, transport_check, HarnessGrid};
use isoclass_core::C64;

fn schedule() -> Vec<f64> {
    (0..8).map(|m| 1.28e-2 / 2f64.powi(m)).collect()
}

fn grid() -> HarnessGrid {
    HarnessGrid { t_half_width: 8.0, t_size: 64, u_size: 128, window: Some(TWindow::new(5.0, 7.0).unwrap()) }
}

fn term(m: usize, c: f64) -> SmoothProfile {
    SmoothProfile::separable(
        |t| (-t[0] * t[0] / 2.0).exp(),
        |t| vec![-t[0] * (-t[0] * t[0] / 2.0).exp()],
        move |u| C64::new(c * hermite_function(m, u[0]), 0.0),
    )
}

fn stack() -> ProfileStack {
    ProfileStack::new(HalfInt::ZERO, vec![term(0, 1.0), term(1, 0.5)]).unwrap()
}

fn sp() -> Splitting {
    Splitting::new(1, 1).unwrap()
}

#[test]
fn order0_product_rule() {
    let p = SymbolOracle::from_expr("1 + x_1^2", None, 2).unwrap();
    let r = transport_check(&p, &stack(), sp(), 0, &schedule(), &grid(), &[0.5]).unwrap();
    println!("{r}");
    assert!(r.pass && (r.slope - 0.5).abs() <= 0.1);
}

#[test]
fn order1_first_transport() {
    let p = SymbolOracle::from_expr("xi_2 + x_2", None, 2).unwrap();
    let r = transport_check(&p, &stack(), sp(), 1, &schedule(), &grid(), &[0.5]).unwrap();
    println!("{r}");
    assert!(r.pass && (r.slope - 0.5).abs() <= 0.1);
}

#[test]
fn order2_second_transport() {
    let p = SymbolOracle::from_expr("xi_1 + x_2^2 + xi_2^2 + x_2*xi_1", Some("0.3*x_1"), 2).unwrap();
    let r = transport_check(&p, &stack(), sp(), 2, &schedule(), &grid(), &[0.5]).unwrap();
    println!("{r}");
    assert!(r.pass);
}

#[test]
fn isotropic_regularity() {
    let p = SymbolOracle::from_expr("x_2^2 + xi_2^2", None, 2).unwrap();
    let q = SymbolOracle::from_expr("x_2*xi_2", None, 2).unwrap();
    let r = regularity_check(&p, &q, &stack(), sp(), &schedule(), &grid(), &[0.5]).unwrap();
    println!("{r:?}");
    assert!(r.pass);
}
