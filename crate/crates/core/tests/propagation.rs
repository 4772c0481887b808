use isoclass_core::dynamics::{overlap, propagate_gaussian, split_step_reference};
use isoclass_core::grid::{coherent_state, husimi_lattice, Grid, PhasePoint};
use isoclass_core::metaplectic::self_dual_grid;
use isoclass_core::quantize::SymbolOracle;
use isoclass_core::states::{hermite_function, loglog_slope, Profile};
use isoclass_core::C64;
use std::f64::consts::PI;

fn ground() -> Profile {
    let g = self_dual_grid(1, 256).unwrap();
    Profile::from_fn(&g, |u| C64::new(hermite_function(0, u[0]), 0.0))
}

#[test]
fn harmonic_revival_matches_split_step() {
    let hbar = 1e-3;
    let grid = Grid::cube(1, 2.5, 4096).unwrap();
    let h = SymbolOracle::from_expr("xi_1^2 + x_1^2", None, 1).unwrap();
    let z0 = PhasePoint::new(vec![1.0], vec![0.0]).unwrap();
    let tg = propagate_gaussian(&h, &z0, &ground(), PI, 1e-3, &grid, hbar).unwrap();
    let f0 = coherent_state(&grid, hbar, &z0).unwrap();
    let pde = split_step_reference(&|x: &[f64]| x[0] * x[0], &f0, PI, 5e-4).unwrap();
    let ov = overlap(&tg.field, &pde).unwrap();
    assert!(ov >= 1.0 - 1e-4, "revival overlap {ov}");
    assert!(overlap(&pde, &f0).unwrap() >= 1.0 - 1e-4);
}

#[test]
fn anharmonic_defect_scales_with_sqrt_hbar() {
    let h = SymbolOracle::from_expr("xi_1^2 + x_1^2 + 0.5*x_1^4", None, 1).unwrap();
    let v = |x: &[f64]| x[0] * x[0] + 0.5 * x[0].powi(4);
    let z0 = PhasePoint::new(vec![0.5], vec![0.0]).unwrap();
    let grid = Grid::cube(1, 3.0, 2048).unwrap();
    let hbars = [4e-3, 2e-3, 1e-3];
    let mut defects = Vec::new();
    for &hb in &hbars {
        let tg = propagate_gaussian(&h, &z0, &ground(), 1.0, 1e-3, &grid, hb).unwrap();
        let pde = split_step_reference(&v, &coherent_state(&grid, hb, &z0).unwrap(), 1.0, 2.5e-4).unwrap();
        defects.push(1.0 - overlap(&tg.field, &pde).unwrap());
        let peak = husimi_lattice(&pde, 2, 2).unwrap().peak();
        assert!(peak.distance(&tg.flow.z) <= 3.0 * hb.sqrt(), "{peak:?} vs {:?}", tg.flow.z);
    }
    let slope = loglog_slope(&hbars, &defects);
    assert!(slope >= 0.4, "defects {defects:?}, slope {slope}");
    let c = defects.iter().zip(&hbars).map(|(d, h)| d / h.sqrt()).fold(0.0, f64::max);
    assert!(c < 10.0, "C = {c}");
}
