use std::f64::consts::PI;

use asd_landscape::reduced::{
    check_flow_invariance, find_critical, stilde_set, suggest_window, Classification, SearchOptions, SearchWindow,
    Strategy,
};
use asd_landscape::{BoundarySpec, Error, Matrix3, QuadratureSpec};

fn identity_spec() -> BoundarySpec {
    BoundarySpec::flat(Matrix3::identity())
}

fn window() -> SearchWindow {
    SearchWindow { d0: 0.5, lambda0: 0.2475, d1: 0.004, d2: 0.135, c0: 0.1 }
}

#[test]
fn identity_window_recipe() {
    let quad = QuadratureSpec::default();
    let r = suggest_window(&identity_spec(), 1.0, 0.5, 2, &quad).unwrap();
    // M = 2 pi^2 I everywhere, so Gamma1+ = 6 pi^2 and C5 = F(0) on a grid through 0 or min F
    assert!((r.c4 - 6.0 * PI * PI).abs() < 1e-9);
    assert!(r.c5 >= 12.0 * PI * PI * (1.0 - 1e-9));
    assert!(r.window.d1 < r.window.d2);
    assert!((r.window.d2 - 2.0 * r.c4 / r.c5).abs() < 1e-12);
    assert!(r.window.d1 * r.window.d1 * r.max_f < 1.0 / 16.0);
    let big = suggest_window(&identity_spec(), 4.0, 0.5, 2, &quad).unwrap();
    assert!((big.window.d1 / r.window.d1 - 2.0).abs() < 1e-12);
}

#[test]
fn infeasible_window() {
    let e = suggest_window(&identity_spec(), 1e6, 0.5, 1, &QuadratureSpec::default());
    assert!(matches!(e, Err(Error::Invalid(m)) if m.contains("infeasible")));
}

#[test]
fn identity_fibres_are_flagged_degenerate() {
    let quad = QuadratureSpec::default();
    let eps = 0.01;
    let w = suggest_window(&identity_spec(), 0.1, 0.5, 3, &quad).unwrap().window;
    let opts = SearchOptions { strategy: Strategy::AllFibers, grid: 3, ..Default::default() };
    let found = find_critical(&identity_spec(), &w, eps, &opts, &quad).unwrap();
    assert!(!found.is_empty());
    for c in &found {
        assert_eq!(c.classification, Classification::So3Degenerate);
        assert!((c.value + 2.0 * eps * eps * c.fiber.g).abs() <= 1e-8 * c.value.abs());
        assert!(c.violated_face.is_none());
    }
}

#[test]
fn epsilon_too_large_is_rejected() {
    let opts = SearchOptions { n_starts: 1, ..Default::default() };
    let e = find_critical(&identity_spec(), &window(), 1.0, &opts, &QuadratureSpec::default());
    assert!(matches!(e, Err(Error::Invalid(_))));
}

#[test]
fn huge_c0_leaves_every_face_vacuous() {
    let w = SearchWindow { c0: 1e3, ..window() };
    let r = check_flow_invariance(&identity_spec(), &w, 0.01, 5, 0, &QuadratureSpec::default()).unwrap();
    assert!(r.faces.iter().all(|f| f.min_margin.is_none() && f.sublevel_points == 0));
    assert!(r.all_positive);
}

#[test]
fn stilde_inclusion() {
    let quad = QuadratureSpec::default();
    let spec = BoundarySpec::flat(Matrix3::diag([5.0, 2.0, 1.0]).scale(0.5 / (PI * PI)));
    let eps = 0.01;
    let s = stilde_set(&spec, &[0.0; 4], None, eps, 100, 1, &quad).unwrap();
    assert_eq!(s.eta, 1.0);
    assert_eq!(s.samples, 100);
    assert!(s.inclusion_holds);
    assert!((s.lambda0_sq - s.eta * eps / s.f_p0).abs() < 1e-18);
    assert!(matches!(stilde_set(&spec, &[0.0; 4], Some(9.0), eps, 10, 1, &quad), Err(Error::Invalid(_))));
}
