use std::f64::consts::PI;

use asd_landscape::critical::enumerate_critical;
use asd_landscape::forms::asd_project;
use asd_landscape::harmonic::{alpha_boundary, alpha_closed};
use asd_landscape::linalg::sym_eigen;
use asd_landscape::reduced::{energy_dlambda, fiber_from_value, reduced_energy, ParamPoint};
use asd_landscape::so3::so3_exp;
use asd_landscape::{BoundarySpec, HarmonicPolyOneForm, Matrix3, Rotation, So3Vector, TwoForm};
use proptest::prelude::*;
use rand::SeedableRng;

fn matrix() -> impl Strategy<Value = Matrix3> {
    prop::array::uniform3(prop::array::uniform3(-3.0f64..3.0)).prop_map(Matrix3)
}

fn xi() -> impl Strategy<Value = So3Vector> {
    prop::array::uniform3(-3.0f64..3.0).prop_map(So3Vector)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_is_a_rotation(v in xi(), w in xi()) {
        let r = so3_exp(&v).compose(&so3_exp(&w));
        prop_assert!(Rotation::new(*r.matrix(), 1e-12).is_ok());
        prop_assert!((r.compose(&r.inverse()).matrix().trace() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn exp_angle_matches_norm(v in prop::array::uniform3(-1.0f64..1.0)) {
        let v = So3Vector(v);
        prop_assert!((so3_exp(&v).angle() - v.norm()).abs() < 1e-12);
    }

    #[test]
    fn eigen_reconstructs(m in matrix()) {
        let s = m.transpose() * m;
        let e = sym_eigen(&s).unwrap();
        prop_assert!(e.mu[0] >= e.mu[1] && e.mu[1] >= e.mu[2]);
        prop_assert!((e.reconstruct() - s).max_abs() <= 1e-12 * s.max_abs().max(1.0));
    }

    #[test]
    fn critical_points_symmetrise(m in matrix()) {
        let c = enumerate_critical(&m).unwrap();
        prop_assert_eq!(c.len(), 4);
        let scale = m.max_abs().max(1.0);
        for w in c.windows(2) {
            prop_assert!(w[0].value >= w[1].value);
        }
        for c in &c {
            let rm = *c.r0.matrix() * m;
            prop_assert!((rm - rm.transpose()).max_abs() <= 1e-9 * scale);
            prop_assert!((rm.trace() - c.value).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn trace_bounded_by_top_value(m in matrix(), v in xi()) {
        let top = enumerate_critical(&m).unwrap()[0].value;
        prop_assert!((*so3_exp(&v).matrix() * m).trace() <= top + 1e-9);
    }

    #[test]
    fn hodge_star_is_an_involution(w in prop::array::uniform6(-2.0f64..2.0)) {
        let w = TwoForm(w);
        prop_assert_eq!(w.hodge_star().hodge_star(), w);
        let c = asd_project(&w);
        let again = asd_project(&c.to_two_form());
        for k in 0..3 {
            prop_assert!((again.0[k] - c.0[k]).abs() < 1e-14);
        }
        // the projected part is anti-self-dual
        let a = c.to_two_form();
        let s = a.hodge_star();
        for k in 0..6 {
            prop_assert!((s.0[k] + a.0[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn alpha_trace_on_sphere(p in prop::array::uniform4(-0.5f64..0.5), y in prop::array::uniform4(-1.0f64..1.0)) {
        let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(n > 0.1);
        let y = y.map(|v| v / n);
        for i in 1..=4 {
            let a = alpha_closed(&p, i, &y).unwrap();
            let b = alpha_boundary(&p, i, &y);
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
    }

    #[test]
    fn fiber_identity(gamma in 0.01f64..50.0, f in 1.0f64..1e4, eps in 1e-4f64..0.1, v in xi()) {
        let (l, val) = fiber_from_value(gamma, eps, f).unwrap();
        let m = Matrix3::diag([gamma, 0.0, 0.0]);
        let r = Rotation::identity();
        let q = ParamPoint { p: [0.0; 4], r, lambda: l, epsilon: eps };
        let e = reduced_energy(&q, &m, f);
        prop_assert!((e - val).abs() <= 1e-12 * val.abs());
        prop_assert!((e + 2.0 * eps * eps * gamma * gamma / f).abs() <= 1e-12 * val.abs());
        prop_assert!(energy_dlambda(&q, &m, f).abs() <= 1e-12 * (8.0 * l.powi(3) * f));
        // any other rotation at the same lambda does no better
        let other = ParamPoint { r: so3_exp(&v), ..q };
        prop_assert!(reduced_energy(&other, &m, f) >= e - 1e-15 * e.abs());
    }

    #[test]
    fn lambda_derivative_matches_fd(m in matrix(), f in 1.0f64..1e3, eps in 1e-3f64..0.1, l in 1e-3f64..0.2, v in xi()) {
        let q = ParamPoint { p: [0.0; 4], r: so3_exp(&v), lambda: l, epsilon: eps };
        let h = 1e-6 * l;
        let at = |d: f64| reduced_energy(&ParamPoint { lambda: l + d, ..q.clone() }, &m, f);
        let fd = (at(h) - at(-h)) / (2.0 * h);
        let exact = energy_dlambda(&q, &m, f);
        let scale = 8.0 * l.powi(3) * f + 8.0 * eps * l * m.frobenius();
        prop_assert!((fd - exact).abs() <= 1e-6 * scale);
    }

    #[test]
    fn spec_json_round_trip(seed in 0u64..1000, a in matrix()) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let base = std::array::from_fn(|_| HarmonicPolyOneForm::random_quadratic(&mut rng, 1.0));
        let s = BoundarySpec::new(base, a).unwrap();
        let back = BoundarySpec::from_json_str(&s.to_json_string().unwrap()).unwrap();
        prop_assert_eq!(back, s);
    }
}

#[test]
fn epsilon_scaling() {
    let (f, gamma) = (12.0 * PI * PI, 6.0 * PI * PI);
    let (l1, v1) = fiber_from_value(gamma, 1e-2, f).unwrap();
    let (l2, v2) = fiber_from_value(gamma, 1e-3, f).unwrap();
    assert!((l1 / l2 - 10f64.sqrt()).abs() < 1e-12);
    assert!((v1 / v2 - 100.0).abs() < 1e-10);
}

#[test]
fn reduced_energy_fixture() {
    let m = Matrix3::identity().scale(2.0 * PI * PI);
    let q = ParamPoint { p: [0.0; 4], r: Rotation::identity(), lambda: 0.005f64.sqrt(), epsilon: 0.01 };
    let e = reduced_energy(&q, &m, 12.0 * PI * PI);
    assert!((e - (-5.9218e-3)).abs() < 1e-7);
    // flipping two axes lowers Tr(RM) and raises the energy
    let flip = Rotation::new(Matrix3::diag([1.0, -1.0, -1.0]), 1e-12).unwrap();
    assert!(reduced_energy(&ParamPoint { r: flip, ..q }, &m, 12.0 * PI * PI) > e);
}
