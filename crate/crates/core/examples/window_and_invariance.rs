//! The window recipe and the sampled flow-invariance margins on its faces,
//! followed by the set {p0} x S(p0, eta) x {lambda0}.

use asd_landscape::reduced::{check_flow_invariance, stilde_set, suggest_window};
use asd_landscape::{BoundarySpec, Matrix3, QuadratureSpec};

fn main() -> asd_landscape::Result<()> {
    let quad = QuadratureSpec::default();
    let pi2 = std::f64::consts::PI.powi(2);
    let spec = BoundarySpec::flat(Matrix3::diag([5.0, 2.0, 1.0]).scale(0.5 / pi2));
    let eps = 0.01;

    let w = suggest_window(&spec, 0.1, 0.5, 3, &quad)?;
    println!("C4 = {:.4}, C5 = {:.4}, max F = {:.2}", w.c4, w.c5, w.max_f);
    println!("{:?}", w.window);

    let r = check_flow_invariance(&spec, &w.window, eps, 50, 1, &quad)?;
    for f in &r.faces {
        match f.min_margin {
            Some(m) => println!("{:<20} {:>3} points, min margin {m:.3e}", f.face, f.sublevel_points),
            None => println!("{:<20} vacuous", f.face),
        }
    }

    let s = stilde_set(&spec, &[0.0; 4], None, eps, 100, 2, &quad)?;
    println!(
        "eta {} ({:?}), lambda0^2 = {:.4e}, max F_eps {:.4e} <= {:.4e}: {}",
        s.eta, s.category.case, s.lambda0_sq, s.max_energy, s.threshold, s.inclusion_holds
    );
    Ok(())
}
