//! Build a boundary connection with a prescribed interaction matrix, check it
//! by quadrature, then separate a degenerate spectrum with a small shift.

use asd_landscape::boundary::{perturb_nondegenerate, synthesize};
use asd_landscape::landscape::{m_boundary, m_volume};
use asd_landscape::{BoundarySpec, HarmonicPolyOneForm, Matrix3, QuadratureSpec};
use rand::SeedableRng;

fn main() -> asd_landscape::Result<()> {
    let quad = QuadratureSpec::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let base = std::array::from_fn(|_| HarmonicPolyOneForm::random_quadratic(&mut rng, 0.5));
    let p0 = [0.1, 0.0, -0.2, 0.3];
    let target = Matrix3([[4.0, 1.0, 0.0], [0.0, 2.0, -1.0], [0.5, 0.0, 1.0]]);

    let spec = synthesize(&target, &p0, base, &quad)?;
    let m = m_volume(&spec, &p0, &quad)?;
    println!("target   {:?}", target.0);
    println!("M(p0)    {:.9?}", m.m.0);
    println!("max error {:.2e}", (m.m - target).max_abs());
    println!("{}", spec.to_json_string()?);

    // A = I is fully degenerate: all mu_i equal
    let flat = BoundarySpec::flat(Matrix3::identity());
    let (shifted, rep) = perturb_nondegenerate(&flat, &[0.0; 4], 1e-2, &quad)?;
    println!("mu before {:?}", rep.mu_before);
    println!("mu after  {:?}", rep.mu_after);
    let check = m_boundary(&shifted, &[0.0; 4], &quad)?;
    println!("boundary route at 0: {:.6?}", check.m.0);
    Ok(())
}
