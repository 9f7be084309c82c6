//! Search the reduced energy for critical points. `minimize` looks for the
//! global minimizer; `all_fibers` follows every positive critical value of
//! tau over p and classifies what it finds.

use asd_landscape::boundary::synthesize;
use asd_landscape::reduced::{find_critical, suggest_window, SearchOptions, Strategy};
use asd_landscape::{HarmonicPolyOneForm, Matrix3, QuadratureSpec};

fn main() -> asd_landscape::Result<()> {
    let quad = QuadratureSpec::default();
    let zero = std::array::from_fn(|_| HarmonicPolyOneForm::zero());
    let spec = synthesize(&Matrix3::diag([5.0, 2.0, 1.0]), &[0.0; 4], zero, &quad)?;
    let eps = 0.01;
    let w = suggest_window(&spec, 0.1, 0.5, 3, &quad)?;
    println!("window {:?}", w.window);

    for strategy in [Strategy::Minimize, Strategy::AllFibers] {
        let opts = SearchOptions { strategy, n_starts: 4, grid: 3, ..Default::default() };
        println!("{strategy:?}:");
        for c in find_critical(&spec, &w.window, eps, &opts, &quad)? {
            println!(
                "  p = {:.2?}  value {:.6e}  lambda^2 {:.4e}  |grad| {:.1e}  {:?} (fibre {}, Gamma {})",
                c.q.p, c.value, c.q.lambda * c.q.lambda, c.gradient_norm, c.classification, c.fiber.rank, c.fiber.gamma
            );
        }
    }
    Ok(())
}
