//! Critical points of R -> Tr(RM) on SO(3): closed-form enumeration, a
//! finite-difference Hessian check, and a multistart descent that should
//! find nothing else.

use asd_landscape::critical::{category_report, descent_oracle, enumerate_critical, hessian_check};
use asd_landscape::Matrix3;

fn main() -> asd_landscape::Result<()> {
    let m = Matrix3::diag([5.0, 2.0, 1.0]);
    for c in enumerate_critical(&m)? {
        let h = hessian_check(&m, &c, 1e-4);
        println!(
            "value {:>5.1}  signs {:?}  index {:?}  hessian {:?}  fd deviation {:.1e}",
            c.value, c.signs, c.morse_index, c.hessian_diag, h.max_diag_deviation
        );
    }

    let rep = descent_oracle(&m, 100, 7)?;
    println!("descent: {} clusters from {} converged starts", rep.clusters.len(), rep.converged);
    for c in &rep.clusters {
        println!("  {:>8.5} x{}", c.value, c.count);
    }

    // det M < 0 with sqrt(mu1) < sqrt(mu2) + sqrt(mu3): three values above eta
    let r = category_report(&Matrix3::diag([2.5, 2.0, -1.0]), None)?;
    println!("category: {:?} eta {:?} bound {:?}", r.case, r.eta, r.cat_lower_bound);
    Ok(())
}
