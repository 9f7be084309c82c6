//! Evaluate the harmonic field alpha_p, the 1-forms h_p and the ASD part of
//! dh_p at a few points, and compare alpha against its Poisson integral.

use asd_landscape::harmonic::{alpha_poisson, AlphaField};

fn main() -> asd_landscape::Result<()> {
    let p = [0.0, 0.3, 0.0, -0.4];
    let field = AlphaField::new(&p)?;

    for x in [[0.0; 4], [0.2, 0.1, -0.3, 0.0], [0.0, 0.0, 0.0, -0.7]] {
        let a = field.values(&x);
        println!("x = {x:?}");
        println!("  alpha      = {a:.6?}");
        for i in 1..=4 {
            let q = alpha_poisson(&p, i, &x, 1e-9)?;
            println!("  poisson[{i}] = {:.12} (closed {:.12}, diff {:.1e})", q.value, a[i - 1], (q.value - a[i - 1]).abs());
        }
        let dh = field.dh(&x);
        println!("  (dh)-      = {:.6?}", dh.0);
    }
    Ok(())
}
