//! Scan F(p) and the spectrum of M(A0, p) on a small grid and write the CSV
//! the `landscape scan` command produces. Then fit the boundary blow-up of F.

use asd_landscape::landscape::{asymptotic_probe, grid_points, scan, write_csv, ProbeQuantity};
use asd_landscape::{BoundarySpec, Matrix3, QuadratureSpec};

fn main() -> asd_landscape::Result<()> {
    let quad = QuadratureSpec::default();
    let spec = BoundarySpec::flat(Matrix3::diag([1.0, 0.5, 0.25]));

    let samples = scan(&spec, &grid_points(2, 0.4), &quad)?;
    write_csv(std::io::stdout(), &samples)?;

    let fit = asymptotic_probe(ProbeQuantity::F, &[0.0, 0.0, 0.0, -1.0], &[0.2, 0.1, 0.05], &spec, &quad)?;
    for (d, f) in &fit.points {
        println!("d = {d:<6} F = {f:.6e}  F d^4 = {:.4}", f * d.powi(4));
    }
    println!("slope {:.3} (expected -4)", fit.slope);
    Ok(())
}
