//! The potentials `A`, `B` on the well side and the inner cutoff `x₊`.

use sads_dirac::potentials::Potentials;
use sads_dirac::SpacetimeParams;

fn main() -> sads_dirac::Result<()> {
    let params = SpacetimeParams::new(0.05, 1.0, 2.0, 0.1)?;
    let pots = Potentials::new(params);
    let cut = pots.inner_cutoff();
    println!("r₊ = {:.6}, x₊ = {:.6}, adjusted = {}", cut.r_plus, cut.x_plus, cut.adjusted);
    println!("A²(x₊) = {:.6}", pots.a2_at_cutoff());
    println!("{:>10} {:>12} {:>12} {:>12} {:>12}", "x", "A", "B", "A'", "B'");
    for i in 0..=8 {
        let x = cut.x_plus * (1.0 - i as f64 / 8.0).max(1e-3);
        let v = pots.at(x)?;
        println!("{:>10.5} {:>12.6} {:>12.6} {:>12.6} {:>12.6}", v.x, v.a, v.b, v.da, v.db);
    }
    let e = 1.5;
    println!("turning point of A² = {e}: x_A = {:.6}", pots.turning_point(e)?);
    Ok(())
}
