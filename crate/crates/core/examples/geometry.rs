//! Horizon data and the tortoise coordinate, checked against quadrature.

use sads_dirac::{Geometry, SpacetimeParams};

fn main() -> sads_dirac::Result<()> {
    let params = SpacetimeParams::new(1.0, 1.0, 2.0, 0.1)?;
    let geo = Geometry::new(params);
    let hz = geo.horizon();
    println!("r_sads = {:.15}, surface gravity = {:.6}", hz.r_sads, geo.surface_gravity());
    println!("{:>12} {:>22} {:>22} {:>10}", "r", "x closed form", "x quadrature", "diff");
    for r in [1.001, 1.1, 2.0, 10.0, 1e3] {
        let x = geo.tortoise_from_radius(r)?;
        let (xq, _) = geo.tortoise_by_quadrature(r, 1e-13)?;
        println!("{r:>12} {x:>22.15e} {xq:>22.15e} {:>10.2e}", (x - xq).abs());
        assert!((geo.radius_from_tortoise(x)? - r).abs() < 1e-10 * r);
    }
    Ok(())
}
