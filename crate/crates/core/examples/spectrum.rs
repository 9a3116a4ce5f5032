//! Lowest eigenvalue of the comparison operator against the closed-form
//! bracket `[E₀, E₂ + h/2]`, and the model eigenfunctions' residual order.

use sads_dirac::dirac::RadialGrid;
use sads_dirac::model::{bracket_check, channel_residual, model_levels, ModelFunction};
use sads_dirac::SpacetimeParams;

fn main() -> sads_dirac::Result<()> {
    let grid = RadialGrid::new(-3.0, -1e-4, 4000)?;
    for h in [0.2, 0.1, 0.05] {
        let params = SpacetimeParams::new(1.0, 1.0, 2.0, h)?;
        let lv = model_levels(&params);
        let b = bracket_check(&grid, &params)?;
        println!(
            "h = {h:<5} E₀ = {:.6} E₁ = {:.6} E₂ = {:.6}  Ẽ = {:.6} in [{:.6}, {:.6}]: {}",
            lv.e0, lv.e1, lv.e2, b.e_tilde, b.lower, b.upper, b.inside
        );
    }
    let params = SpacetimeParams::new(1.0, 1.0, 2.0, 0.05)?;
    for which in [ModelFunction::Psi1, ModelFunction::Psi2] {
        let r = channel_residual(which, &grid, &params)?;
        println!("{which:?}: residual {:.3e} -> {:.3e}, order {:.3}", r.coarse, r.fine, r.order);
    }
    Ok(())
}
