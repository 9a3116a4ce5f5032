//! Quasimode residuals over a decreasing list of `h` and the fitted
//! exponential rate `D` in `r_h ≈ C e^{−D/h}`.

use sads_dirac::quasimode::{build_quasimode, residual_sweep, QuasimodeConfig, QuasimodeSetup};
use sads_dirac::SpacetimeParams;

fn main() -> sads_dirac::Result<()> {
    let params = SpacetimeParams::new(0.05, 1.0, 2.0, 0.1)?;
    let config = QuasimodeConfig { n: 3000, ..QuasimodeConfig::default() };

    let setup = QuasimodeSetup::new(params, config)?;
    let qm = build_quasimode(&setup)?;
    let (a, b) = qm.mass_window(0.99);
    println!("h = 0.1: √E⁺ = {:.12}, 99% of the mass in [{a:.4}, {b:.4}]", qm.sqrt_e_plus);

    let h_list = [0.2, 0.15, 0.1, 0.07, 0.05];
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let sweep = residual_sweep(&h_list, &params, &config, workers)?;
    for r in &sweep.records {
        println!("h = {:<5} E⁺ = {:.10} residual = {:.4e} floor-limited = {}", r.h, r.e_plus, r.residual, r.floor_limited);
    }
    println!("D = {:.4}, C = {:.4}, R² = {:.5}", sweep.d, sweep.prefactor, sweep.fit.r2);
    Ok(())
}
