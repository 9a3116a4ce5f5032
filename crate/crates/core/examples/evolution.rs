//! Cayley evolution of a quasimode: unitarity, and local energy staying
//! above `‖φ‖_K − t·r_h` inside the mass window.

use sads_dirac::evolution::{
    decay_experiment, evolution_quasimode_config, log_times, CayleyPropagator, CompactWindow,
};
use sads_dirac::quasimode::{build_quasimode, residual_norm, QuasimodeSetup};
use sads_dirac::SpacetimeParams;

fn main() -> sads_dirac::Result<()> {
    let params = SpacetimeParams::new(0.05, 1.0, 2.0, 0.15)?;
    let setup = QuasimodeSetup::new(params, evolution_quasimode_config(&params))?;
    let qm = build_quasimode(&setup)?;
    let h_full = setup.full_h()?;
    let (a, b) = qm.mass_window(0.99);
    let window = CompactWindow::new(a, b)?;
    let prop = CayleyPropagator::with_default_step(&h_full)?;
    let r_h = residual_norm(&qm.phi, qm.sqrt_e_plus, &h_full)?;
    let t_max = (0.1 / r_h).min(200.0);
    let report = decay_experiment(&qm, &h_full, &window, &prop, &log_times(0.1, t_max, 8))?;
    println!("r_h = {r_h:.3e}, dt = {:.3e}, K = [{a:.4}, {b:.4}]", prop.dt);
    for s in &report.samples {
        println!("t = {:>9.3} ‖ψ‖_K = {:.8} bound = {:.8} slack = {:.1e}", s.t, s.local_energy, s.bound, s.slack);
    }
    println!("holds = {}, unitarity drift = {:.2e}", report.holds, report.unitarity_drift);
    Ok(())
}
