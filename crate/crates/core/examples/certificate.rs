//! Turns the fitted residual rate into a logarithmic lower bound on local
//! energy at the time `t_h`, and checks it.

use sads_dirac::evolution::{
    evolution_quasimode_config, log_bound_certificate, CayleyPropagator, CertificateInputs, CompactWindow,
};
use sads_dirac::quasimode::{build_quasimode, residual_sweep, QuasimodeSetup};
use sads_dirac::SpacetimeParams;

fn main() -> sads_dirac::Result<()> {
    let h = 0.15;
    let params = SpacetimeParams::new(0.05, 1.0, 2.0, h)?;
    let config = evolution_quasimode_config(&params);
    let sweep = residual_sweep(&[0.2, 0.15, 0.1, 0.07, 0.05], &params, &config, 1)?;

    let setup = QuasimodeSetup::new(params, config)?;
    let qm = build_quasimode(&setup)?;
    let h_full = setup.full_h()?;
    let (a, b) = qm.mass_window(0.99);
    let window = CompactWindow::new(a, b)?;
    let prop = CayleyPropagator::with_default_step(&h_full)?;
    let inputs = CertificateInputs { d: sweep.d, fitted_prefactor: sweep.prefactor, ..CertificateInputs::default() };
    let cert = log_bound_certificate(&qm, &h_full, &window, &prop, &inputs)?;
    println!("D = {:.4}, C_h = {:.4}, t_h = {:.3}, branch = {}", cert.d, cert.c_h, cert.t_h, cert.branch.as_str());
    println!(
        "‖ψ(t_h)‖_K = {:.8}, lower value = {:.4} vs D/2 = {:.4}, pass = {}",
        cert.local_energy_at_t_h,
        cert.lower_value,
        cert.d / 2.0,
        cert.pass
    );
    Ok(())
}
