//! Forbidden-region mass of the `P⁺` ground state and the weighted estimate
//! behind it, plus the `h` threshold of the lemma surrogate.

use sads_dirac::agmon::{admissible_weight_scale, agmon_sweep, AgmonSettings, LemmaSurrogate};
use sads_dirac::quasimode::QuasimodeConfig;
use sads_dirac::SpacetimeParams;

fn main() -> sads_dirac::Result<()> {
    let params = SpacetimeParams::new(0.05, 1.0, 2.0, 0.1)?;
    let settings = AgmonSettings::default();
    let config = QuasimodeConfig { n: 3000, ..QuasimodeConfig::default() };
    let sweep = agmon_sweep(&[0.2, 0.15, 0.1, 0.07, 0.05], &params, &config, &settings, 1)?;
    for r in &sweep.records {
        println!(
            "h = {:<5} E = {:.8} mass σ₁ = {:.3e} C_implied = {:.3e} noise = {}",
            r.h, r.energy, r.mass_sigma1, r.weighted.c_implied, r.noise_flag
        );
    }
    println!("ε_fit = {:.4} (R² {:.5})", sweep.epsilon_fit, sweep.mass_fit.r2);

    let lemma = LemmaSurrogate::from_settings(&params, &settings);
    println!("k = {:.4e}, weight scale c = {:.3}", lemma.k, admissible_weight_scale(lemma.k));
    match lemma.threshold(0.1, 1e-6, 60)? {
        Some(h0) => println!("lemma margin positive for h ≤ h₀ = {h0:.3e}"),
        None => println!("no threshold found in [1e-6, 0.1]"),
    }
    Ok(())
}
