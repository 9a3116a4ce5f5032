//! Operator-level properties on realistic grids: positivity of the mass-term
//! quadratic form, insensitivity of the trapped level to the left
//! truncation, and the restricted pair `(H⁺, P⁺)`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sads_dirac::dirac::{
    assemble_p_with, Coefficients, OperatorKind, RadialGrid, SpinorField,
};
use sads_dirac::eigen::{eigen_solve, lowest_eigenpairs};
use sads_dirac::potentials::Potentials;
use sads_dirac::quasimode::{assemble_restricted, QuasimodeConfig, QuasimodeSetup};
use sads_dirac::SpacetimeParams;

fn well(h: f64) -> SpacetimeParams {
    SpacetimeParams::new(0.05, 1.0, 2.0, h).unwrap()
}

/// Random field vanishing at both ends of the grid, with a random mix of
/// smooth and node-to-node components.
fn random_field(grid: RadialGrid, rng: &mut ChaCha8Rng) -> SpinorField {
    let (a, b) = (grid.x_min, grid.x_cut);
    let freq: [f64; 4] = std::array::from_fn(|_| rng.gen_range(1.0..40.0));
    let rough = rng.gen_range(0.0..0.3);
    let mut f = SpinorField::from_fn(grid, |x| {
        let s = (x - a) / (b - a);
        let env = (s * (1.0 - s)).max(0.0);
        std::array::from_fn(|c| Complex64::from_polar(env, freq[c] * x))
    });
    for v in f.values_mut() {
        *v += Complex64::new(rng.gen_range(-rough..rough), rng.gen_range(-rough..rough)) * v.norm();
    }
    f
}

#[test]
fn mass_form_is_nonnegative_on_restricted_interval() {
    for h in [0.2, 0.1] {
        let p = well(h);
        let pots = Potentials::new(p);
        let grid = RadialGrid::new(pots.x_plus(), -1e-3, 3000).unwrap();
        let full = Coefficients::from_potentials(&pots, &grid).unwrap();
        // A ≡ 0 and A' ≡ 0 leave −h²∂² + h²m²B² + ih²mγ¹B'.
        let coeffs = Coefficients { a: vec![0.0; grid.n], da: vec![0.0; grid.n], ..full };
        let op = assemble_p_with(OperatorKind::P, &grid, &p, &coeffs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut worst = f64::INFINITY;
        for _ in 0..50 {
            let f = random_field(grid, &mut rng);
            let q = f.inner(&op.apply(&f).unwrap()).unwrap().re / f.norm().powi(2);
            worst = worst.min(q);
        }
        let c_fit = (-worst).max(0.0) / grid.dx().powi(2);
        println!("h={h}: min form/‖φ‖² = {worst:.3e}, C = {c_fit:.3e}");
        assert!(worst >= -grid.dx().powi(2), "form {worst} below −Δx²");
        let low = lowest_eigenpairs(&op, 1).unwrap()[0].value;
        assert!(low >= -10.0 * grid.dx().powi(2), "lowest eigenvalue {low}");
    }
}

#[test]
fn trapped_level_ignores_left_truncation() {
    let p = well(0.1);
    let pots = Potentials::new(p);
    let x_cut = -1e-3;
    let n30 = 5999;
    let dx = (x_cut + 30.0) / (n30 + 1) as f64;
    let n40 = 7999;
    let x_min40 = x_cut - dx * (n40 + 1) as f64;
    let mut levels = Vec::new();
    for (x_min, n) in [(-30.0, n30), (x_min40, n40)] {
        let grid = RadialGrid::new(x_min, x_cut, n).unwrap();
        let coeffs = Coefficients::from_potentials(&pots, &grid).unwrap();
        let op = assemble_p_with(OperatorKind::P, &grid, &p, &coeffs).unwrap();
        // The well's ground level; horizon-side box modes move with x_min, the
        // level localized in [x₊, 0) must not.
        let pairs = eigen_solve(&op, 1.54, 6).unwrap();
        let localized = pairs
            .iter()
            .max_by(|a, b| {
                let wa = a.vector.norm_on(pots.x_plus(), x_cut);
                let wb = b.vector.norm_on(pots.x_plus(), x_cut);
                wa.total_cmp(&wb)
            })
            .unwrap();
        assert!(localized.vector.norm_on(pots.x_plus(), x_cut) > 0.99);
        levels.push(localized.value);
    }
    let change = (levels[0] - levels[1]).abs();
    println!("trapped level {:.12} vs {:.12}, change {change:.2e}", levels[0], levels[1]);
    assert!(change < 1e-8);
}

#[test]
fn restricted_pair_is_consistent() {
    let p = well(0.1);
    let setup = QuasimodeSetup::new(p, QuasimodeConfig { n: 1500, ..QuasimodeConfig::default() }).unwrap();
    let hp = setup.restricted_operator(OperatorKind::HPlus).unwrap();
    let pp = setup.restricted_operator(OperatorKind::PPlus).unwrap();
    assert!(hp.hermiticity_residual() < 1e-12);
    assert!(pp.hermiticity_residual() < 1e-12);
    let dx = setup.restricted.dx();
    let low = lowest_eigenpairs(&pp, 1).unwrap()[0].value;
    assert!(low >= -10.0 * dx * dx);
    assert!(assemble_restricted(OperatorKind::H, &p, &setup.restricted).is_err());

    // (H⁺)² against P⁺ on an interior bump, under grid halving.
    let mut errs = Vec::new();
    for n in [399usize, 799, 1599] {
        let grid = RadialGrid::new(setup.x_plus, -1e-3, n).unwrap();
        let h = assemble_restricted(OperatorKind::HPlus, &p, &grid).unwrap();
        let pm = assemble_restricted(OperatorKind::PPlus, &p, &grid).unwrap();
        let bump = SpinorField::from_fn(grid, |x| {
            let s = ((x + 0.7) / 0.3).powi(2);
            let g = if s < 1.0 { (-1.0 / (1.0 - s)).exp() } else { 0.0 };
            [Complex64::new(g, 0.0), Complex64::new(0.0, g), Complex64::new(0.5 * g, 0.0), Complex64::new(g, -g)]
        });
        let mut d = h.apply(&h.apply(&bump).unwrap()).unwrap();
        d.axpy(Complex64::new(-1.0, 0.0), &pm.apply(&bump).unwrap()).unwrap();
        errs.push(d.norm() / bump.norm());
    }
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.8, "order {order} from {errs:?}");
    }
}

#[test]
fn quasimode_concentrates_in_its_window() {
    use sads_dirac::evolution::{local_energy, CompactWindow};
    use sads_dirac::quasimode::build_quasimode;
    let setup = QuasimodeSetup::new(well(0.1), QuasimodeConfig { n: 1500, ..QuasimodeConfig::default() }).unwrap();
    let qm = build_quasimode(&setup).unwrap();
    assert!((qm.phi.norm() - 1.0).abs() < 1e-12);
    let (a, b) = qm.mass_window(0.99);
    let window = CompactWindow::new(a, b).unwrap();
    let inside = local_energy(&qm.phi, &window).unwrap();
    assert!(inside.powi(2) >= 0.99 - 1e-12, "mass in window {}", inside.powi(2));
    assert!(a > setup.x_plus && b < 0.0);
}
