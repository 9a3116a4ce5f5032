//! Restricted operators `P⁺`, `H⁺` on `[x₊, 0)`, the eigenvalue `E⁺(h)` near
//! the model level `E₂(h)`, and the quasimode `φ_h = χφ⁺` extended by zero to
//! the whole line.
//!
//! The residual `‖(H − √E⁺)φ_h‖` equals `‖hχ'φ⁺‖` (only the commutator with
//! the transport term survives), and `χ'` lives in the classically forbidden
//! band where `φ⁺` is exponentially small. [`residual_sweep`] fits the
//! resulting decay rate `D` in `e^{−D/h}`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dirac::{
    assemble_h_with, assemble_p_with, boundary_behavior_check, BoundaryReport, Coefficients, HermitianOperator,
    KBasis, OperatorKind, RadialGrid, SpinorField,
};
use crate::eigen::{eigen_solve_with, EigenOptions, EigenPair};
use crate::error::{LabError, Result};
use crate::fit::{linear_fit, LinearFit};
use crate::geometry::SpacetimeParams;
use crate::model::{model_eigenfunction_unnormalized, model_levels, ModelFunction};
use crate::potentials::Potentials;

/// Knobs of the quasimode construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasimodeConfig {
    /// Interior nodes of the restricted grid `[x₊, x_cut]`.
    pub n: usize,
    /// Right truncation point (`< 0`).
    pub x_cut: f64,
    /// Left end of the full-line grid; `None` means `x₊ − 2.5 l`.
    pub x_min: Option<f64>,
    /// Energy window `S`; `None` means `(A²(x₊) − 1/l²)/2`.
    pub s: Option<f64>,
    /// Transition band of `χ` as fractions of `x_A(1/l² + S) − x₊`.
    pub chi_band: (f64, f64),
    /// Residual tolerance for the `H⁺` eigensolve.
    pub tol: f64,
    /// Seed of the eigensolver's start block.
    pub seed: u64,
}

impl Default for QuasimodeConfig {
    fn default() -> Self {
        Self { n: 3000, x_cut: -1e-3, x_min: None, s: None, chi_band: (0.1, 0.4), tol: 1e-11, seed: EigenOptions::default().seed }
    }
}

/// Smooth step `s(t)` rising from 0 at `t ≤ 0` to 1 at `t ≥ 1`, built from
/// `e^{−1/t}`; returns `(s, s')`.
pub fn smooth_step(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    // s = 1/(1 + e^{1/t − 1/(1−t)}); work with the exponent to avoid 0/0.
    let u = 1.0 / t - 1.0 / (1.0 - t);
    let du = -1.0 / (t * t) - 1.0 / ((1.0 - t) * (1.0 - t));
    if u > 700.0 {
        return (0.0, 0.0);
    }
    let e = u.exp();
    let s = 1.0 / (1.0 + e);
    (s, -s * s * e * du)
}

/// The cutoff `χ`: `0` left of the band, `1` right of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    /// `χ ≡ 1`.
    Unit,
    /// Smooth transition on `[a, b]`.
    Band(f64, f64),
}

impl Cutoff {
    /// `(χ(x), χ'(x))`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        match *self {
            Self::Unit => (1.0, 0.0),
            Self::Band(a, b) => {
                let (s, ds) = smooth_step((x - a) / (b - a));
                (s, ds / (b - a))
            }
        }
    }
}

/// Everything derived from `(params, config)` before any solve.
#[derive(Debug, Clone)]
pub struct QuasimodeSetup {
    pub params: SpacetimeParams,
    pub config: QuasimodeConfig,
    pub potentials: Potentials,
    pub s: f64,
    pub x_plus: f64,
    /// `x_A(1/l² + S)`, the right edge of the forbidden region.
    pub x_a_window: f64,
    pub cutoff: Cutoff,
    pub restricted: RadialGrid,
    pub full: RadialGrid,
    /// Full-grid index of the first restricted node.
    pub offset: usize,
}

impl QuasimodeSetup {
    pub fn new(params: SpacetimeParams, config: QuasimodeConfig) -> Result<Self> {
        let potentials = Potentials::new(params);
        let l = params.ads_radius;
        let x_plus = potentials.x_plus();
        let ceiling = potentials.a2_at_cutoff() - 1.0 / (l * l);
        let s = config.s.unwrap_or(0.5 * ceiling);
        if !(s > 0.0 && s < ceiling) {
            return Err(LabError::Config(format!("S = {s} must lie in (0, A²(x₊) − 1/l²) = (0, {ceiling})")));
        }
        let x_a_window = potentials.turning_point(1.0 / (l * l) + s)?;
        let (f0, f1) = config.chi_band;
        if !(0.0 < f0 && f0 < f1 && f1 < 1.0) {
            return Err(LabError::Config(format!("chi band fractions must satisfy 0 < a < b < 1, got ({f0}, {f1})")));
        }
        let width = x_a_window - x_plus;
        let cutoff = Cutoff::Band(x_plus + f0 * width, x_plus + f1 * width);
        if !(config.x_cut > x_a_window && config.x_cut < 0.0) {
            return Err(LabError::Config(format!("x_cut = {} must lie in (x_A, 0)", config.x_cut)));
        }
        let restricted = RadialGrid::new(x_plus, config.x_cut, config.n)?;
        restricted.check_resolution(&params)?;
        let dx = restricted.dx();
        let x_min = config.x_min.unwrap_or(x_plus - 2.5 * l);
        if !(x_min < x_plus) {
            return Err(LabError::Config(format!("full grid must start left of x₊ = {x_plus}, got {x_min}")));
        }
        // Extend with the same spacing so the restricted nodes are full-grid nodes
        // and x₊ itself is a full-grid node.
        let offset = ((x_plus - x_min) / dx).ceil() as usize;
        let full = RadialGrid::new(x_plus - offset as f64 * dx, config.x_cut, config.n + offset)?;
        Ok(Self { params, config, potentials, s, x_plus, x_a_window, cutoff, restricted, full, offset })
    }

    /// Same construction with `n` doubled (grid spacing halved).
    pub fn refined(&self) -> Result<Self> {
        let config = QuasimodeConfig { n: 2 * self.config.n + 1, ..self.config };
        Self::new(self.params, config)
    }

    pub fn with_cutoff(&self, cutoff: Cutoff) -> Self {
        Self { cutoff, ..self.clone() }
    }

    pub fn restricted_operator(&self, kind: OperatorKind) -> Result<HermitianOperator> {
        assemble_restricted_with(kind, &self.params, &self.restricted, &self.potentials)
    }

    pub fn full_h(&self) -> Result<HermitianOperator> {
        let coeffs = Coefficients::from_potentials(&self.potentials, &self.full)?;
        assemble_h_with(OperatorKind::H, &self.full, &self.params, &coeffs)
    }
}

fn assemble_restricted_with(
    kind: OperatorKind,
    params: &SpacetimeParams,
    grid: &RadialGrid,
    pots: &Potentials,
) -> Result<HermitianOperator> {
    let x_plus = pots.x_plus();
    if (grid.x_min - x_plus).abs() > 1e-12 * x_plus.abs().max(1.0) {
        return Err(LabError::Config(format!("restricted grid must start at x₊ = {x_plus}, got {}", grid.x_min)));
    }
    grid.check_resolution(params)?;
    let coeffs = Coefficients::from_potentials(pots, grid)?;
    match kind {
        OperatorKind::PPlus => assemble_p_with(kind, grid, params, &coeffs),
        OperatorKind::HPlus => assemble_h_with(kind, grid, params, &coeffs),
        other => Err(LabError::Config(format!("{other:?} is not a restricted operator"))),
    }
}

/// `P⁺` or `H⁺` with Dirichlet conditions at `x₊` and `x_cut`.
pub fn assemble_restricted(kind: OperatorKind, params: &SpacetimeParams, grid: &RadialGrid) -> Result<HermitianOperator> {
    assemble_restricted_with(kind, params, grid, &Potentials::new(*params))
}

/// The `P⁺` eigenvalue nearest `E₂(h)`.
#[derive(Debug, Clone)]
pub struct EPlus {
    pub pair: EigenPair,
    /// A second eigenvector of the (doubly degenerate) eigenvalue, if found.
    pub partner: Option<EigenPair>,
    pub e2: f64,
    /// `|E⁺ − E₂|`.
    pub distance: f64,
    /// `|E⁺ − E₂| > 10 h^{1/2}/l²`.
    pub far_from_model: bool,
    /// `E⁺ < 1/l² + S`.
    pub below_window: bool,
    pub boundary: BoundaryReport,
    /// Norm of the projection of the cut-off model trial spinor onto the
    /// `E⁺` eigenspace, relative to its norm.
    pub model_overlap: f64,
}

pub fn find_e_plus(setup: &QuasimodeSetup) -> Result<EPlus> {
    let params = &setup.params;
    let l2 = params.ads_radius * params.ads_radius;
    let op = setup.restricted_operator(OperatorKind::PPlus)?;
    let e2 = model_levels(params).e2;
    let opts = EigenOptions { seed: setup.config.seed, ..EigenOptions::default() };
    let mut pairs = eigen_solve_with(&op, e2, 2, &opts)?;
    let pair = pairs.remove(0);
    let partner = pairs.pop().filter(|p| (p.value - pair.value).abs() <= 1e-8 * pair.value.abs().max(1.0));
    let distance = (pair.value - e2).abs();
    let boundary = boundary_behavior_check(&pair.vector, params);
    let model_overlap = model_overlap(setup, &pair, partner.as_ref())?;
    Ok(EPlus {
        far_from_model: distance > 10.0 * params.h.sqrt() / l2,
        below_window: pair.value < 1.0 / l2 + setup.s,
        e2,
        distance,
        boundary,
        model_overlap,
        pair,
        partner,
    })
}

fn model_overlap(setup: &QuasimodeSetup, pair: &EigenPair, partner: Option<&EigenPair>) -> Result<f64> {
    let grid = setup.restricted;
    let k = KBasis::new().k();
    let params = &setup.params;
    let trial = SpinorField::from_fn(grid, |x| {
        let p1 = model_eigenfunction_unnormalized(ModelFunction::Psi1, x, params).unwrap_or(0.0);
        let p2 = model_eigenfunction_unnormalized(ModelFunction::Psi2, x, params).unwrap_or(0.0);
        let chi = setup.cutoff.eval(x).0;
        let v = nalgebra::Vector4::new(p1, p2, p2, p1).map(|y| Complex64::new(chi * y, 0.0));
        let out = k * v;
        [out[0], out[1], out[2], out[3]]
    });
    let mut basis = vec![pair.vector.clone()];
    if let Some(p) = partner {
        let mut q = p.vector.clone();
        let proj = pair.vector.inner(&q)?;
        q.axpy(-proj, &pair.vector)?;
        if q.normalize().is_ok() {
            basis.push(q);
        }
    }
    let tn = trial.norm();
    let mut captured = 0.0;
    for b in &basis {
        captured += b.inner(&trial)?.norm_sqr();
    }
    Ok(captured.sqrt() / tn)
}

/// The cut-off eigenvector of `H⁺`, extended by zero.
#[derive(Debug, Clone)]
pub struct Quasimode {
    /// `φ_h` on the full grid, unit norm.
    pub phi: SpinorField,
    /// The `H⁺` eigenvector `φ⁺`, unit norm on the restricted grid.
    pub phi_plus: SpinorField,
    /// The `H⁺` eigenvalue, the discrete `√E⁺`.
    pub sqrt_e_plus: f64,
    pub eigen_residual: f64,
    /// `‖χφ⁺‖` before renormalization.
    pub chi_norm: f64,
    pub restricted: RadialGrid,
    pub full: RadialGrid,
    pub offset: usize,
    pub cutoff: Cutoff,
    pub h: f64,
}

impl Quasimode {
    /// `‖hχ'φ⁺‖/‖χφ⁺‖`, the commutator form of the residual.
    pub fn commutator_norm(&self) -> f64 {
        let grid = &self.restricted;
        let mut s = 0.0;
        for j in 0..grid.n {
            let d = self.cutoff.eval(grid.node(j)).1;
            let v = self.phi_plus.node_norm(j);
            s += (self.h * d * v).powi(2);
        }
        (grid.dx() * s).sqrt() / self.chi_norm
    }

    /// Smallest interval `[a, b]` holding `fraction` of `‖φ_h‖²`, trimmed
    /// equally from both tails.
    pub fn mass_window(&self, fraction: f64) -> (f64, f64) {
        mass_window(&self.phi, fraction)
    }
}

/// Interval holding `fraction` of the field's squared norm, trimmed equally
/// from both tails.
pub fn mass_window(field: &SpinorField, fraction: f64) -> (f64, f64) {
    let grid = field.grid();
    let w: Vec<f64> = (0..grid.n).map(|j| field.node_norm(j).powi(2)).collect();
    let total: f64 = w.iter().sum();
    let tail = 0.5 * (1.0 - fraction) * total;
    let mut acc = 0.0;
    let mut lo = 0;
    for (j, v) in w.iter().enumerate() {
        if acc + v > tail {
            lo = j;
            break;
        }
        acc += v;
    }
    acc = 0.0;
    let mut hi = grid.n - 1;
    for (j, v) in w.iter().enumerate().rev() {
        if acc + v > tail {
            hi = j;
            break;
        }
        acc += v;
    }
    (grid.node(lo), grid.node(hi))
}

/// Eigenvector of `H⁺` at `+√E₂`, cut off by `χ` and extended by zero.
pub fn build_quasimode(setup: &QuasimodeSetup) -> Result<Quasimode> {
    let params = &setup.params;
    let target = model_levels(params).e2.sqrt();
    let op = setup.restricted_operator(OperatorKind::HPlus)?;
    let opts = EigenOptions { tol: setup.config.tol, seed: setup.config.seed, ..EigenOptions::default() };
    let pairs = eigen_solve_with(&op, target, 2, &opts)?;
    let window = 10.0 * params.h.sqrt();
    let pair = pairs.iter().find(|p| (p.value - target).abs() <= window).cloned().ok_or_else(|| {
        let found: Vec<String> = pairs.iter().map(|p| format!("{:.6}", p.value)).collect();
        LabError::Physics(format!("no H⁺ eigenvalue within {window:.3e} of √E₂ = {target:.6}; nearest: {}", found.join(", ")))
    })?;
    let restricted = setup.restricted;
    let full = setup.full;
    let mut values = vec![Complex64::new(0.0, 0.0); full.dim()];
    for j in 0..restricted.n {
        let chi = setup.cutoff.eval(restricted.node(j)).0;
        for c in 0..4 {
            values[4 * (j + setup.offset) + c] = pair.vector.spinor(j)[c] * chi;
        }
    }
    let mut phi = SpinorField::from_values(full, values)?;
    let chi_norm = phi.normalize()?;
    Ok(Quasimode {
        phi,
        phi_plus: pair.vector,
        sqrt_e_plus: pair.value,
        eigen_residual: pair.residual,
        chi_norm,
        restricted,
        full,
        offset: setup.offset,
        cutoff: setup.cutoff,
        h: params.h,
    })
}

/// `‖Hφ − λφ‖` in the discrete L² norm.
pub fn residual_norm(phi: &SpinorField, lambda: f64, h_full: &HermitianOperator) -> Result<f64> {
    let mut r = h_full.apply(phi)?;
    r.axpy(Complex64::new(-lambda, 0.0), phi)?;
    Ok(r.norm())
}

/// One `h` of the residual sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRecord {
    pub h: f64,
    pub e_plus: f64,
    /// The `H⁺` eigenvalue used as `√E⁺`.
    pub sqrt_e_plus: f64,
    pub residual: f64,
    /// `‖hχ'φ⁺‖`, which must agree with `residual`.
    pub commutator: f64,
    /// Residual on the grid with half the spacing.
    pub residual_fine: f64,
    pub floor: f64,
    pub floor_limited: bool,
    pub n: usize,
    pub dx: f64,
    pub distance_to_e2: f64,
}

/// Runs the full per-`h` pipeline: `E⁺`, quasimode, residual, and the
/// discretization floor from a second run at half the spacing.
pub fn measure_residual(setup: &QuasimodeSetup) -> Result<ResidualRecord> {
    let e_plus = find_e_plus(setup)?;
    let (residual, commutator, quasimode) = residual_and_commutator(setup)?;
    let fine_setup = setup.refined()?;
    let (residual_fine, _, fine_mode) = residual_and_commutator(&fine_setup)?;
    // Richardson estimate of the O(Δx²) error, plus what the eigensolves and
    // rounding can resolve.
    let h_norm = setup.params.h / setup.restricted.dx() + 10.0;
    let floor = (residual - residual_fine).abs() * 4.0 / 3.0
        + quasimode.eigen_residual.max(fine_mode.eigen_residual)
        + 100.0 * f64::EPSILON * h_norm;
    let tolerance = 1e-10f64.max(5.0 * floor);
    if (residual - commutator).abs() > tolerance {
        return Err(LabError::Numerical(format!(
            "residual {residual:.6e} and commutator {commutator:.6e} disagree beyond {tolerance:.3e}"
        )));
    }
    Ok(ResidualRecord {
        h: setup.params.h,
        e_plus: e_plus.pair.value,
        sqrt_e_plus: quasimode.sqrt_e_plus,
        residual,
        commutator,
        residual_fine,
        floor,
        floor_limited: residual < 10.0 * floor,
        n: setup.config.n,
        dx: setup.restricted.dx(),
        distance_to_e2: e_plus.distance,
    })
}

fn residual_and_commutator(setup: &QuasimodeSetup) -> Result<(f64, f64, Quasimode)> {
    let q = build_quasimode(setup)?;
    let h_full = setup.full_h()?;
    let r = residual_norm(&q.phi, q.sqrt_e_plus, &h_full)?;
    Ok((r, q.commutator_norm(), q))
}

/// Sweep output with the fitted rate `D` in `residual ≈ C e^{−D/h}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub records: Vec<ResidualRecord>,
    pub fit: LinearFit,
    pub d: f64,
    /// `C = e^{intercept}`.
    pub prefactor: f64,
    pub used: Vec<f64>,
}

/// Builds a setup per `h` (sharing `config`) on a pool of `workers` threads
/// and fits `ln(residual)` against `1/h` over the records that are not
/// floor-limited.
pub fn residual_sweep(
    h_list: &[f64],
    params: &SpacetimeParams,
    config: &QuasimodeConfig,
    workers: usize,
) -> Result<SweepResult> {
    residual_sweep_with(h_list, params, workers, |_| *config)
}

/// As [`residual_sweep`], with a per-`h` configuration.
pub fn residual_sweep_with(
    h_list: &[f64],
    params: &SpacetimeParams,
    workers: usize,
    config_for: impl Fn(f64) -> QuasimodeConfig + Sync,
) -> Result<SweepResult> {
    if h_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(LabError::Config("h_list must be strictly decreasing".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    let records: Vec<ResidualRecord> = pool.install(|| {
        h_list
            .par_iter()
            .map(|&h| QuasimodeSetup::new(params.with_h(h)?, config_for(h)).and_then(|s| measure_residual(&s)))
            .collect::<Result<Vec<_>>>()
    })?;
    fit_records(records)
}

/// Fits `ln(residual) = −D/h + ln C` over the usable records.
pub fn fit_records(records: Vec<ResidualRecord>) -> Result<SweepResult> {
    let usable: Vec<&ResidualRecord> = records.iter().filter(|r| !r.floor_limited && r.residual > 0.0).collect();
    if usable.len() < 3 {
        return Err(LabError::Numerical(format!(
            "only {} records above the discretization floor; need 3 for the fit",
            usable.len()
        )));
    }
    let xs: Vec<f64> = usable.iter().map(|r| 1.0 / r.h).collect();
    let ys: Vec<f64> = usable.iter().map(|r| r.residual.ln()).collect();
    let fit = linear_fit(&xs, &ys)?;
    let used = usable.iter().map(|r| r.h).collect();
    Ok(SweepResult { d: -fit.slope, prefactor: fit.intercept.exp(), fit, used, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::eigen_solve;

    fn params(h: f64) -> SpacetimeParams {
        SpacetimeParams::new(0.05, 1.0, 2.0, h).unwrap()
    }

    #[test]
    fn smooth_step_shape() {
        assert_eq!(smooth_step(-0.1), (0.0, 0.0));
        assert_eq!(smooth_step(1.5), (1.0, 0.0));
        assert!((smooth_step(0.5).0 - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for k in 1..1000 {
            let t = k as f64 / 1000.0;
            let (s, ds) = smooth_step(t);
            assert!(s >= prev && ds >= 0.0);
            let eps = 1e-6;
            if t > 2.0 * eps && t < 1.0 - 2.0 * eps {
                let fd = (smooth_step(t + eps).0 - smooth_step(t - eps).0) / (2.0 * eps);
                assert!((fd - ds).abs() < 1e-6 * ds.max(1.0));
            }
            prev = s;
        }
    }

    #[test]
    fn setup_geometry() {
        let s = QuasimodeSetup::new(params(0.1), QuasimodeConfig::default()).unwrap();
        assert!((s.full.node(s.offset) - s.restricted.node(0)).abs() < 1e-12);
        assert!((s.full.node(s.offset - 1) - s.x_plus).abs() < 1e-12);
        assert!((s.full.dx() - s.restricted.dx()).abs() < 1e-15);
        assert!(s.x_plus < s.x_a_window && s.x_a_window < 0.0);
        let bad = QuasimodeConfig { chi_band: (0.5, 0.2), ..QuasimodeConfig::default() };
        assert!(QuasimodeSetup::new(params(0.1), bad).is_err());
        let wrong = RadialGrid::new(s.x_plus - 0.1, -1e-3, 3000).unwrap();
        assert!(matches!(assemble_restricted(OperatorKind::PPlus, &params(0.1), &wrong), Err(LabError::Config(_))));
    }

    #[test]
    fn unit_cutoff_leaves_only_solver_residual() {
        let setup = QuasimodeSetup::new(params(0.1), QuasimodeConfig { n: 1500, ..QuasimodeConfig::default() })
            .unwrap()
            .with_cutoff(Cutoff::Unit);
        let q = build_quasimode(&setup).unwrap();
        let h_plus = setup.restricted_operator(OperatorKind::HPlus).unwrap();
        let r = residual_norm(&q.phi_plus, q.sqrt_e_plus, &h_plus).unwrap();
        assert!(r <= 1e-9, "{r}");
        assert_eq!(q.commutator_norm(), 0.0);
    }

    #[test]
    fn quasimode_contract() {
        let setup = QuasimodeSetup::new(params(0.1), QuasimodeConfig { n: 1500, ..QuasimodeConfig::default() }).unwrap();
        let q = build_quasimode(&setup).unwrap();
        assert!((q.phi.norm() - 1.0).abs() < 1e-12);
        for j in 0..setup.offset {
            assert_eq!(q.phi.node_norm(j), 0.0);
        }
        let h_full = setup.full_h().unwrap();
        let r = residual_norm(&q.phi, q.sqrt_e_plus, &h_full).unwrap();
        assert!((r - q.commutator_norm()).abs() < 1e-3 * r, "{r} vs {}", q.commutator_norm());
        let (a, b) = q.mass_window(0.99);
        assert!(q.phi.norm_on(a, b) >= 0.99f64.sqrt() - 1e-3);
    }

    #[test]
    fn deeper_band_lowers_residual() {
        let base = QuasimodeSetup::new(params(0.1), QuasimodeConfig { n: 1500, ..QuasimodeConfig::default() }).unwrap();
        let deep = QuasimodeSetup::new(
            params(0.1),
            QuasimodeConfig { n: 1500, chi_band: (0.05, 0.2), ..QuasimodeConfig::default() },
        )
        .unwrap();
        let h_full = base.full_h().unwrap();
        let q1 = build_quasimode(&base).unwrap();
        let q2 = build_quasimode(&deep).unwrap();
        let r1 = residual_norm(&q1.phi, q1.sqrt_e_plus, &h_full).unwrap();
        let r2 = residual_norm(&q2.phi, q2.sqrt_e_plus, &h_full).unwrap();
        assert!(r2 < r1, "{r2} !< {r1}");
    }

    #[test]
    fn plus_minus_pairing() {
        let setup = QuasimodeSetup::new(params(0.1), QuasimodeConfig { n: 1500, ..QuasimodeConfig::default() }).unwrap();
        let op = setup.restricted_operator(OperatorKind::HPlus).unwrap();
        let target = model_levels(&setup.params).e2.sqrt();
        let plus = eigen_solve(&op, target, 1).unwrap()[0].value;
        let minus = eigen_solve(&op, -plus, 1).unwrap()[0].value;
        assert!((plus + minus).abs() < 1e-9);
    }

    #[test]
    fn fit_needs_three_records() {
        let rec = |h: f64, limited| ResidualRecord {
            h,
            e_plus: 1.0,
            sqrt_e_plus: 1.0,
            residual: (-1.0 / h).exp(),
            commutator: 0.0,
            residual_fine: 0.0,
            floor: 0.0,
            floor_limited: limited,
            n: 10,
            dx: 0.1,
            distance_to_e2: 0.0,
        };
        assert!(fit_records(vec![rec(0.2, false), rec(0.1, false), rec(0.05, true)]).is_err());
        let fit = fit_records(vec![rec(0.2, false), rec(0.1, false), rec(0.05, false), rec(0.01, true)]).unwrap();
        assert!((fit.d - 1.0).abs() < 1e-12 && fit.used.len() == 3);
    }
}
