//! Unitary propagation `e^{itH}` by the Cayley step, local energy on compact
//! windows, the Duhamel lower bound for a quasimode and the logarithmic
//! lower-bound certificate built on it.

use num_complex::Complex64;

use crate::banded::{BandLu, BandMatrix};
use crate::dirac::{HermitianOperator, RadialGrid, SpinorField};
use crate::eigen::norm_estimate;
use crate::error::{LabError, Result};
use crate::geometry::SpacetimeParams;
use crate::potentials::inner_cutoff_x_plus;
use crate::quasimode::{residual_norm, Quasimode, QuasimodeConfig};

/// Largest admissible `dt·‖H‖_est`.
pub const MAX_DT_NORM: f64 = 0.5;
/// `dt·‖H‖_est` used when no step is given.
pub const DEFAULT_DT_NORM: f64 = 0.4;
/// Tolerated per-step deviation of the norm ratio from 1.
pub const STEP_NORM_TOL: f64 = 1e-11;

/// Evolution grid defaults, coarse enough for 10⁵–10⁶ Cayley steps:
/// restricted nodes, left margin beyond `x₊` in units of `l`, and `x_cut`.
pub const EVOLUTION_N: usize = 400;
pub const EVOLUTION_MARGIN: f64 = 1.0;
pub const EVOLUTION_X_CUT: f64 = -0.01;

/// Quasimode configuration on the evolution grid.
pub fn evolution_quasimode_config(params: &SpacetimeParams) -> QuasimodeConfig {
    let x_min = inner_cutoff_x_plus(params).1 - EVOLUTION_MARGIN * params.ads_radius;
    QuasimodeConfig { n: EVOLUTION_N, x_min: Some(x_min), x_cut: EVOLUTION_X_CUT, ..QuasimodeConfig::default() }
}

/// `K = [a, b]` with `a < b < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompactWindow {
    pub a: f64,
    pub b: f64,
}

impl CompactWindow {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a < b && b < 0.0 && a.is_finite()) {
            return Err(LabError::Config(format!("window needs a < b < 0, got [{a}, {b}]")));
        }
        Ok(Self { a, b })
    }

    /// Errors unless `K ⊂ [x_min, x_cut]`.
    pub fn check_inside(&self, grid: &RadialGrid) -> Result<()> {
        if self.a < grid.x_min || self.b > grid.x_cut {
            return Err(LabError::Config(format!(
                "window [{}, {}] is not inside the grid [{}, {}]",
                self.a, self.b, grid.x_min, grid.x_cut
            )));
        }
        Ok(())
    }
}

/// `‖field‖_{L²(K)}`.
pub fn local_energy(field: &SpinorField, window: &CompactWindow) -> Result<f64> {
    window.check_inside(field.grid())?;
    Ok(field.norm_on(window.a, window.b))
}

/// `⟨field, H field⟩`, real for Hermitian `H`.
pub fn energy(field: &SpinorField, h: &HermitianOperator) -> Result<f64> {
    Ok(field.inner(&h.apply(field)?)?.re)
}

/// Phase rate of the Cayley step on an eigenvector with eigenvalue `λ`:
/// `(2/dt)·arctan(λ dt/2)`.
pub fn cayley_phase_rate(lambda: f64, dt: f64) -> f64 {
    2.0 / dt * (0.5 * lambda * dt).atan()
}

/// `(I − i dt H/2)⁻¹(I + i dt H/2)` with the left factor decomposed once.
#[derive(Debug, Clone)]
pub struct CayleyPropagator {
    pub dt: f64,
    pub norm_estimate: f64,
    grid: RadialGrid,
    lhs: BandLu,
    rhs: BandMatrix,
}

impl CayleyPropagator {
    pub fn new(h: &HermitianOperator, dt: f64) -> Result<Self> {
        let norm = norm_estimate(h);
        if !(dt > 0.0) || dt * norm > MAX_DT_NORM {
            return Err(LabError::Config(format!(
                "dt = {dt:e} gives dt·‖H‖ = {:.3} outside (0, {MAX_DT_NORM}]",
                dt * norm
            )));
        }
        Self::build(h, dt, norm)
    }

    /// Step `DEFAULT_DT_NORM/‖H‖_est`.
    pub fn with_default_step(h: &HermitianOperator) -> Result<Self> {
        let norm = norm_estimate(h);
        Self::build(h, DEFAULT_DT_NORM / norm, norm)
    }

    fn build(h: &HermitianOperator, dt: f64, norm: f64) -> Result<Self> {
        let half = Complex64::new(0.0, 0.5 * dt);
        let one = Complex64::new(1.0, 0.0);
        let lhs = h.to_band(one, -half).factor()?;
        let rhs = h.to_band(one, half);
        Ok(Self { dt, norm_estimate: norm, grid: *h.grid(), lhs, rhs })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    /// Applies `steps` Cayley steps in place; returns the largest per-step
    /// `|‖ψ_{n+1}‖/‖ψ_n‖ − 1|`.
    pub fn advance(&self, values: &mut [Complex64], steps: usize) -> Result<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); values.len()];
        let mut drift: f64 = 0.0;
        let mut before: f64 = values.iter().map(|z| z.norm_sqr()).sum();
        for _ in 0..steps {
            self.rhs.matvec(values, &mut buf);
            self.lhs.solve_in_place(&mut buf);
            values.copy_from_slice(&buf);
            let after: f64 = values.iter().map(|z| z.norm_sqr()).sum();
            if before > 0.0 {
                let d = ((after / before).sqrt() - 1.0).abs();
                if !(d <= STEP_NORM_TOL) {
                    return Err(LabError::Numerical(format!("Cayley step changed the norm by {d:e}")));
                }
                drift = drift.max(d);
            }
            before = after;
        }
        Ok(drift)
    }
}

/// A field at time `t` with its norm log.
#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub field: SpinorField,
    pub t: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// Largest per-step norm-ratio deviation so far.
    pub max_step_drift: f64,
    pub steps: usize,
}

impl EvolutionState {
    pub fn new(field: SpinorField) -> Self {
        let n0 = field.norm();
        Self { field, t: 0.0, times: vec![0.0], norms: vec![n0], max_step_drift: 0.0, steps: 0 }
    }

    /// `max_t |‖ψ(t)‖ − ‖ψ(0)‖|` over the log, relative to `‖ψ(0)‖`.
    pub fn unitarity_drift(&self) -> f64 {
        let n0 = self.norms[0];
        if n0 == 0.0 {
            return self.norms.iter().copied().fold(0.0, f64::max);
        }
        self.norms.iter().map(|n| (n - n0).abs() / n0).fold(0.0, f64::max)
    }
}

/// Advances `state` to `t_target` with steps of `prop.dt`; a final shorter
/// step uses its own decomposition so the end time is exact.
pub fn evolve(mut state: EvolutionState, prop: &CayleyPropagator, h: &HermitianOperator, t_target: f64) -> Result<EvolutionState> {
    if state.field.grid() != prop.grid() {
        return Err(LabError::Shape("field and propagator live on different grids".into()));
    }
    if t_target < state.t {
        return Err(LabError::Config(format!("cannot evolve backwards from t = {} to {t_target}", state.t)));
    }
    let span = t_target - state.t;
    let mut steps = (span / prop.dt).floor() as usize;
    let mut rest = span - steps as f64 * prop.dt;
    if rest > (1.0 - 1e-9) * prop.dt {
        steps += 1;
        rest = 0.0;
    }
    let d = prop.advance(state.field.values_mut(), steps)?;
    state.max_step_drift = state.max_step_drift.max(d);
    state.steps += steps;
    if rest > 1e-12 * prop.dt {
        let tail = CayleyPropagator::build(h, rest, prop.norm_estimate)?;
        let d = tail.advance(state.field.values_mut(), 1)?;
        state.max_step_drift = state.max_step_drift.max(d);
        state.steps += 1;
    }
    state.t = t_target;
    state.times.push(t_target);
    state.norms.push(state.field.norm());
    Ok(state)
}

/// `count` times, logarithmically spaced on `[t_first, t_max]`.
pub fn log_times(t_first: f64, t_max: f64, count: usize) -> Vec<f64> {
    if count < 2 || t_max <= t_first {
        return vec![t_max];
    }
    let r = (t_max / t_first).ln() / (count as f64 - 1.0);
    (0..count).map(|i| if i + 1 == count { t_max } else { t_first * (r * i as f64).exp() }).collect()
}

/// One recorded time of a decay experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecaySample {
    pub t: f64,
    pub local_energy: f64,
    pub total_norm: f64,
    /// `λ − t r_h`.
    pub bound: f64,
    /// `‖ψ(t) − e^{i√E⁺t}φ_h‖`.
    pub duhamel_distance: f64,
    /// Allowance for rounding and the Cayley phase error at this `t`.
    pub slack: f64,
}

/// Evolution of a quasimode against the Duhamel bound.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub h: f64,
    pub window: CompactWindow,
    /// `‖φ_h‖_{L²(K)}`.
    pub lambda: f64,
    /// `‖(H − √E⁺)φ_h‖`.
    pub r_h: f64,
    pub sqrt_e_plus: f64,
    pub dt: f64,
    pub samples: Vec<DecaySample>,
    pub max_step_drift: f64,
    pub unitarity_drift: f64,
    /// `local_energy ≥ bound − slack` at every sample.
    pub holds: bool,
    /// `duhamel_distance ≤ t r_h + slack` at every sample.
    pub duhamel_holds: bool,
    /// Sample with the smallest `local_energy − bound + slack`.
    pub worst_t: f64,
    pub worst_margin: f64,
}

/// Slack `10·(unitarity drift + t·|g(λ) − λ|)` with `g` the Cayley phase rate.
fn decay_slack(drift: f64, t: f64, lambda: f64, dt: f64) -> f64 {
    10.0 * (drift + t * (cayley_phase_rate(lambda, dt) - lambda).abs())
}

/// Evolves `φ_h` under the full `H` and compares `‖ψ(t)‖_{L²(K)}` with
/// `λ − t r_h` at `times`.
pub fn decay_experiment(
    qm: &Quasimode,
    h_full: &HermitianOperator,
    window: &CompactWindow,
    prop: &CayleyPropagator,
    times: &[f64],
) -> Result<DecayReport> {
    window.check_inside(&qm.full)?;
    let lambda = local_energy(&qm.phi, window)?;
    let r_h = residual_norm(&qm.phi, qm.sqrt_e_plus, h_full)?;
    let mut state = EvolutionState::new(qm.phi.clone());
    let n0 = state.norms[0].max(f64::MIN_POSITIVE);
    let mut samples = Vec::with_capacity(times.len());
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &t in &sorted {
        state = evolve(state, prop, h_full, t)?;
        let local = local_energy(&state.field, window)?;
        let total = state.field.norm();
        let mut reference = qm.phi.clone();
        reference.scale(Complex64::from_polar(1.0, qm.sqrt_e_plus * t));
        reference.axpy(Complex64::new(-1.0, 0.0), &state.field)?;
        let drift = state.unitarity_drift() * n0;
        samples.push(DecaySample {
            t,
            local_energy: local,
            total_norm: total,
            bound: lambda - t * r_h,
            duhamel_distance: reference.norm(),
            slack: decay_slack(drift, t, qm.sqrt_e_plus, prop.dt),
        });
    }
    let (mut worst_t, mut worst_margin) = (0.0, f64::INFINITY);
    for s in &samples {
        let m = s.local_energy - s.bound + s.slack;
        if m < worst_margin {
            worst_margin = m;
            worst_t = s.t;
        }
    }
    let duhamel_holds = samples.iter().all(|s| s.duhamel_distance <= s.t * r_h + s.slack);
    Ok(DecayReport {
        h: qm.h,
        window: *window,
        lambda,
        r_h,
        sqrt_e_plus: qm.sqrt_e_plus,
        dt: prop.dt,
        holds: worst_margin >= 0.0,
        duhamel_holds,
        worst_t,
        worst_margin,
        unitarity_drift: state.unitarity_drift(),
        max_step_drift: state.max_step_drift,
        samples,
    })
}

/// How the certificate reached its conclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateBranch {
    /// Evolved to `t_h` and measured the local energy there.
    Feasible,
    /// `t_h/dt` exceeds the step budget; the value at `t_h` follows from the
    /// verified pointwise bound `λ − t r_h`.
    Analytic,
}

impl CertificateBranch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Feasible => "feasible",
            Self::Analytic => "analytic",
        }
    }
}

/// Inputs of the certificate besides the quasimode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateInputs {
    /// Fitted exponential rate `D` of the residual.
    pub d: f64,
    /// Fitted prefactor of `residual ≈ C e^{−D/h}`, reported alongside.
    pub fitted_prefactor: f64,
    /// Step budget for the feasible branch.
    pub max_steps: f64,
    /// Samples used to verify the pointwise bound.
    pub samples: usize,
}

impl Default for CertificateInputs {
    fn default() -> Self {
        Self { d: f64::NAN, fitted_prefactor: f64::NAN, max_steps: 1e7, samples: 24 }
    }
}

/// Lower bound `‖e^{itH}φ_h‖_{L²(K)}·ln t ≥ D/2` at `t = t_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub h: f64,
    pub d: f64,
    pub lambda: f64,
    pub r_h: f64,
    pub fitted_prefactor: f64,
    /// `C_h = r_h e^{D/h}`, the smallest `C` with `r_h ≤ C e^{−D/h}`.
    pub c_h: f64,
    /// `((λ − h)/C_h) e^{D/h}`.
    pub t_h: f64,
    pub dt: f64,
    pub branch: CertificateBranch,
    /// Measured `‖ψ(t_h)‖_{L²(K)}` on the feasible branch.
    pub measured_local_energy: Option<f64>,
    /// Local energy used at `t_h`: measured, or `λ − t_h r_h` on the analytic branch.
    pub local_energy_at_t_h: f64,
    /// `local_energy_at_t_h · ln t_h`.
    pub lower_value: f64,
    /// `|h ln((λ − h)/C_h)|`.
    pub smallness: f64,
    pub smallness_ok: bool,
    /// Latest time at which the pointwise bound was checked by evolution.
    pub verified_until: f64,
    pub bound_verified: bool,
    pub slack: f64,
    pub pass: bool,
}

/// Certificate for the window `K` at the quasimode's `h`.
pub fn log_bound_certificate(
    qm: &Quasimode,
    h_full: &HermitianOperator,
    window: &CompactWindow,
    prop: &CayleyPropagator,
    inputs: &CertificateInputs,
) -> Result<Certificate> {
    let h = qm.h;
    let d = inputs.d;
    if !(d > 0.0) {
        return Err(LabError::Config(format!("certificate needs a fitted D > 0, got {d}")));
    }
    let lambda = local_energy(&qm.phi, window)?;
    if lambda <= h {
        return Err(LabError::Physics(format!(
            "‖φ_h‖_L²(K) = {lambda:.4} ≤ h = {h}: h is too large for this window; use a smaller h"
        )));
    }
    let r_h = residual_norm(&qm.phi, qm.sqrt_e_plus, h_full)?;
    let c_h = r_h * (d / h).exp();
    let t_h = (lambda - h) / r_h;
    let smallness = (h * ((lambda - h) / c_h).ln()).abs();
    let smallness_ok = smallness <= 0.5 * d;
    let feasible = t_h / prop.dt <= inputs.max_steps;
    let branch = if feasible { CertificateBranch::Feasible } else { CertificateBranch::Analytic };
    let verify_until = if feasible { t_h } else { (inputs.max_steps * prop.dt).min(t_h) };
    let times = log_times((10.0 * prop.dt).min(verify_until), verify_until, inputs.samples.max(2));
    let report = decay_experiment(qm, h_full, window, prop, &times)?;
    let last = report.samples.last().copied().expect("at least one sample");
    let (measured, at_t_h, slack) = match branch {
        CertificateBranch::Feasible => (Some(last.local_energy), last.local_energy, last.slack),
        CertificateBranch::Analytic => (None, lambda - t_h * r_h, 0.0),
    };
    let lower_value = at_t_h * t_h.ln();
    let pass = smallness_ok && report.holds && lower_value >= 0.5 * d - slack * t_h.ln();
    Ok(Certificate {
        h,
        d,
        lambda,
        r_h,
        fitted_prefactor: inputs.fitted_prefactor,
        c_h,
        t_h,
        dt: prop.dt,
        branch,
        measured_local_energy: measured,
        local_energy_at_t_h: at_t_h,
        lower_value,
        smallness,
        smallness_ok,
        verified_until: verify_until,
        bound_verified: report.holds,
        slack,
        pass,
    })
}

/// `|⟨a, b⟩|` for unit vectors, with the grid weight.
pub fn overlap(a: &SpinorField, b: &SpinorField) -> Result<f64> {
    Ok(a.inner(b)?.norm())
}
