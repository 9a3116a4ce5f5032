//! Agmon-type checks in the forbidden region `[x₊, x_A)`: the weighted norm
//! with weight `e^{x²/(ch)}`, the exponentially small eigenvector mass on
//! `Σ₁ = [x₊, A₁)`, and the pointwise lower bound on
//! `A² − h|A'| − (1/l² + Th) − kx²` that drives both.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dirac::{HermitianOperator, OperatorKind, SpinorField};
use crate::eigen::{lowest_eigenpairs, EigenPair};
use crate::error::{LabError, Result};
use crate::fit::{linear_fit, LinearFit};
use crate::geometry::SpacetimeParams;
use crate::model::alpha1;
use crate::potentials::Potentials;
use crate::quasimode::{QuasimodeConfig, QuasimodeSetup};

/// Largest exponent handled before the weighted norm is reported as overflow.
const MAX_LOG_NORM: f64 = 700.0;

/// Weight scale, energy window, lemma margin and the nested intervals
/// `Σ₁ ⋐ Σ₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgmonConfig {
    pub c: f64,
    pub t: f64,
    pub delta: f64,
    /// Right ends `A₁ < A₂` of `Σᵢ = [x₊, Aᵢ)`.
    pub a1: f64,
    pub a2: f64,
}

/// User-facing choices from which an [`AgmonConfig`] is built per `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgmonSettings {
    /// `A₁, A₂` as fractions of `[x₊, x_A(1/l² + S)]`.
    pub fractions: (f64, f64),
    /// Lemma margin `δ`; `None` means `0.1/l²`.
    pub delta: Option<f64>,
    /// Energy window `T`; `None` means `2α₁ + 2`.
    pub t: Option<f64>,
}

impl Default for AgmonSettings {
    fn default() -> Self {
        Self { fractions: (0.3, 0.6), delta: None, t: None }
    }
}

impl AgmonConfig {
    /// Checks `x₊ < A₁ < A₂ < x_A(1/l² + S)`.
    pub fn validate(&self, x_plus: f64, x_a_window: f64) -> Result<()> {
        if !(x_plus < self.a1 && self.a1 < self.a2 && self.a2 < x_a_window) {
            return Err(LabError::Config(format!(
                "need x₊ < A₁ < A₂ < x_A(1/l²+S): {x_plus} < {} < {} < {x_a_window}",
                self.a1, self.a2
            )));
        }
        if !(self.c > 0.0 && self.t > 0.0 && self.delta > 0.0) {
            return Err(LabError::Config("c, T and δ must be positive".into()));
        }
        Ok(())
    }

    /// `c` from [`admissible_weight_scale`] for the lemma's `k`, the other
    /// fields from `settings`.
    pub fn for_setup(setup: &QuasimodeSetup, settings: &AgmonSettings) -> Self {
        let lemma = LemmaSurrogate::from_settings(&setup.params, settings);
        let width = setup.x_a_window - setup.x_plus;
        let (f1, f2) = settings.fractions;
        Self {
            c: admissible_weight_scale(lemma.k),
            t: lemma.t,
            delta: lemma.delta,
            a1: setup.x_plus + f1 * width,
            a2: setup.x_plus + f2 * width,
        }
    }
}

/// `ln ‖e^{x²/(ch)} field‖`, accumulated relative to the largest exponent.
pub fn log_weighted_norm(field: &SpinorField, c: f64, h: f64) -> f64 {
    let grid = field.grid();
    // (ln|f_j| + x_j²/(ch)) per nonzero node, summed relative to the largest.
    let logs: Vec<f64> = grid
        .nodes()
        .iter()
        .enumerate()
        .filter_map(|(j, x)| {
            let v = field.node_norm(j);
            (v > 0.0).then(|| v.ln() + x * x / (c * h))
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    let s: f64 = logs.iter().map(|e| (2.0 * (e - top)).exp()).sum();
    top + 0.5 * (grid.dx() * s).ln()
}

/// `‖e^{x²/(ch)} field‖` in the discrete L² norm.
pub fn weighted_norm(field: &SpinorField, c: f64, h: f64) -> Result<f64> {
    if !(c > 0.0 && h > 0.0) {
        return Err(LabError::Domain("weighted norm needs c, h > 0".into()));
    }
    let log = log_weighted_norm(field, c, h);
    if log > MAX_LOG_NORM {
        let grid = field.grid();
        let top = grid.x_min.powi(2).max(grid.x_cut.powi(2)) / (c * h);
        return Err(LabError::Numerical(format!(
            "weighted norm overflows: ln‖·‖ = {log:.1}, largest weight exponent {top:.1}"
        )));
    }
    Ok(log.exp())
}

/// Both sides of `‖e^{x²/ch}φ‖ ≤ C(‖φ‖ + h⁻¹‖e^{x²/ch}(P⁺ − E)φ‖)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedCheck {
    pub lhs: f64,
    pub norm: f64,
    /// `h⁻¹‖e^{x²/ch}(P⁺ − E)φ‖`.
    pub residual_term: f64,
    /// `lhs/(‖φ‖ + residual_term)`, the smallest admissible `C`.
    pub c_implied: f64,
}

pub fn check_weighted_inequality(
    field: &SpinorField,
    p_plus: &HermitianOperator,
    c: f64,
    h: f64,
    energy: f64,
) -> Result<WeightedCheck> {
    let lhs = weighted_norm(field, c, h)?;
    let norm = field.norm();
    let mut r = p_plus.apply(field)?;
    r.axpy(Complex64::new(-energy, 0.0), field)?;
    let residual_term = weighted_norm(&r, c, h)? / h;
    Ok(WeightedCheck { lhs, norm, residual_term, c_implied: lhs / (norm + residual_term) })
}

/// `‖φ‖_{L²(Σ₁)}` for `Σ₁ = [x₊, A₁)`.
pub fn forbidden_region_mass(field: &SpinorField, config: &AgmonConfig) -> f64 {
    let grid = field.grid();
    field.norm_on(grid.x_min, config.a1 - 1e-12 * config.a1.abs())
}

/// `k = δ/(4l⁴(T + 2δ))` and the pointwise function
/// `M(x, h) = A²(x) − h|A'(x)| − (1/l² + Th) − kx²`.
#[derive(Debug, Clone)]
pub struct LemmaSurrogate {
    potentials: Potentials,
    pub delta: f64,
    pub t: f64,
    pub k: f64,
}

/// Worst point of the lemma surrogate for one `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaMargin {
    pub h: f64,
    /// `min_x M(x, h) − δh` over the interval; positive means the bound holds.
    pub margin: f64,
    pub worst_x: f64,
    pub interval: (f64, f64),
}

impl LemmaSurrogate {
    pub fn from_settings(params: &SpacetimeParams, settings: &AgmonSettings) -> Self {
        let l2 = params.ads_radius * params.ads_radius;
        let delta = settings.delta.unwrap_or(0.1 / l2);
        let t = settings.t.unwrap_or(2.0 * alpha1(params.ml()) + 2.0);
        Self::new(params, delta, t)
    }

    pub fn new(params: &SpacetimeParams, delta: f64, t: f64) -> Self {
        let l2 = params.ads_radius * params.ads_radius;
        Self { potentials: Potentials::new(*params), delta, t, k: delta / (4.0 * l2 * l2 * (t + 2.0 * delta)) }
    }

    /// `M(x, h)` with the given quadratic coefficient in place of `k`.
    pub fn value_with(&self, x: f64, h: f64, quad: f64) -> Result<f64> {
        let v = self.potentials.at(x)?;
        // A² − 1/l² − Th, without cancellation near x = 0.
        Ok(v.a2_excess - self.t * h - h * v.da.abs() - quad * x * x)
    }

    /// Evaluates `M − δh` on `[x₊, x_A(1/l² + (T + 2δ)h)]`, sampled with
    /// 10⁴ uniform points plus 4× refinement on the outer 5% at each end.
    pub fn margin(&self, h: f64) -> Result<LemmaMargin> {
        self.margin_with(h, self.k)
    }

    pub fn margin_with(&self, h: f64, quad: f64) -> Result<LemmaMargin> {
        let l2 = self.potentials.params().ads_radius.powi(2);
        let lo = self.potentials.x_plus();
        let hi = self.potentials.turning_point(1.0 / l2 + (self.t + 2.0 * self.delta) * h)?;
        let len = hi - lo;
        let mut xs: Vec<f64> = (0..=10_000).map(|i| lo + len * i as f64 / 10_000.0).collect();
        for i in 0..=2_000 {
            let s = 0.05 * len * i as f64 / 2_000.0;
            xs.push(lo + s);
            xs.push(hi - s);
        }
        let mut worst = (f64::INFINITY, lo);
        for x in xs {
            let m = self.value_with(x, h, quad)? - self.delta * h;
            if m < worst.0 {
                worst = (m, x);
            }
        }
        Ok(LemmaMargin { h, margin: worst.0, worst_x: worst.1, interval: (lo, hi) })
    }

    /// Largest `h` on a logarithmic grid from `h_max` down to `h_min` such that
    /// the bound holds at that `h` and at every smaller grid value.
    pub fn threshold(&self, h_max: f64, h_min: f64, points: usize) -> Result<Option<f64>> {
        let ratio = (h_min / h_max).powf(1.0 / (points as f64 - 1.0));
        let hs: Vec<f64> = (0..points).map(|i| h_max * ratio.powi(i as i32)).collect();
        let ok = hs.iter().map(|&h| self.margin(h).map(|m| m.margin > 0.0)).collect::<Result<Vec<bool>>>()?;
        let mut h0 = None;
        for i in (0..points).rev() {
            if ok[i] {
                h0 = Some(hs[i]);
            } else {
                break;
            }
        }
        Ok(h0)
    }
}

/// Smallest weight scale `c` with `(φ')² = (2x/c)² ≤ kx²`, i.e. `4/c² ≤ k`,
/// located by bisection on `c`.
pub fn admissible_weight_scale(k: f64) -> f64 {
    let admissible = |c: f64| 4.0 / (c * c) <= k;
    let (mut lo, mut hi) = (1e-6, 1.0);
    while !admissible(hi) {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if admissible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// One `h` of the Agmon sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct AgmonRecord {
    pub h: f64,
    pub energy: f64,
    pub eigen_residual: f64,
    pub mass_sigma1: f64,
    pub mass_sigma2: f64,
    pub weighted: WeightedCheck,
    pub lemma_margin: f64,
    /// Mass on `Σ₁` too small to separate from solver error.
    pub noise_flag: bool,
}

/// Results of [`agmon_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct AgmonSweep {
    pub records: Vec<AgmonRecord>,
    /// Fit of `ln mass₁` against `1/h`; `ε_fit = −slope`.
    pub mass_fit: LinearFit,
    pub epsilon_fit: f64,
    /// Slope of `ln C_implied` against `1/h`.
    pub growth_rate: f64,
}

/// Ground state of `P⁺` with its Agmon data.
pub fn agmon_record(setup: &QuasimodeSetup, config: &AgmonConfig) -> Result<AgmonRecord> {
    config.validate(setup.x_plus, setup.x_a_window)?;
    let params = &setup.params;
    let h = params.h;
    let op = setup.restricted_operator(OperatorKind::PPlus)?;
    let pair: EigenPair = lowest_eigenpairs(&op, 2)?.remove(0);
    let weighted = check_weighted_inequality(&pair.vector, &op, config.c, h, pair.value)?;
    let mass_sigma1 = forbidden_region_mass(&pair.vector, config);
    let mass_sigma2 = pair.vector.norm_on(setup.x_plus, config.a2);
    let lemma = LemmaSurrogate::new(params, config.delta, config.t);
    let lemma_margin = lemma.margin(h)?.margin;
    // Components of the solver error along the forbidden region are bounded
    // by the residual over the spectral gap (order 1 here).
    let noise = pair.residual / pair.value.abs().max(1.0);
    Ok(AgmonRecord {
        h,
        energy: pair.value,
        eigen_residual: pair.residual,
        mass_sigma1,
        mass_sigma2,
        weighted,
        lemma_margin,
        noise_flag: mass_sigma1 < noise,
    })
}

/// Agmon data over `h_list`, run on `workers` threads.
pub fn agmon_sweep(
    h_list: &[f64],
    params: &SpacetimeParams,
    qconfig: &QuasimodeConfig,
    settings: &AgmonSettings,
    workers: usize,
) -> Result<AgmonSweep> {
    if h_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(LabError::Config("h_list must be strictly decreasing".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    let records = pool.install(|| {
        h_list
            .par_iter()
            .map(|&h| {
                let setup = QuasimodeSetup::new(params.with_h(h)?, *qconfig)?;
                let config = AgmonConfig::for_setup(&setup, settings);
                agmon_record(&setup, &config)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let usable: Vec<&AgmonRecord> = records.iter().filter(|r| !r.noise_flag && r.mass_sigma1 > 0.0).collect();
    if usable.len() < 3 {
        return Err(LabError::Numerical(format!("only {} usable Agmon records", usable.len())));
    }
    let xs: Vec<f64> = usable.iter().map(|r| 1.0 / r.h).collect();
    let ys: Vec<f64> = usable.iter().map(|r| r.mass_sigma1.ln()).collect();
    let mass_fit = linear_fit(&xs, &ys)?;
    let all_x: Vec<f64> = records.iter().map(|r| 1.0 / r.h).collect();
    let cs: Vec<f64> = records.iter().map(|r| r.weighted.c_implied.ln()).collect();
    let growth_rate = linear_fit(&all_x, &cs)?.slope;
    Ok(AgmonSweep { epsilon_fit: -mass_fit.slope, mass_fit, growth_rate, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::RadialGrid;

    fn c1(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn weighted_norm_limits() {
        let grid = RadialGrid::new(-2.0, -0.01, 399).unwrap();
        let f = SpinorField::from_fn(grid, |x| [c1((-x * x).exp()), c1(0.5), Complex64::new(0.0, x), c1(0.0)]);
        let big = weighted_norm(&f, 1e12, 0.1).unwrap();
        assert!((big - f.norm()).abs() < 1e-9 * f.norm());
        let tight = SpinorField::from_fn(grid, |x| {
            let v = if x * x <= 1.0 * 0.1 * 2f64.ln() { 1.0 } else { 0.0 };
            [c1(v), c1(0.0), c1(0.0), c1(0.0)]
        });
        assert!(weighted_norm(&tight, 1.0, 0.1).unwrap() <= 2.0 * tight.norm());
        let grid = RadialGrid::new(-1.5, -0.5, 9).unwrap();
        assert!((grid.node(4) + 1.0).abs() < 1e-12);
        let spike = SpinorField::from_fn(grid, |x| [c1(if (x + 1.0).abs() < 1e-9 { 1.0 } else { 0.0 }), c1(0.0), c1(0.0), c1(0.0)]);
        let ratio = weighted_norm(&spike, 1.0, 0.1).unwrap() / spike.norm();
        assert!((ratio - 10f64.exp()).abs() < 1e-9 * ratio);
        assert!(matches!(weighted_norm(&spike, 1e-5, 1e-3), Err(LabError::Numerical(_))));
    }

    #[test]
    fn weight_scale_bisection() {
        let k = 0.1 / (4.0 * 8.2);
        let c = admissible_weight_scale(k);
        assert!(4.0 / (c * c) <= k);
        assert!((c - 2.0 / k.sqrt()).abs() < 1e-9 * c);
    }

    #[test]
    fn config_nesting() {
        let params = SpacetimeParams::new(0.05, 1.0, 2.0, 0.1).unwrap();
        let setup = QuasimodeSetup::new(params, QuasimodeConfig { n: 1500, ..QuasimodeConfig::default() }).unwrap();
        let good = AgmonConfig::for_setup(&setup, &AgmonSettings::default());
        assert!(good.validate(setup.x_plus, setup.x_a_window).is_ok());
        let same = AgmonConfig { a2: good.a1, ..good };
        assert!(matches!(same.validate(setup.x_plus, setup.x_a_window), Err(LabError::Config(_))));
    }

    #[test]
    fn lemma_margin_holds_for_small_h() {
        let params = SpacetimeParams::new(0.05, 1.0, 2.0, 0.1).unwrap();
        let lemma = LemmaSurrogate::new(&params, 0.1, 2.0 * alpha1(2.0) + 2.0);
        let h0 = lemma.threshold(0.1, 1e-5, 25).unwrap().expect("some h satisfies the bound");
        assert!(h0 > 0.0);
        assert!(lemma.margin(h0).unwrap().margin > 0.0);
        assert!(lemma.margin(0.1).unwrap().margin < 0.0);
    }

    #[test]
    fn random_field_inequality_dominated_by_residual() {
        use rand::{Rng, SeedableRng};
        let params = SpacetimeParams::new(0.05, 1.0, 2.0, 0.1).unwrap();
        let setup = QuasimodeSetup::new(params, QuasimodeConfig { n: 800, ..QuasimodeConfig::default() }).unwrap();
        let op = setup.restricted_operator(OperatorKind::PPlus).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let v = (0..setup.restricted.dim()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
        let f = SpinorField::from_values(setup.restricted, v).unwrap();
        let chk = check_weighted_inequality(&f, &op, 36.0, 0.1, 1.5).unwrap();
        assert!(chk.residual_term > chk.norm);
        assert!(chk.c_implied < 1.0);
    }
}
