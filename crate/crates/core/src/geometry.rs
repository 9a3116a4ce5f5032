//! Exterior Schwarzschild–AdS geometry: lapse `F(r)`, horizon, tortoise
//! coordinate.
//!
//! The lapse factors as `r F(r) l² = (r − r_s)(r² + r_s r + r_s² + l²)`, so
//! `1/F` has an exact partial-fraction decomposition and the tortoise
//! coordinate `x(r) = −∫_r^∞ dρ/F(ρ)` is available in closed form. Points
//! close to the horizon are tracked through the offset `δ = r − r_s`, which
//! stays representable long after `r` itself has rounded to `r_s`
//! (`δ ≈ e^{x/α}` decays exponentially as `x → −∞`).

use crate::error::{LabError, Result};

/// Physical and semiclassical parameters of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacetimeParams {
    /// Black-hole mass `M` (geometric units).
    pub bh_mass: f64,
    /// AdS radius `l`.
    pub ads_radius: f64,
    /// Field mass `m` (inverse length).
    pub field_mass: f64,
    /// Semiclassical parameter `h = 1/(s + 1/2)`.
    pub h: f64,
}

impl SpacetimeParams {
    /// Validates `M, l, m, h > 0` and the large-mass regime `m l > 1`.
    pub fn new(bh_mass: f64, ads_radius: f64, field_mass: f64, h: f64) -> Result<Self> {
        for (name, v) in [("M", bh_mass), ("l", ads_radius), ("m", field_mass), ("h", h)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(LabError::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if field_mass * ads_radius <= 1.0 {
            return Err(LabError::Config(format!(
                "m*l must exceed 1, got {}",
                field_mass * ads_radius
            )));
        }
        Ok(Self { bh_mass, ads_radius, field_mass, h })
    }

    /// Same spacetime and field, different semiclassical parameter.
    pub fn with_h(&self, h: f64) -> Result<Self> {
        Self::new(self.bh_mass, self.ads_radius, self.field_mass, h)
    }

    /// The dimensionless product `m l`.
    pub fn ml(&self) -> f64 {
        self.field_mass * self.ads_radius
    }
}

/// The unique positive root of `F`, together with the two cube-root terms of
/// the Cardano formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonData {
    pub r_sads: f64,
    pub p_plus: f64,
    pub p_minus: f64,
}

/// `F(r) = 1 − 2M/r + r²/l²`.
pub fn metric_f(r: f64, params: &SpacetimeParams) -> Result<f64> {
    if !(r > 0.0) {
        return Err(LabError::Domain(format!("F(r) needs r > 0, got {r}")));
    }
    let l = params.ads_radius;
    Ok(1.0 - 2.0 * params.bh_mass / r + r * r / (l * l))
}

/// `F'(r) = 2M/r² + 2r/l²`.
pub fn metric_f_prime(r: f64, params: &SpacetimeParams) -> f64 {
    let l = params.ads_radius;
    2.0 * params.bh_mass / (r * r) + 2.0 * r / (l * l)
}

/// Horizon radius `r_SAdS = p₊ + p₋` with
/// `p± = (M l² ± (M² l⁴ + l⁶/27)^{1/2})^{1/3}` (real cube roots).
///
/// The Cardano value is polished by Newton steps on `r³/l² + r − 2M` so that
/// `F(r_SAdS)` vanishes to rounding.
pub fn horizon_radius(params: &SpacetimeParams) -> HorizonData {
    let m = params.bh_mass;
    let l2 = params.ads_radius * params.ads_radius;
    let disc = (m * m * l2 * l2 + l2 * l2 * l2 / 27.0).sqrt();
    let p_plus = (m * l2 + disc).cbrt();
    // m l² < disc always, so the second argument is negative; cbrt keeps the
    // real branch: −|arg|^{1/3}.
    let p_minus = (m * l2 - disc).cbrt();
    let mut r = p_plus + p_minus;
    for _ in 0..3 {
        let g = r * r * r / l2 + r - 2.0 * m;
        let dg = 3.0 * r * r / l2 + 1.0;
        let step = g / dg;
        r -= step;
        if step.abs() <= f64::EPSILON * r {
            break;
        }
    }
    HorizonData { r_sads: r, p_plus, p_minus }
}

/// A point of the exterior, carried in all three coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialPoint {
    /// Tortoise coordinate, `x < 0`.
    pub x: f64,
    /// Area radius `r > r_SAdS`.
    pub r: f64,
    /// Offset from the horizon, `δ = r − r_SAdS > 0`, accurate even when `r`
    /// has rounded to the horizon radius.
    pub delta: f64,
}

/// Reference radius (in units of `l`) where [`Geometry::tortoise_by_quadrature`]
/// stops integrating numerically and switches to the asymptotic tail.
pub const QUADRATURE_REFERENCE_RADIUS: f64 = 1.0e6;

/// Precomputed geometry for one `(M, l)`.
#[derive(Debug, Clone)]
pub struct Geometry {
    params: SpacetimeParams,
    horizon: HorizonData,
    /// `r_s² + l²`, constant term of the quadratic factor.
    quad_c: f64,
    /// `1/F'(r_s)`: the coefficient of `ln δ` in `x`.
    log_coeff: f64,
    /// Coefficient of the arctangent term.
    atan_coeff: f64,
    /// `(3 r_s²/4 + l²)^{1/2}`.
    atan_scale: f64,
}

impl Geometry {
    pub fn new(params: SpacetimeParams) -> Self {
        let horizon = horizon_radius(&params);
        let a = horizon.r_sads;
        let l2 = params.ads_radius * params.ads_radius;
        let quad_c = a * a + l2;
        let log_coeff = l2 * a / (3.0 * a * a + l2);
        let gamma = log_coeff * quad_c / a;
        let atan_scale = (0.75 * a * a + l2).sqrt();
        let atan_coeff = (gamma + 0.5 * log_coeff * a) / atan_scale;
        Self { params, horizon, quad_c, log_coeff, atan_coeff, atan_scale }
    }

    pub fn params(&self) -> &SpacetimeParams {
        &self.params
    }

    pub fn horizon(&self) -> &HorizonData {
        &self.horizon
    }

    pub fn r_sads(&self) -> f64 {
        self.horizon.r_sads
    }

    /// Surface gravity `κ = F'(r_s)/2`; `A` and `B` decay like `e^{κx}` at the horizon.
    pub fn surface_gravity(&self) -> f64 {
        0.5 / self.log_coeff
    }

    /// `F` evaluated from the horizon offset (no cancellation near the root).
    pub fn lapse_from_offset(&self, delta: f64) -> f64 {
        let a = self.horizon.r_sads;
        let r = a + delta;
        let l2 = self.params.ads_radius * self.params.ads_radius;
        delta * (r * r + a * r + self.quad_c) / (l2 * r)
    }

    /// Tortoise coordinate as a function of the horizon offset.
    pub fn tortoise_from_offset(&self, delta: f64) -> f64 {
        let a = self.horizon.r_sads;
        let r = a + delta;
        let l2 = self.params.ads_radius * self.params.ads_radius;
        let quad = r * r + a * r + self.quad_c;
        let shrink = (3.0 * a * r + l2) / quad;
        // ln(δ/√quad): for large r both logs are ≈ ln r, so use log1p there.
        let log_part = if shrink < 0.5 {
            0.5 * (-shrink).ln_1p()
        } else {
            delta.ln() - 0.5 * quad.ln()
        };
        self.log_coeff * log_part - self.atan_coeff * (self.atan_scale / (r + 0.5 * a)).atan()
    }

    /// `dx/d(ln δ) = δ/F = l² r / (r² + r_s r + r_s² + l²)`.
    fn dx_dlog_offset(&self, delta: f64) -> f64 {
        let a = self.horizon.r_sads;
        let r = a + delta;
        let l2 = self.params.ads_radius * self.params.ads_radius;
        l2 * r / (r * r + a * r + self.quad_c)
    }

    /// `x(r)`, normalized so that `x → 0⁻` as `r → ∞`.
    pub fn tortoise_from_radius(&self, r: f64) -> Result<f64> {
        let a = self.horizon.r_sads;
        if !(r > a) || !r.is_finite() {
            return Err(LabError::Domain(format!(
                "tortoise coordinate needs r > r_SAdS = {a}, got {r}"
            )));
        }
        Ok(self.tortoise_from_offset(r - a))
    }

    /// Inverse of [`Self::tortoise_from_offset`]: the horizon offset `δ` with
    /// `x(δ) = x`.
    pub fn offset_from_tortoise(&self, x: f64) -> Result<f64> {
        if !(x < 0.0) || !x.is_finite() {
            return Err(LabError::Domain(format!("tortoise coordinate must be negative, got {x}")));
        }
        let l = self.params.ads_radius;
        // Work in u = ln δ, where x(u) is smooth, increasing, with slope ≤ l.
        let f = |u: f64| self.tortoise_from_offset(u.exp()) - x;
        let mut hi = (2.0 * l * l / -x + self.horizon.r_sads + l).ln();
        let mut step = 1.0;
        while f(hi) < 0.0 {
            hi += step;
            step *= 2.0;
        }
        let mut lo = hi - 1.0;
        step = 1.0;
        while f(lo) > 0.0 {
            lo -= step;
            step *= 2.0;
            if lo < -740.0 {
                lo = -740.0;
                if f(lo) > 0.0 {
                    return Err(LabError::Domain(format!(
                        "x = {x} lies too close to the horizon for double precision"
                    )));
                }
                break;
            }
        }
        // Safeguarded Newton on the bracket [lo, hi].
        let mut u = 0.5 * (lo + hi);
        for _ in 0..200 {
            let fu = f(u);
            if fu == 0.0 {
                break;
            }
            if fu < 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            let slope = self.dx_dlog_offset(u.exp());
            let mut next = u - fu / slope;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let converged = (next - u).abs() <= 4.0 * f64::EPSILON * u.abs().max(1.0);
            u = next;
            if converged || hi - lo <= 4.0 * f64::EPSILON * u.abs().max(1.0) {
                break;
            }
        }
        Ok(u.exp())
    }

    /// `r(x)`: the unique exterior radius with tortoise coordinate `x`.
    pub fn radius_from_tortoise(&self, x: f64) -> Result<f64> {
        Ok(self.horizon.r_sads + self.offset_from_tortoise(x)?)
    }

    /// Resolves a tortoise coordinate into `(x, r, δ)`.
    pub fn point(&self, x: f64) -> Result<RadialPoint> {
        let delta = self.offset_from_tortoise(x)?;
        Ok(RadialPoint { x, r: self.horizon.r_sads + delta, delta })
    }

    /// Tortoise coordinate by adaptive Gauss–Kronrod quadrature, independent
    /// of the closed form.
    ///
    /// Integrates `1/F` from `r` to `R_ref = 10⁶ l` in the variable
    /// `u = ln(ρ − r_s)` and adds the tail `∫_{R_ref}^∞ dρ/F = l²/R − l⁴/(3R³)
    /// + M l⁴/(2R⁴) + O(R⁻⁵)`. Returns the value and an error estimate.
    pub fn tortoise_by_quadrature(&self, r: f64, tol: f64) -> Result<(f64, f64)> {
        let a = self.horizon.r_sads;
        if !(r > a) {
            return Err(LabError::Domain(format!("quadrature needs r > r_SAdS, got {r}")));
        }
        let l = self.params.ads_radius;
        let l2 = l * l;
        let big_r = QUADRATURE_REFERENCE_RADIUS * l;
        if r >= big_r {
            return Err(LabError::Domain(format!("r = {r} lies beyond the quadrature reference radius")));
        }
        let integrand = |u: f64| self.dx_dlog_offset(u.exp());
        let (body, err) = adaptive_gauss_kronrod(&integrand, (r - a).ln(), (big_r - a).ln(), tol, 60)?;
        let m = self.params.bh_mass;
        let tail = l2 / big_r - l2 * l2 / (3.0 * big_r.powi(3)) + m * l2 * l2 / (2.0 * big_r.powi(4));
        Ok((-(body + tail), err))
    }
}

/// 15-point Kronrod nodes on `[0, 1]` (symmetric half) and weights.
const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss 7-point weights for the odd-indexed Kronrod nodes (plus the centre).
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod_15(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(c);
    let mut kronrod = KRONROD_WEIGHTS[7] * fc;
    let mut gauss = GAUSS_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = half * KRONROD_NODES[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += KRONROD_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive G7–K15 quadrature; subdivides the interval with the
/// largest error estimate until the total estimate is below `tol`.
pub fn adaptive_gauss_kronrod(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
    max_depth: usize,
) -> Result<(f64, f64)> {
    let mut pieces = vec![(lo, hi, gauss_kronrod_15(f, lo, hi), 0usize)];
    loop {
        let total: f64 = pieces.iter().map(|p| p.2 .0).sum();
        let err: f64 = pieces.iter().map(|p| p.2 .1).sum();
        if err <= tol.max(f64::EPSILON * total.abs()) {
            return Ok((total, err));
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .2 .1.total_cmp(&b.1 .2 .1))
            .expect("at least one piece");
        let (a, b, _, depth) = pieces.swap_remove(worst);
        if depth >= max_depth {
            return Err(LabError::Numerical(format!(
                "quadrature on [{lo}, {hi}] stalled with error estimate {err:.3e}"
            )));
        }
        let mid = 0.5 * (a + b);
        pieces.push((a, mid, gauss_kronrod_15(f, a, mid), depth + 1));
        pieces.push((mid, b, gauss_kronrod_15(f, mid, b), depth + 1));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(m: f64, l: f64) -> SpacetimeParams {
        SpacetimeParams::new(m, l, 2.0 / l, 0.1).unwrap()
    }

    #[test]
    fn metric_values() {
        let p = params(1.0, 1.0);
        assert_eq!(metric_f(1.0, &p).unwrap(), 0.0);
        assert_eq!(metric_f(2.0, &p).unwrap(), 4.0);
        assert!(matches!(metric_f(0.0, &p), Err(LabError::Domain(_))));
        assert!(matches!(metric_f(-1.0, &p), Err(LabError::Domain(_))));
    }

    #[test]
    fn params_reject_small_mass() {
        assert!(SpacetimeParams::new(1.0, 1.0, 1.0, 0.1).is_err());
        assert!(SpacetimeParams::new(1.0, 1.0, 0.5, 0.1).is_err());
        assert!(SpacetimeParams::new(0.0, 1.0, 2.0, 0.1).is_err());
        assert!(SpacetimeParams::new(1.0, 1.0, 2.0, -0.1).is_err());
    }

    #[test]
    fn unit_horizon() {
        let h = horizon_radius(&params(1.0, 1.0));
        assert!((h.r_sads - 1.0).abs() < 1e-10);
        assert!((h.p_plus - 1.2638).abs() < 1e-4, "{}", h.p_plus);
        assert!((h.p_minus + 0.2638).abs() < 1e-4, "{}", h.p_minus);
        assert!((h.p_plus + h.p_minus - h.r_sads).abs() < 1e-12);
    }

    #[test]
    fn horizon_matches_bisection() {
        let p = params(2.0, 3.0);
        let hz = horizon_radius(&p);
        // Independent root: bisection of F on (0, 100].
        let (mut lo, mut hi) = (1e-9, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if metric_f(mid, &p).unwrap() < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((hz.r_sads - lo).abs() < 1e-10);
        assert!(metric_f(hz.r_sads, &p).unwrap().abs() < 1e-10);
        assert!(metric_f(hz.r_sads * (1.0 + 1e-6), &p).unwrap() > 0.0);
    }

    #[test]
    fn single_sign_change_of_lapse() {
        for (m, l) in [(1.0, 1.0), (0.05, 1.0), (2.0, 3.0), (0.3, 0.7)] {
            let p = params(m, l);
            let r_s = horizon_radius(&p).r_sads;
            let n = 200_000;
            let mut changes = vec![];
            let mut prev = metric_f(1e-3, &p).unwrap();
            for i in 1..=n {
                let r = 1e-3 + (1e3 - 1e-3) * (i as f64 / n as f64).powi(3);
                let f = metric_f(r, &p).unwrap();
                if f.signum() != prev.signum() {
                    changes.push(r);
                }
                prev = f;
            }
            assert_eq!(changes.len(), 1);
            assert!((changes[0] - r_s).abs() < 1e-2 * r_s.max(1.0));
        }
    }

    #[test]
    fn tortoise_limits() {
        let g = Geometry::new(params(1.0, 1.0));
        let r = 1e4;
        let x = g.tortoise_from_radius(r).unwrap();
        assert!(x < 0.0);
        assert!(((x + 1.0 / r) / (1.0 / r)).abs() < 1e-3);
        assert!(g.tortoise_from_radius(1.0).is_err());
        assert!(g.tortoise_from_radius(0.5).is_err());
    }

    #[test]
    fn tortoise_diverges_logarithmically_at_horizon() {
        // x ≈ ln(δ)/F'(r_s) + const; for M = l = 1, F'(1) = 4.
        let g = Geometry::new(params(1.0, 1.0));
        let x6 = g.tortoise_from_radius(1.0 + 1e-6).unwrap();
        let (q6, _) = g.tortoise_by_quadrature(1.0 + 1e-6, 1e-12).unwrap();
        assert!((x6 - q6).abs() < 1e-9);
        assert!(x6 < -3.9 && x6 > -4.0, "{x6}");
        let x12 = g.tortoise_from_offset(1e-12);
        assert!(((x12 - x6) - 0.25 * (1e-6f64).ln()).abs() < 1e-5);
        assert!(g.tortoise_from_offset(1e-20) < -10.0);
    }

    #[test]
    fn monotone_on_log_grid() {
        let g = Geometry::new(params(0.05, 1.0));
        let mut prev = f64::NEG_INFINITY;
        for k in 0..400 {
            let r = g.r_sads() + 1e-12 * 10f64.powf(k as f64 * 0.04);
            let x = g.tortoise_from_radius(r).unwrap();
            assert!(x > prev && x < 0.0);
            prev = x;
        }
    }

    #[test]
    fn inverse_roundtrip() {
        let g = Geometry::new(params(1.0, 1.0));
        let r = 2.0 * g.r_sads();
        let x = g.tortoise_from_radius(r).unwrap();
        let back = g.radius_from_tortoise(x).unwrap();
        assert!(((back - r) / r).abs() < 1e-8);
        let r_far = g.radius_from_tortoise(-1e-3).unwrap();
        assert!((r_far - 1e3).abs() / 1e3 < 0.01);
        assert!(g.radius_from_tortoise(0.0).is_err());
        assert!(g.radius_from_tortoise(1.0).is_err());
        let near = g.radius_from_tortoise(-60.0).unwrap();
        assert!(near - g.r_sads() < 1e-12);
        assert!(g.offset_from_tortoise(-60.0).unwrap() > 0.0);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        for (m, l) in [(1.0, 1.0), (0.05, 1.0), (2.0, 3.0)] {
            let g = Geometry::new(params(m, l));
            for k in 0..20 {
                let r = g.r_sads() * (1.0 + 1e-4 * 10f64.powf(k as f64 * 0.4));
                let exact = g.tortoise_from_radius(r).unwrap();
                let (quad, err) = g.tortoise_by_quadrature(r, 1e-12).unwrap();
                assert!((quad - exact).abs() < 1e-9 * exact.abs().max(1.0), "r={r} {quad} vs {exact}");
                assert!(err < 1e-11);
            }
        }
    }

    #[test]
    fn quadrature_tolerance_halving_is_stable() {
        let g = Geometry::new(params(1.0, 1.0));
        for k in 0..20 {
            let r = 1.0 + 0.01 * 1.6f64.powi(k);
            let (a, ea) = g.tortoise_by_quadrature(r, 1e-8).unwrap();
            let (b, _) = g.tortoise_by_quadrature(r, 5e-9).unwrap();
            assert!((a - b).abs() <= ea.max(1e-8), "r={r}");
        }
    }

    #[test]
    fn lapse_from_offset_agrees() {
        let p = params(0.7, 1.3);
        let g = Geometry::new(p);
        for r in [g.r_sads() * 1.01, 1.0, 3.0, 50.0] {
            let direct = metric_f(r, &p).unwrap();
            let factored = g.lapse_from_offset(r - g.r_sads());
            assert!((direct - factored).abs() < 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn surface_gravity_is_half_derivative() {
        let p = params(1.0, 1.0);
        let g = Geometry::new(p);
        assert!((g.surface_gravity() - 0.5 * metric_f_prime(g.r_sads(), &p)).abs() < 1e-12);
    }
}
