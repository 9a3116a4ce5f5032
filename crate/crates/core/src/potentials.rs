//! The coefficients `A = F^{1/2}/r` and `B = F^{1/2}` of the radial Dirac
//! operator, as functions of the tortoise coordinate, plus the two special
//! points used throughout: the well-side turning point `x_A(E)` and the inner
//! cutoff `x₊`.

use crate::error::{LabError, Result};
use crate::geometry::{Geometry, SpacetimeParams};

/// `A, B` and their `x`-derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialValues {
    pub x: f64,
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub da: f64,
    pub db: f64,
    /// `A² − 1/l² = 1/r² − 2M/r³`, evaluated without cancellation.
    pub a2_excess: f64,
}

/// Inner cutoff: the largest zero `r₊` of `r⁴/(4l²) − M r³/l² − M²/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerCutoff {
    pub r_plus: f64,
    pub x_plus: f64,
    /// Whether `x₊` had to be moved right to keep `A' < 0` on `[x₊, 0)`.
    pub adjusted: bool,
}

/// Potential evaluator for one parameter set.
#[derive(Debug, Clone)]
pub struct Potentials {
    geometry: Geometry,
    cutoff: InnerCutoff,
}

impl Potentials {
    pub fn new(params: SpacetimeParams) -> Self {
        let geometry = Geometry::new(params);
        let cutoff = compute_inner_cutoff(&geometry);
        Self { geometry, cutoff }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn params(&self) -> &SpacetimeParams {
        self.geometry.params()
    }

    pub fn inner_cutoff(&self) -> InnerCutoff {
        self.cutoff
    }

    pub fn x_plus(&self) -> f64 {
        self.cutoff.x_plus
    }

    /// All potential data at tortoise coordinate `x < 0`.
    pub fn at(&self, x: f64) -> Result<PotentialValues> {
        let p = self.geometry.point(x)?;
        let m = self.params().bh_mass;
        let f = self.geometry.lapse_from_offset(p.delta);
        let sf = f.sqrt();
        let r = p.r;
        let df = crate::geometry::metric_f_prime(r, self.params());
        Ok(PotentialValues {
            x,
            r,
            a: sf / r,
            b: sf,
            da: sf * (3.0 * m / r - 1.0) / (r * r),
            db: 0.5 * df * sf,
            a2_excess: (1.0 - 2.0 * m / r) / (r * r),
        })
    }

    pub fn a(&self, x: f64) -> Result<f64> {
        Ok(self.at(x)?.a)
    }

    pub fn b(&self, x: f64) -> Result<f64> {
        Ok(self.at(x)?.b)
    }

    /// `(A'(x), B'(x))` from the chain rule `∂_x = F ∂_r`.
    pub fn derivatives(&self, x: f64) -> Result<(f64, f64)> {
        let v = self.at(x)?;
        Ok((v.da, v.db))
    }

    /// `A²(x₊)`, the height of the barrier seen from the well at the cutoff.
    pub fn a2_at_cutoff(&self) -> f64 {
        let r = self.cutoff.r_plus;
        let l = self.params().ads_radius;
        1.0 / (l * l) + (1.0 - 2.0 * self.params().bh_mass / r) / (r * r)
    }

    /// Well-side turning point: the root of `A²(x) = E` in `[x₊, 0)` nearest 0.
    pub fn turning_point(&self, energy: f64) -> Result<f64> {
        let params = self.params();
        let l = params.ads_radius;
        let excess = energy - 1.0 / (l * l);
        if !(excess > 0.0) {
            return Err(LabError::Domain(format!(
                "no turning point: E = {energy} must exceed 1/l² = {}",
                1.0 / (l * l)
            )));
        }
        if energy >= self.a2_at_cutoff() {
            return Err(LabError::Domain(format!(
                "E = {energy} reaches the barrier at x₊ (A²(x₊) = {})",
                self.a2_at_cutoff()
            )));
        }
        // In w = 1/r the equation is w² − 2M w³ = E − 1/l², increasing for
        // w < 1/(3M) ⊃ (0, 1/r₊].
        let m = params.bh_mass;
        let g = |w: f64| w * w * (1.0 - 2.0 * m * w) - excess;
        let (mut lo, mut hi) = (0.0, 1.0 / self.cutoff.r_plus);
        // Newton from the small-excess guess w ≈ √excess, safeguarded.
        let mut w = excess.sqrt().min(0.5 * hi);
        for _ in 0..200 {
            let gw = g(w);
            if gw < 0.0 {
                lo = w;
            } else {
                hi = w;
            }
            let dg = 2.0 * w - 6.0 * m * w * w;
            let mut next = w - gw / dg;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let done = (next - w).abs() <= 2.0 * f64::EPSILON * w;
            w = next;
            if done {
                break;
            }
        }
        self.geometry.tortoise_from_radius(1.0 / w)
    }
}

/// The quartic `g(r) = r⁴/(4l²) − M r³/l² − M²/4` whose largest root is `r₊`.
pub fn cutoff_quartic(r: f64, params: &SpacetimeParams) -> f64 {
    let l2 = params.ads_radius * params.ads_radius;
    let m = params.bh_mass;
    r * r * r * (r - 4.0 * m) / (4.0 * l2) - 0.25 * m * m
}

fn compute_inner_cutoff(geometry: &Geometry) -> InnerCutoff {
    let params = geometry.params();
    let m = params.bh_mass;
    // g < 0 on (0, 4M] and increases beyond 3M, so the root is unique and > 4M.
    let mut lo = 4.0 * m;
    let mut hi = 8.0 * m;
    while cutoff_quartic(hi, params) <= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut r = hi;
    for _ in 0..200 {
        let gr = cutoff_quartic(r, params);
        if gr <= 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let l2 = params.ads_radius * params.ads_radius;
        let dg = r * r * (r - 3.0 * m) / l2;
        let mut next = r - gr / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - r).abs() <= 2.0 * f64::EPSILON * r;
        r = next;
        if done {
            break;
        }
    }
    // A' has the sign of 3M/r − 1, negative beyond the photon sphere.
    let photon = 3.0 * m;
    let adjusted = r <= photon;
    if adjusted {
        r = photon * (1.0 + 1e-12);
    }
    let x_plus = geometry
        .tortoise_from_radius(r)
        .expect("r₊ lies outside the horizon");
    InnerCutoff { r_plus: r, x_plus, adjusted }
}

/// `A(x)` for the given parameters.
pub fn potential_a(x: f64, params: &SpacetimeParams) -> Result<f64> {
    Potentials::new(*params).a(x)
}

/// `B(x)` for the given parameters.
pub fn potential_b(x: f64, params: &SpacetimeParams) -> Result<f64> {
    Potentials::new(*params).b(x)
}

/// `(A'(x), B'(x))` for the given parameters.
pub fn potential_derivatives(x: f64, params: &SpacetimeParams) -> Result<(f64, f64)> {
    Potentials::new(*params).derivatives(x)
}

/// Well-side turning point `x_A(E)`.
pub fn turning_point_xa(energy: f64, params: &SpacetimeParams) -> Result<f64> {
    Potentials::new(*params).turning_point(energy)
}

/// `(r₊, x₊)`.
pub fn inner_cutoff_x_plus(params: &SpacetimeParams) -> (f64, f64) {
    let c = Potentials::new(*params).inner_cutoff();
    (c.r_plus, c.x_plus)
}
