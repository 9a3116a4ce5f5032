//! The comparison operator
//!
//! ```text
//! P̃ = −h²∂² + (1/l² + x²/l⁴) − ihγ¹γ²(x/l⁴)(1/l² + x²/l⁴)^{−1/2}
//!     + h²(m²l²/x² + iγ¹ ml/x²)
//! ```
//!
//! whose `K`-rotated channels are harmonic oscillators with inverse-square
//! cores, solved by `ψ₁ ∝ |x|^{ml} e^{−w x²/2h}` and
//! `ψ₂ ∝ |x|^{α₁} e^{−w x²/2h}`, `w = (1/l⁴ + h/2l⁶)^{1/2}`.

use crate::dirac::{GammaSet, HermitianOperator, Mat4, OperatorKind, RadialGrid};
use crate::eigen::lowest_eigenpairs;
use crate::error::{LabError, Result};
use crate::geometry::SpacetimeParams;
use num_complex::Complex64;

/// Closed-form levels of the model problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelLevels {
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
    pub alpha1: f64,
}

/// `α₁ = (1 + (1 + 4ml(ml+1))^{1/2})/2`, the larger indicial root of
/// `α(α − 1) = ml(ml + 1)`.
pub fn alpha1(ml: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * ml * (ml + 1.0)).sqrt())
}

/// Oscillator frequency `w = (1/l⁴ + h/2l⁶)^{1/2}`.
pub fn oscillator_frequency(params: &SpacetimeParams) -> f64 {
    let l2 = params.ads_radius * params.ads_radius;
    (1.0 / (l2 * l2) + params.h / (2.0 * l2 * l2 * l2)).sqrt()
}

pub fn model_levels(params: &SpacetimeParams) -> ModelLevels {
    let l2 = params.ads_radius * params.ads_radius;
    let h = params.h;
    let ml = params.ml();
    let a1 = alpha1(ml);
    let w = oscillator_frequency(params);
    ModelLevels {
        e0: 1.0 / l2 - h / 2.0,
        e1: 1.0 / l2 + (2.0 * ml + 1.0) * w * h,
        e2: 1.0 / l2 + (2.0 * a1 + 1.0) * w * h,
        alpha1: a1,
    }
}

/// The two explicit channel eigenfunctions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFunction {
    /// Exponent `ml`, channel coefficient `ml(ml − 1)`, level `E₁`.
    Psi1,
    /// Exponent `α₁`, channel coefficient `ml(ml + 1)`, level `E₂`.
    Psi2,
}

impl ModelFunction {
    pub fn exponent(&self, params: &SpacetimeParams) -> f64 {
        match self {
            Self::Psi1 => params.ml(),
            Self::Psi2 => alpha1(params.ml()),
        }
    }

    /// Coefficient `c` of `h²c/x²` in the channel operator.
    pub fn channel_coefficient(&self, params: &SpacetimeParams) -> f64 {
        let ml = params.ml();
        match self {
            Self::Psi1 => ml * (ml - 1.0),
            Self::Psi2 => ml * (ml + 1.0),
        }
    }

    pub fn level(&self, params: &SpacetimeParams) -> f64 {
        let lv = model_levels(params);
        match self {
            Self::Psi1 => lv.e1,
            Self::Psi2 => lv.e2,
        }
    }
}

/// `h^{−1/4}(h^{−1/2}|x|)^p e^{−w x²/2h}` without normalization.
pub fn model_eigenfunction_unnormalized(which: ModelFunction, x: f64, params: &SpacetimeParams) -> Result<f64> {
    if !(x < 0.0) {
        return Err(LabError::Domain(format!("model eigenfunctions live on x < 0, got {x}")));
    }
    let h = params.h;
    let p = which.exponent(params);
    let w = oscillator_frequency(params);
    let log = -0.25 * h.ln() + p * ((-x).ln() - 0.5 * h.ln()) - w * x * x / (2.0 * h);
    Ok(log.exp())
}

/// Samples of `ψ₁` or `ψ₂` at the grid nodes, unit norm in the grid's L².
pub fn model_eigenfunction(which: ModelFunction, grid: &RadialGrid, params: &SpacetimeParams) -> Result<Vec<f64>> {
    let mut v = grid
        .nodes()
        .into_iter()
        .map(|x| model_eigenfunction_unnormalized(which, x, params))
        .collect::<Result<Vec<f64>>>()?;
    let norm = (grid.dx() * v.iter().map(|y| y * y).sum::<f64>()).sqrt();
    if !(norm > 0.0) {
        return Err(LabError::Numerical("model eigenfunction vanishes on the grid".into()));
    }
    v.iter_mut().for_each(|y| *y /= norm);
    Ok(v)
}

/// The 4×4 model potential block at `x`.
pub fn model_potential_block(g: &GammaSet, params: &SpacetimeParams, x: f64) -> Mat4 {
    let l = params.ads_radius;
    let l2 = l * l;
    let l4 = l2 * l2;
    let h = params.h;
    let ml = params.ml();
    let base = 1.0 / l2 + x * x / l4;
    let scalar = base + h * h * ml * ml / (x * x);
    let spin_orbit = h * (x / l4) / base.sqrt();
    let i = Complex64::new(0.0, 1.0);
    Mat4::identity().map(|z| z * scalar) + g.gamma12.map(|z| -i * spin_orbit * z)
        + g.gamma1.map(|z| i * h * h * ml / (x * x) * z)
}

/// Discrete `P̃` with the standard second difference and Dirichlet ends.
pub fn assemble_model_p_tilde(grid: &RadialGrid, params: &SpacetimeParams) -> Result<HermitianOperator> {
    grid.check_resolution(params)?;
    let g = GammaSet::new();
    let h = params.h;
    let dx = grid.dx();
    let kinetic = h * h / (dx * dx);
    let diag = grid
        .nodes()
        .into_iter()
        .map(|x| model_potential_block(&g, params, x) + Mat4::identity().map(|z| z * 2.0 * kinetic))
        .collect();
    let off = Mat4::identity().map(|z| z * -kinetic);
    HermitianOperator::from_blocks(OperatorKind::PTilde, *params, *grid, diag, vec![off; grid.n - 1], vec![off; grid.n - 1])
}

/// `‖(L − E)ψ‖/‖ψ‖` for the scalar channel operator
/// `L = −h²D₂ + 1/l² + w²x² + h²c/x²` applied to grid samples `psi`, with
/// `ends = (ψ(x_min), ψ(x_cut))` supplying the values outside the interior.
pub fn channel_operator_residual(
    which: ModelFunction,
    energy: f64,
    grid: &RadialGrid,
    params: &SpacetimeParams,
    psi: &[f64],
    ends: (f64, f64),
) -> f64 {
    let h = params.h;
    let l2 = params.ads_radius * params.ads_radius;
    let w = oscillator_frequency(params);
    let c = which.channel_coefficient(params);
    let dx = grid.dx();
    let k = h * h / (dx * dx);
    let n = grid.n;
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..n {
        let x = grid.node(j);
        let left = if j > 0 { psi[j - 1] } else { ends.0 };
        let right = if j + 1 < n { psi[j + 1] } else { ends.1 };
        let pot = 1.0 / l2 + w * w * x * x + h * h * c / (x * x);
        let r = -k * (left - 2.0 * psi[j] + right) + (pot - energy) * psi[j];
        num += r * r;
        den += psi[j] * psi[j];
    }
    (num / den).sqrt()
}

/// Channel residual on `grid` and on the halved grid, with the observed order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelResidual {
    pub coarse: f64,
    pub fine: f64,
    pub order: f64,
}

/// Checks that `ψ₁`/`ψ₂` solve their channel equations with level
/// `E₁`/`E₂` up to `O(Δx²)`.
pub fn channel_residual(which: ModelFunction, grid: &RadialGrid, params: &SpacetimeParams) -> Result<ChannelResidual> {
    channel_residual_at(which, which.level(params), grid, params)
}

/// As [`channel_residual`], with an arbitrary trial energy.
pub fn channel_residual_at(
    which: ModelFunction,
    energy: f64,
    grid: &RadialGrid,
    params: &SpacetimeParams,
) -> Result<ChannelResidual> {
    let residual_on = |g: &RadialGrid| -> Result<f64> {
        // The truncation ends carry the exact values of ψ, so the residual
        // measures only the stencil error.
        let raw: Vec<f64> = g
            .nodes()
            .into_iter()
            .map(|x| model_eigenfunction_unnormalized(which, x, params))
            .collect::<Result<_>>()?;
        let ends = (
            model_eigenfunction_unnormalized(which, g.x_min, params)?,
            model_eigenfunction_unnormalized(which, g.x_cut, params)?,
        );
        Ok(channel_operator_residual(which, energy, g, params, &raw, ends))
    };
    let coarse = residual_on(grid)?;
    let fine = residual_on(&grid.refined(2))?;
    Ok(ChannelResidual { coarse, fine, order: crate::fit::observed_order(coarse, fine) })
}

/// Lowest eigenvalue of the discrete `P̃` against `[E₀, E₂ + h/2]`, with
/// slack `10Δx²` for the discretization error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketCheck {
    pub h: f64,
    pub e_tilde: f64,
    pub lower: f64,
    pub upper: f64,
    pub slack: f64,
    pub inside: bool,
    pub eigen_residual: f64,
}

pub fn bracket_check(grid: &RadialGrid, params: &SpacetimeParams) -> Result<BracketCheck> {
    let op = assemble_model_p_tilde(grid, params)?;
    let low = lowest_eigenpairs(&op, 1)?.remove(0);
    let lv = model_levels(params);
    let slack = 10.0 * grid.dx().powi(2);
    let (lower, upper) = (lv.e0, lv.e2 + params.h / 2.0);
    Ok(BracketCheck {
        h: params.h,
        e_tilde: low.value,
        lower,
        upper,
        slack,
        inside: low.value >= lower - slack && low.value <= upper + slack,
        eigen_residual: low.residual,
    })
}
