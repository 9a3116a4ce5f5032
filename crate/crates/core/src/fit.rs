//! Small fitting helpers: least-squares lines, Richardson extrapolation and
//! observed convergence orders.

use crate::error::{LabError, Result};

/// Least-squares line `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination.
    pub r2: f64,
    pub points: usize,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(LabError::Shape("fit abscissae and ordinates differ in length".into()));
    }
    let n = xs.len();
    if n < 2 {
        return Err(LabError::Numerical(format!("line fit needs 2 points, got {n}")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) || !sxy.is_finite() {
        return Err(LabError::Numerical("line fit: abscissae are all equal or non-finite".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    Ok(LinearFit { slope, intercept: my - slope * mx, r2, points: n })
}

/// Fits `y ≈ C x^q` on log–log axes; returns `(q, C, r2)`.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(LabError::Numerical("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let f = linear_fit(&lx, &ly)?;
    Ok((f.slope, f.intercept.exp(), f.r2))
}

/// Richardson extrapolation to `x → 0` of samples taken at `x, x/2, x/4, …`,
/// for an error expansion in integer powers of `x` starting at
/// `x^first_power`.
pub fn richardson_to_zero(samples: &[f64], first_power: i32) -> f64 {
    let mut table = samples.to_vec();
    let mut p = first_power;
    for level in 1..samples.len() {
        let factor = 2f64.powi(p);
        for i in 0..samples.len() - level {
            table[i] = (factor * table[i + 1] - table[i]) / (factor - 1.0);
        }
        p += 1;
    }
    table[0]
}

/// Observed order `log₂(e_coarse/e_fine)` for a halved step.
pub fn observed_order(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}
