//! Gamma matrices, radial grids, spinor fields and the discrete operators
//! `H = iγ⁰γ¹h∂_x + γ⁰γ²A − hmγ⁰B` and `P = −h²∂_x² + V`.
//!
//! Fields are stored node-major: component `c` at node `j` lives at index
//! `4j + c`. All operators are block-tridiagonal with 4×4 blocks and
//! Dirichlet closure at both ends of the grid.

use std::fmt::Write as _;

use nalgebra::{DMatrix, Matrix4, Vector4};
use num_complex::Complex64;

use crate::banded::BandMatrix;
use crate::error::{LabError, Result};
use crate::geometry::SpacetimeParams;
use crate::potentials::Potentials;

pub type Mat4 = Matrix4<Complex64>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Builds `[[0, X], [Y, 0]]` from 2×2 blocks.
fn off_diagonal(x: [[Complex64; 2]; 2], y: [[Complex64; 2]; 2]) -> Mat4 {
    let mut m = Mat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j + 2)] = x[i][j];
            m[(i + 2, j)] = y[i][j];
        }
    }
    m
}

/// The Dirac matrices of the radial problem and the products that enter
/// `H` and `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSet {
    pub gamma0: Mat4,
    pub gamma1: Mat4,
    pub gamma2: Mat4,
    pub gamma3: Mat4,
    pub gamma5: Mat4,
    pub gamma01: Mat4,
    pub gamma02: Mat4,
    pub gamma12: Mat4,
}

impl GammaSet {
    /// `γ⁰ = i[[0, I], [−I, 0]]`, `γᵏ = i[[0, σᵏ], [σᵏ, 0]]` with
    /// `σ¹ = diag(1, −1)`, `σ² = [[0, 1], [1, 0]]`, `σ³ = [[0, −i], [i, 0]]`.
    pub fn new() -> Self {
        let s0 = [[ONE, ZERO], [ZERO, ONE]];
        let neg = |s: [[Complex64; 2]; 2]| s.map(|row| row.map(|z| -z));
        let times_i = |s: [[Complex64; 2]; 2]| s.map(|row| row.map(|z| I * z));
        let s1 = [[ONE, ZERO], [ZERO, -ONE]];
        let s2 = [[ZERO, ONE], [ONE, ZERO]];
        let s3 = [[ZERO, -I], [I, ZERO]];
        let gamma0 = off_diagonal(times_i(s0), times_i(neg(s0)));
        let gamma1 = off_diagonal(times_i(s1), times_i(s1));
        let gamma2 = off_diagonal(times_i(s2), times_i(s2));
        let gamma3 = off_diagonal(times_i(s3), times_i(s3));
        let gamma5 = (gamma0 * gamma1 * gamma2 * gamma3).map(|z| -I * z);
        Self {
            gamma01: gamma0 * gamma1,
            gamma02: gamma0 * gamma2,
            gamma12: gamma1 * gamma2,
            gamma0,
            gamma1,
            gamma2,
            gamma3,
            gamma5,
        }
    }

    pub fn gamma(&self, mu: usize) -> &Mat4 {
        match mu {
            0 => &self.gamma0,
            1 => &self.gamma1,
            2 => &self.gamma2,
            3 => &self.gamma3,
            _ => panic!("gamma index {mu} out of range"),
        }
    }
}

impl Default for GammaSet {
    fn default() -> Self {
        Self::new()
    }
}

/// The involution `K` that diagonalizes `γ¹`: `γ¹ = K D K` with
/// `D = diag(i, −i, −i, i)`.
///
/// `K = K₀/√2` with the integer matrix `K₀` kept separately, so that
/// products such as `K·K = K₀·K₀/2` are exact in floating point.
#[derive(Debug, Clone, PartialEq)]
pub struct KBasis {
    pub k_unscaled: Mat4,
    pub d: Mat4,
}

impl KBasis {
    pub fn new() -> Self {
        let k = [
            [1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 1.0],
            [1.0, 0.0, -1.0, 0.0],
            [0.0, 1.0, 0.0, -1.0],
        ];
        let k_unscaled = Mat4::from_fn(|i, j| c(k[i][j]));
        let d = Mat4::from_diagonal(&Vector4::new(I, -I, -I, I));
        Self { k_unscaled, d }
    }

    /// `K` itself, with the irrational scale applied.
    pub fn k(&self) -> Mat4 {
        self.k_unscaled.map(|z| z * std::f64::consts::FRAC_1_SQRT_2)
    }

    /// `K X K`, computed as `K₀ X K₀ / 2`.
    pub fn conjugate(&self, x: &Mat4) -> Mat4 {
        (self.k_unscaled * x * self.k_unscaled).map(|z| z * 0.5)
    }

    /// `K·K`; equals the identity exactly.
    pub fn k_squared(&self) -> Mat4 {
        (self.k_unscaled * self.k_unscaled).map(|z| z * 0.5)
    }
}

impl Default for KBasis {
    fn default() -> Self {
        Self::new()
    }
}

/// Uniform grid on `[x_min, x_cut]` with `n` interior nodes
/// `x_j = x_min + (j + 1)Δx`, `Δx = (x_cut − x_min)/(n + 1)`.
///
/// Dirichlet conditions hold at both endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    pub x_min: f64,
    pub x_cut: f64,
    pub n: usize,
}

impl RadialGrid {
    pub fn new(x_min: f64, x_cut: f64, n: usize) -> Result<Self> {
        if !(x_min < x_cut && x_cut < 0.0) || !x_min.is_finite() {
            return Err(LabError::Config(format!(
                "grid needs x_min < x_cut < 0, got [{x_min}, {x_cut}]"
            )));
        }
        if n < 3 {
            return Err(LabError::Config(format!("grid needs at least 3 nodes, got {n}")));
        }
        Ok(Self { x_min, x_cut, n })
    }

    /// Grid with the same left end and (as nearly as possible) the same
    /// spacing but `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> Self {
        Self { n: (self.n + 1) * factor - 1, ..*self }
    }

    pub fn dx(&self) -> f64 {
        (self.x_cut - self.x_min) / (self.n as f64 + 1.0)
    }

    pub fn node(&self, j: usize) -> f64 {
        self.x_min + (j as f64 + 1.0) * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Number of scalar unknowns, `4n`.
    pub fn dim(&self) -> usize {
        4 * self.n
    }

    /// Checks the semiclassical resolution rule `Δx ≤ h^{1/2} l²/8`.
    pub fn check_resolution(&self, params: &SpacetimeParams) -> Result<()> {
        let l = params.ads_radius;
        let scale = params.h.sqrt() * l * l;
        if self.dx() > scale / 8.0 {
            return Err(LabError::Config(format!(
                "grid too coarse: Δx = {:.3e} exceeds h^(1/2) l²/8 = {:.3e}",
                self.dx(),
                scale / 8.0
            )));
        }
        Ok(())
    }

    /// Index range of nodes lying in `[a, b]`.
    pub fn nodes_in(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let dx = self.dx();
        let first = ((a - self.x_min) / dx - 1.0 - 1e-9).ceil().max(0.0) as usize;
        let last = ((b - self.x_min) / dx - 1.0 + 1e-9).floor();
        if last < 0.0 {
            return 0..0;
        }
        let end = (last as usize + 1).min(self.n);
        first.min(end)..end
    }
}

/// A 4-component complex field sampled on a [`RadialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    grid: RadialGrid,
    values: Vec<Complex64>,
}

impl SpinorField {
    pub fn zeros(grid: RadialGrid) -> Self {
        Self { grid, values: vec![ZERO; grid.dim()] }
    }

    pub fn from_values(grid: RadialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.dim() {
            return Err(LabError::Shape(format!(
                "field has {} entries, grid needs {}",
                values.len(),
                grid.dim()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x_j)` at every node.
    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> [Complex64; 4]) -> Self {
        let mut values = Vec::with_capacity(grid.dim());
        for x in grid.nodes() {
            values.extend_from_slice(&f(x));
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn spinor(&self, j: usize) -> &[Complex64] {
        &self.values[4 * j..4 * j + 4]
    }

    /// Pointwise norm `|φ(x_j)|`.
    pub fn node_norm(&self, j: usize) -> f64 {
        self.spinor(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨self, other⟩ = Δx Σ conj(self)·other`.
    pub fn inner(&self, other: &SpinorField) -> Result<Complex64> {
        self.check_same_grid(other)?;
        Ok(inner_raw(&self.values, &other.values) * self.grid.dx())
    }

    pub fn norm(&self) -> f64 {
        (self.grid.dx() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Discrete L² norm over the nodes in `[a, b]`.
    pub fn norm_on(&self, a: f64, b: f64) -> f64 {
        let range = self.grid.nodes_in(a, b);
        let s: f64 = self.values[4 * range.start..4 * range.end].iter().map(|z| z.norm_sqr()).sum();
        (self.grid.dx() * s).sqrt()
    }

    pub fn scale(&mut self, s: Complex64) {
        for z in &mut self.values {
            *z *= s;
        }
    }

    /// Rescales to unit norm; errors on the zero field.
    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm();
        if !(n > 0.0) {
            return Err(LabError::Numerical("cannot normalize a zero field".into()));
        }
        self.scale(c(1.0 / n));
        Ok(n)
    }

    /// `self + s·other`.
    pub fn axpy(&mut self, s: Complex64, other: &SpinorField) -> Result<()> {
        self.check_same_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
        Ok(())
    }

    fn check_same_grid(&self, other: &SpinorField) -> Result<()> {
        if self.grid != other.grid {
            return Err(LabError::Shape("fields live on different grids".into()));
        }
        Ok(())
    }
}

pub(crate) fn inner_raw(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Which operator a matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    H,
    P,
    PTilde,
    PPlus,
    HPlus,
}

/// Node-sampled coefficients `A, B, A', B'`. Overridable for frozen-
/// coefficient and decoupling tests.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub da: Vec<f64>,
    pub db: Vec<f64>,
}

impl Coefficients {
    pub fn from_potentials(pots: &Potentials, grid: &RadialGrid) -> Result<Self> {
        let mut out = Self::constant(grid.n, 0.0, 0.0);
        for (j, x) in grid.nodes().into_iter().enumerate() {
            let v = pots.at(x)?;
            out.a[j] = v.a;
            out.b[j] = v.b;
            out.da[j] = v.da;
            out.db[j] = v.db;
        }
        Ok(out)
    }

    /// `A ≡ a`, `B ≡ b`, derivatives zero.
    pub fn constant(n: usize, a: f64, b: f64) -> Self {
        Self { a: vec![a; n], b: vec![b; n], da: vec![0.0; n], db: vec![0.0; n] }
    }

    fn check_len(&self, grid: &RadialGrid) -> Result<()> {
        let n = grid.n;
        if [self.a.len(), self.b.len(), self.da.len(), self.db.len()].iter().any(|&k| k != n) {
            return Err(LabError::Shape(format!("coefficients do not match a grid of {n} nodes")));
        }
        Ok(())
    }
}

/// Block-tridiagonal Hermitian matrix of size `4n × 4n`.
///
/// Sub- and super-diagonal blocks are stored independently, so the
/// Hermiticity residual measures the assembly rather than restating it.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    pub kind: OperatorKind,
    pub params: SpacetimeParams,
    grid: RadialGrid,
    diag: Vec<Mat4>,
    upper: Vec<Mat4>,
    lower: Vec<Mat4>,
}

impl HermitianOperator {
    /// Assembles from blocks; `upper[j]` couples node `j` to `j + 1` and
    /// `lower[j]` couples `j + 1` to `j`.
    pub fn from_blocks(
        kind: OperatorKind,
        params: SpacetimeParams,
        grid: RadialGrid,
        diag: Vec<Mat4>,
        upper: Vec<Mat4>,
        lower: Vec<Mat4>,
    ) -> Result<Self> {
        if diag.len() != grid.n || upper.len() + 1 != grid.n || lower.len() + 1 != grid.n {
            return Err(LabError::Shape("block counts do not match the grid".into()));
        }
        Ok(Self { kind, params, grid, diag, upper, lower })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn diag_block(&self, j: usize) -> &Mat4 {
        &self.diag[j]
    }

    /// `max |O − O*|` over all entries, relative to `max |O|`.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut size = 0.0f64;
        for d in &self.diag {
            worst = worst.max((d - d.adjoint()).camax());
            size = size.max(d.camax());
        }
        for (u, l) in self.upper.iter().zip(&self.lower) {
            worst = worst.max((u - l.adjoint()).camax());
            size = size.max(u.camax());
        }
        if size == 0.0 {
            0.0
        } else {
            worst / size
        }
    }

    /// `y = O x` on raw node-major vectors.
    pub fn apply_raw(&self, x: &[Complex64], y: &mut [Complex64]) {
        let n = self.grid.n;
        let block = |m: &Mat4, v: &[Complex64], out: &mut [Complex64]| {
            for r in 0..4 {
                let mut acc = out[r];
                for s in 0..4 {
                    acc += m[(r, s)] * v[s];
                }
                out[r] = acc;
            }
        };
        for j in 0..n {
            let out = &mut y[4 * j..4 * j + 4];
            out.fill(ZERO);
            block(&self.diag[j], &x[4 * j..4 * j + 4], out);
            if j + 1 < n {
                block(&self.upper[j], &x[4 * j + 4..4 * j + 8], out);
            }
            if j > 0 {
                block(&self.lower[j - 1], &x[4 * j - 4..4 * j], out);
            }
        }
    }

    /// Matrix–field product.
    pub fn apply(&self, field: &SpinorField) -> Result<SpinorField> {
        if *field.grid() != self.grid {
            return Err(LabError::Shape("field grid does not match operator grid".into()));
        }
        let mut out = SpinorField::zeros(self.grid);
        self.apply_raw(field.values(), out.values_mut());
        Ok(out)
    }

    /// `α I + β O` as a band matrix (7 sub- and super-diagonals).
    pub fn to_band(&self, alpha: Complex64, beta: Complex64) -> BandMatrix {
        let n = self.grid.n;
        let mut band = BandMatrix::zeros(4 * n, 7, 7);
        for j in 0..n {
            for r in 0..4 {
                for s in 0..4 {
                    let mut v = beta * self.diag[j][(r, s)];
                    if r == s {
                        v += alpha;
                    }
                    band.set(4 * j + r, 4 * j + s, v);
                    if j + 1 < n {
                        band.set(4 * j + r, 4 * j + 4 + s, beta * self.upper[j][(r, s)]);
                        band.set(4 * j + 4 + r, 4 * j + s, beta * self.lower[j][(r, s)]);
                    }
                }
            }
        }
        band
    }

    /// Dense copy, for small-grid cross-checks.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.grid.n;
        let mut m = DMatrix::zeros(4 * n, 4 * n);
        for j in 0..n {
            m.view_mut((4 * j, 4 * j), (4, 4)).copy_from(&self.diag[j]);
            if j + 1 < n {
                m.view_mut((4 * j, 4 * j + 4), (4, 4)).copy_from(&self.upper[j]);
                m.view_mut((4 * j + 4, 4 * j), (4, 4)).copy_from(&self.lower[j]);
            }
        }
        m
    }

    /// Coordinate list `row col re im`, one line per nonzero, row-major.
    pub fn to_coo(&self) -> String {
        let n = self.grid.n;
        let mut out = String::new();
        for j in 0..n {
            for r in 0..4 {
                let row = 4 * j + r;
                let mut emit = |col: usize, z: Complex64| {
                    if z != ZERO {
                        let _ = writeln!(out, "{row} {col} {:.16e} {:.16e}", z.re, z.im);
                    }
                };
                if j > 0 {
                    for s in 0..4 {
                        emit(4 * j - 4 + s, self.lower[j - 1][(r, s)]);
                    }
                }
                for s in 0..4 {
                    emit(4 * j + s, self.diag[j][(r, s)]);
                }
                if j + 1 < n {
                    for s in 0..4 {
                        emit(4 * j + 4 + s, self.upper[j][(r, s)]);
                    }
                }
            }
        }
        out
    }
}

/// `H` from explicit coefficients.
pub fn assemble_h_with(
    kind: OperatorKind,
    grid: &RadialGrid,
    params: &SpacetimeParams,
    coeffs: &Coefficients,
) -> Result<HermitianOperator> {
    coeffs.check_len(grid)?;
    let g = GammaSet::new();
    let h = params.h;
    let hm = h * params.field_mass;
    let transport = (g.gamma01 * I).map(|z| z * (h / (2.0 * grid.dx())));
    let diag = (0..grid.n)
        .map(|j| g.gamma02.map(|z| z * coeffs.a[j]) - g.gamma0.map(|z| z * (hm * coeffs.b[j])))
        .collect();
    let upper = vec![transport; grid.n - 1];
    let lower = vec![-transport; grid.n - 1];
    HermitianOperator::from_blocks(kind, *params, *grid, diag, upper, lower)
}

/// The 4×4 potential block `V = A² + h²m²B² − ihγ¹γ²A' + ih²mγ¹B'`.
pub fn potential_block(g: &GammaSet, params: &SpacetimeParams, a: f64, b: f64, da: f64, db: f64) -> Mat4 {
    let h = params.h;
    let m = params.field_mass;
    let scalar = a * a + h * h * m * m * b * b;
    Mat4::identity().map(|z| z * scalar) + g.gamma12.map(|z| -I * h * da * z)
        + g.gamma1.map(|z| I * h * h * m * db * z)
}

/// `P = −h²D₂ + V` from explicit coefficients.
pub fn assemble_p_with(
    kind: OperatorKind,
    grid: &RadialGrid,
    params: &SpacetimeParams,
    coeffs: &Coefficients,
) -> Result<HermitianOperator> {
    coeffs.check_len(grid)?;
    let g = GammaSet::new();
    let h = params.h;
    let dx = grid.dx();
    let kinetic = h * h / (dx * dx);
    let diag = (0..grid.n)
        .map(|j| {
            potential_block(&g, params, coeffs.a[j], coeffs.b[j], coeffs.da[j], coeffs.db[j])
                + Mat4::identity().map(|z| z * 2.0 * kinetic)
        })
        .collect();
    let off = Mat4::identity().map(|z| z * -kinetic);
    HermitianOperator::from_blocks(kind, *params, *grid, diag, vec![off; grid.n - 1], vec![off; grid.n - 1])
}

/// Discrete `H` on `grid` with the physical potentials.
pub fn assemble_h(grid: &RadialGrid, params: &SpacetimeParams) -> Result<HermitianOperator> {
    grid.check_resolution(params)?;
    let coeffs = Coefficients::from_potentials(&Potentials::new(*params), grid)?;
    assemble_h_with(OperatorKind::H, grid, params, &coeffs)
}

/// Discrete `P = H²` on `grid`, assembled directly from `V`.
pub fn assemble_p(grid: &RadialGrid, params: &SpacetimeParams) -> Result<HermitianOperator> {
    grid.check_resolution(params)?;
    let coeffs = Coefficients::from_potentials(&Potentials::new(*params), grid)?;
    assemble_p_with(OperatorKind::P, grid, params, &coeffs)
}

/// Outcome of fitting `|φ(x)| ≈ C(−x)^p` near the truncation point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReport {
    /// Fitted exponent, absent when the fit is inconclusive.
    pub exponent: Option<f64>,
    /// `min(3/2, ml)`.
    pub predicted: f64,
    /// Whether `2ml = 3`, where the rate carries a logarithmic correction.
    pub log_corrected: bool,
    pub nodes_used: usize,
    pub note: String,
}

impl BoundaryReport {
    pub fn conclusive(&self) -> bool {
        self.exponent.is_some()
    }
}

/// Fits the power law of `|φ(x_j)|` over the decade `−x ∈ [5|x_cut|, 50|x_cut|]`.
pub fn boundary_behavior_check(field: &SpinorField, params: &SpacetimeParams) -> BoundaryReport {
    let ml = params.ml();
    let predicted = ml.min(1.5);
    let log_corrected = (2.0 * ml - 3.0).abs() < 1e-12;
    let grid = field.grid();
    let cut = grid.x_cut.abs();
    let range = grid.nodes_in(-50.0 * cut, -5.0 * cut);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let peak = (0..grid.n).map(|j| field.node_norm(j)).fold(0.0, f64::max);
    for j in range {
        let v = field.node_norm(j);
        if v > 1e-300 && v > peak * 1e-14 {
            xs.push((-grid.node(j)).ln());
            ys.push(v.ln());
        }
    }
    let report = |exponent, note: &str, used| BoundaryReport {
        exponent,
        predicted,
        log_corrected,
        nodes_used: used,
        note: note.to_string(),
    };
    if xs.len() < 8 {
        return report(None, "inconclusive: fewer than 8 usable nodes near x_cut", xs.len());
    }
    match crate::fit::linear_fit(&xs, &ys) {
        Ok(fit) => report(Some(fit.slope), "ok", xs.len()),
        Err(_) => report(None, "inconclusive: degenerate fit", xs.len()),
    }
}
