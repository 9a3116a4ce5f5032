//! Numerical laboratory for the massive Dirac field on the exterior of a
//! Schwarzschild–Anti-de Sitter black hole.
//!
//! After separation of the angular variables the field obeys
//! `∂_t φ = i H φ` with the semiclassical radial operator
//!
//! ```text
//! H = iγ⁰γ¹ h ∂_x + γ⁰γ² A(x) − h m γ⁰ B(x),     x ∈ (−∞, 0)
//! ```
//!
//! written in the tortoise coordinate `x`, where `A = F^{1/2}/r`,
//! `B = F^{1/2}` and `F(r) = 1 − 2M/r + r²/l²`. The crate builds the
//! operator and its square `P = H²` on truncated grids, constructs
//! exponentially accurate quasimodes by cutting off eigenvectors of the
//! restricted operator `H⁺` on `[x₊, 0)`, measures tunneling through the
//! classically forbidden region, and turns the quasimode residual into a
//! logarithmic lower bound on local energy decay.
//!
//! Module map:
//!
//! - [`geometry`]: `F(r)`, the horizon, tortoise coordinate and its inverse.
//! - [`potentials`]: `A`, `B`, their derivatives, turning points, the inner cutoff `x₊`.
//! - [`dirac`]: gamma matrices, grids, spinor fields, assembly of `H` and `P`.
//! - [`model`]: the comparison operator `P̃`, its explicit channel eigenfunctions and levels.
//! - [`eigen`]: shift-invert block Krylov eigensolver for the banded Hermitian operators.
//! - [`quasimode`]: `P⁺`/`H⁺`, the eigenvalue `E⁺(h)`, quasimodes and the residual sweep.
//! - [`agmon`]: weighted estimates and forbidden-region mass.
//! - [`evolution`]: Cayley propagator, local energy and the log-bound certificate.
//! - [`cli`]: configuration parsing and the `sads-lab` subcommands.

pub mod agmon;
pub mod banded;
pub mod cli;
pub mod dirac;
pub mod eigen;
pub mod error;
pub mod evolution;
pub mod fit;
pub mod geometry;
pub mod model;
pub mod potentials;
pub mod quasimode;

pub use error::{LabError, Result};
pub use geometry::{Geometry, HorizonData, SpacetimeParams};
