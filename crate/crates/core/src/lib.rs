//! Numerical core for the coupled Lane–Emden system
//!
//! ```text
//! -Δu = μ₁ u^{2q+1} + β u^q v^{q+1}
//! -Δv = μ₂ v^{2q+1} + β v^q u^{q+1}      in ℝⁿ \ {0},  p = 2q + 1
//! ```
//!
//! Radial solutions are studied in Fowler variables `t = -ln r`, `w = r^δ u`, where the
//! PDE becomes an autonomous damped Newtonian system in four phase dimensions.
//!
//! - [`params`]: derived exponents and constants, including the Kelvin-side ones.
//! - [`roots`]: nonnegative scalings `(k, l)` of the homogeneous singular solutions.
//! - [`fowler`]: right-hand side, adaptive integration, equilibria, linearization, shooting.
//! - [`energy`]: the energy `Ψ` (and `E = |S^{n-1}| Ψ`), monotonicity audits, limit classification.
//! - [`transforms`]: Kelvin time reversal, scaling, radial reconstruction, PDE residuals.
//!
//! The crate is `no_std` and only needs `alloc`.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;
mod math;

pub mod energy;
pub mod fowler;
pub mod params;
pub mod roots;
pub mod transforms;

pub use error::{Error, Result};
pub use fowler::{
    EquilibriumId, EquilibriumInfo, EquilibriumKind, FowlerState, IntegrateOptions, Status,
    System, Tolerances, Trajectory,
};
pub use params::Params;
pub use roots::{Branch, KLRoot, RootSet, RootWarning, WarningSource};
