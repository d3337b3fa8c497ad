//! Form-boundedness diagnostics for the relativistic Schrödinger operator
//! `√(-Δ) + Q` on periodic grids.
//!
//! The crate builds the smoothed potential `Φ = (-Δ+1)^{-1/4} Q`, estimates
//! the sharp constant of `|⟨Qu, u⟩| ≤ C ‖u‖²_{W^{1/2}_2}` directly, and
//! evaluates the capacity, Carleson, ball, level-set, Fefferman–Phong,
//! Bessel-iteration and weak-`L_p` criteria so they can be compared with
//! each other and with brute-force oracles.

pub mod calculus;
pub mod capacity;
pub mod criteria;
pub mod dyadic;
pub mod error;
pub mod extension;
pub mod formnorm;
pub mod quadrature;
pub mod potential;
pub mod spectral;
mod periodic;
mod stencil;

pub use error::{FormboundError, Result};
