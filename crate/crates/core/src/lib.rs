//! Pathwise simulation of the damped stochastic wave equation
//!
//! ```text
//! u_tt + β u_t - Δu + α u + f(u) = g + ε Σ_j h_j dW_j/dt
//! ```
//!
//! on a finite-difference box, after the Ornstein-Uhlenbeck transform that
//! turns it into a random PDE. Around the integrator sit numerical witnesses
//! for the energy inequality, the absorbing set, tail estimates, the Vitali
//! convergence criterion and pullback attraction.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attractor;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod grid;
pub mod noise;
pub mod nonlin;
pub mod params;
pub mod tails;
pub mod vitali;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use params::{Params, Violation};
