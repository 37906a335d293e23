//! Synthesis, simulation and sampled verification of hybrid feedbacks that
//! combine a local linear-type controller with a global practical
//! backstepping controller through hysteresis switching.
//!
//! The controlled systems have the cascade form
//!
//! ```text
//! ẋ₁ = f₁(x₁, x₂) + h₁(x₁, x₂, u)
//! ẋ₂ = f₂(x₁, x₂)·u + h₂(x₁, x₂, u)
//! ```
//!
//! with `x₁ ∈ ℝⁿ⁻¹`, `x₂ ∈ ℝ` and perturbations `h₁`, `h₂` that may depend on
//! the input in ways classical backstepping cannot cancel.

pub mod backstepping;
pub mod config;
pub mod error;
pub mod expr;
pub mod feedback;
pub mod hybrid;
pub mod hysteresis;
pub mod io;
pub mod plant;
pub mod presets;
pub mod quadrature;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
