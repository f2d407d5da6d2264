//! Ground states of the two-dimensional saturable nonlinear Schrödinger model
//!
//! ```text
//! i F_z + Δ⊥F − Γ |F|²/(1+|F|²) F = 0
//! ```
//!
//! and its stationary reduction `Δρ − Γ ρ³/(1+ρ²) = λ ρ` with unit power.
//! Bright radial ground states exist exactly when the coupling is below
//! `−T₀`, where `T₀` is the infimum of the kinetic/saturable-potential
//! quotient over unit-power profiles. The crate provides:
//!
//! * [`radial`]: uniform radial meshes, quadrature and the discrete radial Laplacian,
//! * [`functionals`]: energy, power, Rayleigh quotient, Lagrange multipliers and
//!   Pohozaev residuals,
//! * [`threshold`]: the `T₀` estimate (Townes-soliton mass plus a scaled
//!   trial-function upper-bound certificate),
//! * [`groundstate`]: normalized gradient flow on expanding disks and an
//!   independent shooting solver,
//! * [`diagnostics`]: pass/fail reports for the identities and qualitative
//!   properties of a computed state,
//! * [`propagator`]: split-step Fourier propagation of the forward beam and the
//!   relaxation law of the space-charge field.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod functionals;
pub mod groundstate;
pub mod propagator;
pub mod radial;
pub mod threshold;

mod shooting;

pub use error::{Error, Result};
