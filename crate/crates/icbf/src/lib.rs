//! Safety-critical integral control via integral control barrier functions.
//!
//! A plant `ẋ = f(x, u)` driven by a dynamically defined controller
//! `u̇ = φ(x, u, t)` evolves as a single augmented state `z = (x, u)`.
//! A barrier `h(x, u)` whose 0-superlevel set is the safe set is kept
//! forward invariant by minimally perturbing the controller derivative:
//! `u̇ = φ + v*`, where `v*` solves a min-norm quadratic program.
//!
//! The crate provides the barrier calculus (`barrier`), exact small-scale
//! QP solvers with an independent test oracle (`minnorm`), the tracking
//! and filter controllers (`controllers`), a fixed-step simulator
//! (`integrator`), and a complete adaptive cruise control benchmark
//! (`acc`).

pub mod acc;
pub mod barrier;
pub mod controllers;
pub mod integrator;
pub mod minnorm;
pub mod selfcheck;
pub mod types;

mod linalg;

use thiserror::Error;

/// Errors surfaced by simulation and filter evaluation.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A state or derivative component became non-finite during integration.
    #[error("non-finite value at t = {time} (component {component})")]
    NonFinite { time: f64, component: usize },

    /// The predictor Jacobian could not be inverted reliably.
    #[error("singular or ill-conditioned jacobian (condition estimate {cond:.3e})")]
    SingularJacobian { cond: f64 },

    /// The barrier fails the I-CBF condition at the queried point:
    /// the constraint gradient vanishes while the constraint is violated.
    #[error("relative-degree violation: ||p|| = {p_norm:.3e} but d = {d:.3e} > 0")]
    RelativeDegree { p_norm: f64, d: f64 },

    /// The combined safety QP admits no solution at this step.
    #[error("safety QP infeasible at t = {time}")]
    Infeasible { time: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
