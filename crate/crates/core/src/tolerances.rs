//! Numerical tolerances shared across the crate.
//!
//! Construction checks sit one order tighter than the solver target, verdicts
//! one order looser. Every threshold a test or verdict uses is named here.

/// Hermiticity assertion on constructed or loaded operators (max-abs entry of `A - A†`).
pub const HERMITIAN: f64 = 1e-10;

/// Positive-semidefiniteness verdicts: `min_eigenvalue >= -PSD`.
pub const PSD: f64 = 1e-8;

/// Relative reconstruction residual required of the eigensolver.
pub const EIGEN: f64 = 1e-10;

/// Default solver feasibility tolerance.
pub const SOLVER_FEAS: f64 = 1e-7;

/// Default solver duality-gap tolerance.
pub const SOLVER_GAP: f64 = 1e-7;

/// Certificate reconstruction and slackness residuals.
pub const CERT: f64 = 1e-6;

/// Equality verdicts between two independently solved optimal values.
pub const VERDICT: f64 = 1e-5;

/// Ensemble priors must sum to one within this bound.
pub const PRIOR_SUM: f64 = 1e-12;

/// Density operators must have unit trace within this bound.
pub const UNIT_TRACE: f64 = 1e-10;

/// Measurement completeness, Frobenius norm of `Σ M_i - 1`.
pub const COMPLETENESS: f64 = 1e-8;

/// Solver feasibility tolerance for the discrimination programs. Primal and
/// dual values come from two separate solves and are compared at `2e-7`.
pub const DISCRIMINATION_FEAS: f64 = 1e-8;

/// Solver gap tolerance for the discrimination programs.
pub const DISCRIMINATION_GAP: f64 = 1e-8;
