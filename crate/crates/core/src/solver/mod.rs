//! Conic solver for linear objectives over products of real PSD cones with
//! affine equality constraints.
//!
//! Primal: `min Σ ⟨C_b, X_b⟩` s.t. `Σ_b ⟨A_{m,b}, X_b⟩ = r_m`, `X_b ⪰ 0`.
//! Dual: `max rᵀy` s.t. `S_b = C_b − Σ_m y_m A_{m,b} ⪰ 0`.
//!
//! Residuals are relative: primal `‖A x − r‖ / (1 + ‖r‖)`, dual
//! `‖C − Aᵀy − S‖ / (1 + ‖C‖)`, gap `|p − d| / (1 + |p| + |d|)`.

mod admm;
mod embed;
mod program;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances;

pub use embed::{hermitian_basis, recover_hermitian, ComplexConstraint, ComplexProgram, ComplexSolution, HermSparse};
pub use program::{ConicProgram, Constraint, SymMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub eps_feas: f64,
    pub eps_gap: f64,
    pub max_iter: usize,
    /// Over-relaxation factor in `(0, 2)`.
    pub alpha: f64,
    /// Initial penalty.
    pub rho: f64,
    pub adapt_interval: usize,
    pub check_interval: usize,
    /// Stop with `MaxIter` once the worst residual has not improved by 10%
    /// for this many iterations; 0 disables.
    pub stall_window: usize,
    /// Unused by the default deterministic path.
    pub seed: Option<u64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            eps_feas: tolerances::SOLVER_FEAS,
            eps_gap: tolerances::SOLVER_GAP,
            max_iter: 200_000,
            alpha: 1.6,
            rho: 1.0,
            adapt_interval: 100,
            check_interval: 10,
            stall_window: 20_000,
            seed: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tolerances(eps_feas: f64, eps_gap: f64) -> Self {
        Self {
            eps_feas,
            eps_gap,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.eps_feas) || !positive(self.eps_gap) {
            return Err(Error::InvalidArgument("solver tolerances must be positive and finite".into()));
        }
        if self.max_iter == 0 || self.adapt_interval == 0 || self.check_interval == 0 {
            return Err(Error::InvalidArgument("iteration counts must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 2), got {}", self.alpha)));
        }
        if !positive(self.rho) {
            return Err(Error::InvalidArgument("initial penalty must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Primal blocks; exactly PSD (projected iterate).
    pub x: Vec<DMatrix<f64>>,
    pub y: Vec<f64>,
    /// Dual slack blocks; exactly PSD.
    pub s: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    /// Final penalty parameter.
    pub rho: f64,
    /// On `Infeasible`: `y` with `rᵀy = 1` and `Σ y_m A_{m,b} ⪯ eps_feas` per block.
    pub dual_ray: Option<Vec<f64>>,
    /// On `Unbounded`: `D ⪰ -eps_feas` with `⟨C, D⟩ = -1` and `A D ≈ 0`.
    pub primal_ray: Option<Vec<DMatrix<f64>>>,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Converts a non-optimal status into `Error::Solver`.
    pub fn require_optimal(self) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(self.to_error())
        }
    }

    pub fn to_error(&self) -> Error {
        Error::Solver {
            status: self.status,
            primal: self.primal_residual,
            dual: self.dual_residual,
            gap: self.gap,
        }
    }

    pub fn stats(&self) -> SolverStats {
        SolverStats {
            status: self.status,
            iterations: self.iterations,
            primal_residual: self.primal_residual,
            dual_residual: self.dual_residual,
            gap: self.gap,
        }
    }
}

/// Summary of a solve for reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

/// Solves `program`. Deterministic for identical inputs and options.
pub fn solve(program: &ConicProgram, options: &SolverOptions) -> Result<ConicSolution> {
    admm::solve(program, options)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_program() -> ConicProgram {
        let mut p = ConicProgram::new(vec![2]);
        p.set_objective(0, SymMatrix::identity(2));
        let mut a = SymMatrix::new(2);
        a.push(0, 0, 1.0);
        p.add_constraint(Constraint::new(vec![(0, a)], 1.0));
        let mut a = SymMatrix::new(2);
        a.push(1, 1, 1.0);
        p.add_constraint(Constraint::new(vec![(0, a)], 1.0));
        p
    }

    #[test]
    fn scalar_program() {
        let mut p = ConicProgram::new(vec![1]);
        p.set_objective(0, SymMatrix::identity(1));
        p.add_constraint(Constraint::new(vec![(0, SymMatrix::identity(1))], 1.0));
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective - 1.0).abs() < 1e-6);
    }

    #[test]
    fn diagonal_program() {
        let sol = solve(&diag_program(), &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.primal_objective - 2.0).abs() < 1e-6);
        assert!((&sol.x[0] - DMatrix::<f64>::identity(2, 2)).norm() < 1e-6);
    }

    #[test]
    fn objective_scaling_scales_value() {
        let base = solve(&diag_program(), &SolverOptions::default()).unwrap();
        for factor in [0.01, 7.0, 300.0] {
            let mut p = diag_program();
            p.scale_objective(factor);
            let sol = solve(&p, &SolverOptions::default()).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal);
            let tol = 10.0 * tolerances::SOLVER_GAP * (1.0 + factor * 2.0);
            assert!((sol.primal_objective - factor * base.primal_objective).abs() <= tol);
        }
    }

    #[test]
    fn deterministic() {
        // off-diagonal coupling so the run takes more than a handful of iterations
        let mut p = ConicProgram::new(vec![3]);
        let mut c = SymMatrix::identity(3);
        c.push(0, 1, 0.4);
        c.push(1, 2, -0.3);
        p.set_objective(0, c);
        p.add_constraint(Constraint::new(vec![(0, SymMatrix::identity(3))], 1.0));
        let a = solve(&p, &SolverOptions::default()).unwrap();
        let b = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.primal_objective.to_bits(), b.primal_objective.to_bits());
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn minimum_eigenvalue_program() {
        // min ⟨C, X⟩ s.t. Tr X = 1 has value λ_min(C)
        let cm = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0]);
        let mut p = ConicProgram::new(vec![3]);
        p.set_objective(0, SymMatrix::from_dense(&cm));
        p.add_constraint(Constraint::new(vec![(0, SymMatrix::identity(3))], 1.0));
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let expected = 2.0 - std::f64::consts::SQRT_2;
        assert!((sol.primal_objective - expected).abs() < 1e-6);
        assert!(sol.dual_objective <= sol.primal_objective + sol.gap * (1.0 + 2.0 * expected.abs()) + 1e-12);
    }

    #[test]
    fn infeasible_program_returns_verified_ray() {
        // X ⪰ 0 (2x2) with X_00 = -1
        let mut p = ConicProgram::new(vec![2]);
        let mut a = SymMatrix::new(2);
        a.push(0, 0, 1.0);
        p.add_constraint(Constraint::new(vec![(0, a)], -1.0));
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        let ray = sol.dual_ray.unwrap();
        assert!((-ray[0] - 1.0).abs() < 1e-12);
        for block in p.adjoint(&ray) {
            let (vals, _) = crate::operator::eigen::real_symmetric_eigen(block).unwrap();
            assert!(*vals.last().unwrap() <= tolerances::SOLVER_FEAS);
        }
    }

    #[test]
    fn unbounded_program_returns_verified_ray() {
        // min -X_11 s.t. X_00 = 1: X_11 can grow without bound
        let mut p = ConicProgram::new(vec![2]);
        let mut c = SymMatrix::new(2);
        c.push(1, 1, -1.0);
        p.set_objective(0, c);
        let mut a = SymMatrix::new(2);
        a.push(0, 0, 1.0);
        p.add_constraint(Constraint::new(vec![(0, a)], 1.0));
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Unbounded);
        let d = sol.primal_ray.unwrap();
        assert!((p.objective_value(&d) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn dependent_rows_rejected() {
        let mut p = ConicProgram::new(vec![2]);
        p.add_constraint(Constraint::new(vec![(0, SymMatrix::identity(2))], 1.0));
        p.add_constraint(Constraint::new(vec![(0, SymMatrix::identity(2).scaled(2.0))], 2.0));
        assert!(matches!(solve(&p, &SolverOptions::default()), Err(Error::InvalidProgram(_))));
    }
}
