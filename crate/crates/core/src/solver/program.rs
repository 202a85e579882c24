use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Sparse symmetric matrix stored as upper-triangle triplets `(row <= col)`.
/// Duplicate entries are summed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SymMatrix {
    size: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SymMatrix {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            entries: Vec::new(),
        }
    }

    /// Adds `value` at `(row, col)` and, implicitly, its mirror.
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        assert!(row < self.size && col < self.size, "entry ({row}, {col}) outside {0}x{0}", self.size);
        if value != 0.0 {
            self.entries.push((row.min(col), row.max(col), value));
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::new(size);
        for i in 0..size {
            m.push(i, i, 1.0);
        }
        m
    }

    /// Upper triangle of a dense matrix; the lower triangle is ignored.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut out = Self::new(m.nrows());
        for c in 0..m.ncols() {
            for r in 0..=c.min(m.nrows().saturating_sub(1)) {
                out.push(r, c, m[(r, c)]);
            }
        }
        out
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.size, self.size);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
            if r != c {
                m[(c, r)] += v;
            }
        }
        m
    }

    /// `⟨A, X⟩ = Tr(A X)` for symmetric `X`.
    pub fn inner(&self, x: &DMatrix<f64>) -> f64 {
        self.entries
            .iter()
            .map(|&(r, c, v)| if r == c { v * x[(r, c)] } else { 2.0 * v * x[(r, c)] })
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            size: self.size,
            entries: self.entries.iter().map(|&(r, c, v)| (r, c, v * factor)).collect(),
        }
    }
}

/// One linear equality `Σ_b ⟨A_b, X_b⟩ = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub terms: Vec<(usize, SymMatrix)>,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(terms: Vec<(usize, SymMatrix)>, rhs: f64) -> Self {
        Self { terms, rhs }
    }
}

/// `minimize Σ_b ⟨C_b, X_b⟩  s.t.  Σ_b ⟨A_{m,b}, X_b⟩ = r_m,  X_b ⪰ 0`
/// over a product of real symmetric PSD blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct ConicProgram {
    blocks: Vec<usize>,
    objective: Vec<SymMatrix>,
    constraints: Vec<Constraint>,
}

impl ConicProgram {
    pub fn new(blocks: Vec<usize>) -> Self {
        let objective = blocks.iter().map(|&n| SymMatrix::new(n)).collect();
        Self {
            blocks,
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn objective(&self) -> &[SymMatrix] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn set_objective(&mut self, block: usize, c: SymMatrix) {
        self.objective[block] = c;
    }

    pub fn add_constraint(&mut self, constraint: Constraint) {
        self.constraints.push(constraint);
    }

    /// Scales every objective matrix by `factor`.
    pub fn scale_objective(&mut self, factor: f64) {
        for c in &mut self.objective {
            *c = c.scaled(factor);
        }
    }

    /// Objective value `Σ_b ⟨C_b, X_b⟩`.
    pub fn objective_value(&self, x: &[DMatrix<f64>]) -> f64 {
        self.objective.iter().zip(x).map(|(c, xb)| c.inner(xb)).sum()
    }

    /// `Σ_b ⟨A_{m,b}, X_b⟩ - r_m` for every constraint.
    pub fn constraint_residuals(&self, x: &[DMatrix<f64>]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|con| con.terms.iter().map(|(b, a)| a.inner(&x[*b])).sum::<f64>() - con.rhs)
            .collect()
    }

    /// `Σ_m y_m A_{m,b}` for every block, as dense symmetric matrices.
    pub fn adjoint(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (con, &ym) in self.constraints.iter().zip(y) {
            for (b, a) in &con.terms {
                for &(r, c, v) in a.entries() {
                    out[*b][(r, c)] += ym * v;
                    if r != c {
                        out[*b][(c, r)] += ym * v;
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::InvalidProgram("no blocks".into()));
        }
        if let Some(b) = self.blocks.iter().position(|&n| n == 0) {
            return Err(Error::InvalidProgram(format!("block {b} has size zero")));
        }
        if self.constraints.is_empty() {
            return Err(Error::InvalidProgram("constraint list is empty".into()));
        }
        for (b, c) in self.objective.iter().enumerate() {
            if c.size() != self.blocks[b] {
                return Err(Error::InvalidProgram(format!(
                    "objective for block {b} has size {} (block size {})",
                    c.size(),
                    self.blocks[b]
                )));
            }
            if c.entries().iter().any(|e| !e.2.is_finite()) {
                return Err(Error::InvalidProgram(format!("objective for block {b} is not finite")));
            }
        }
        for (m, con) in self.constraints.iter().enumerate() {
            if !con.rhs.is_finite() {
                return Err(Error::InvalidProgram(format!("constraint {m} has non-finite rhs")));
            }
            let mut nonzero = false;
            for (b, a) in &con.terms {
                let size = *self.blocks.get(*b).ok_or_else(|| {
                    Error::InvalidProgram(format!("constraint {m} references missing block {b}"))
                })?;
                if a.size() != size {
                    return Err(Error::InvalidProgram(format!(
                        "constraint {m}, block {b}: coefficient size {} does not match block size {size}",
                        a.size()
                    )));
                }
                if a.entries().iter().any(|e| !e.2.is_finite()) {
                    return Err(Error::InvalidProgram(format!("constraint {m} has non-finite coefficients")));
                }
                nonzero |= a.entries().iter().any(|e| e.2 != 0.0);
            }
            if !nonzero {
                return Err(Error::InvalidProgram(format!("constraint {m} has no nonzero coefficients")));
            }
        }
        Ok(())
    }
}
