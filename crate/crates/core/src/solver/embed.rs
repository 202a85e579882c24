//! Complex Hermitian programs, solved through the real symmetric embedding
//! `X ↦ [[Re X, −Im X], [Im X, Re X]]`.
//!
//! Coefficients are embedded with a factor `½`, so `⟨½ emb(A), emb(X)⟩ = Tr(A X)`
//! and the dual multipliers carry over unchanged. The complex dual slack is
//! `2 · recover(S)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::program::{ConicProgram, Constraint, SymMatrix};
use super::{solve, ConicSolution, SolveStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::operator::{hermiticity_deviation, hermitian_part, CMatrix};
use crate::tolerances;

/// Sparse Hermitian matrix stored as upper-triangle entries `(r <= c)`;
/// the entry at `(c, r)` is the conjugate. Diagonal entries must be real.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HermSparse {
    size: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl HermSparse {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            entries: Vec::new(),
        }
    }

    /// Adds `z` at `(r, c)` and `conj(z)` at `(c, r)`.
    pub fn push(&mut self, r: usize, c: usize, z: Complex64) {
        assert!(r < self.size && c < self.size, "entry outside {0}x{0}", self.size);
        let (r, c, z) = if r <= c { (r, c, z) } else { (c, r, z.conj()) };
        if r == c {
            assert!(z.im == 0.0, "diagonal entry must be real");
        }
        if z != Complex64::new(0.0, 0.0) {
            self.entries.push((r, c, z));
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::new(size);
        for i in 0..size {
            m.push(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Upper triangle of `m`, which must be Hermitian to `τ_herm`.
    pub fn from_dense(m: &CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
        }
        let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let dev = hermiticity_deviation(m);
        if dev > tolerances::HERMITIAN * scale {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let h = hermitian_part(m);
        let mut out = Self::new(m.nrows());
        for c in 0..h.ncols() {
            for r in 0..=c {
                let mut z = h[(r, c)];
                if r == c {
                    z.im = 0.0;
                }
                out.push(r, c, z);
            }
        }
        Ok(out)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.size, self.size);
        for &(r, c, z) in &self.entries {
            m[(r, c)] += z;
            if r != c {
                m[(c, r)] += z.conj();
            }
        }
        m
    }

    /// `Tr(A X)` for Hermitian `X`.
    pub fn inner(&self, x: &CMatrix) -> f64 {
        self.entries
            .iter()
            .map(|&(r, c, z)| if r == c { z.re * x[(r, r)].re } else { 2.0 * (z * x[(c, r)]).re })
            .sum()
    }

    pub fn trace(&self) -> f64 {
        self.entries.iter().filter(|e| e.0 == e.1).map(|e| e.2.re).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            size: self.size,
            entries: self.entries.iter().map(|&(r, c, z)| (r, c, z * factor)).collect(),
        }
    }

    /// `½ emb(A)` as a real symmetric matrix of size `2n`.
    fn embed_half(&self) -> SymMatrix {
        let n = self.size;
        let mut out = SymMatrix::new(2 * n);
        for &(r, c, z) in &self.entries {
            let (a, b) = (0.5 * z.re, 0.5 * z.im);
            out.push(r, c, a);
            out.push(r + n, c + n, a);
            if r != c {
                out.push(r, c + n, -b);
                out.push(c, r + n, b);
            }
        }
        out
    }
}

/// Orthonormal basis of the Hermitian `n x n` matrices under `Tr(AB)`:
/// `E_jj`, then for `j < k` the pair `(E_jk + E_kj)/√2`, `i(E_jk − E_kj)/√2`.
pub fn hermitian_basis(n: usize) -> Vec<HermSparse> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        let mut e = HermSparse::new(n);
        e.push(j, j, Complex64::new(1.0, 0.0));
        out.push(e);
    }
    for j in 0..n {
        for k in (j + 1)..n {
            let mut re = HermSparse::new(n);
            re.push(j, k, Complex64::new(h, 0.0));
            out.push(re);
            let mut im = HermSparse::new(n);
            im.push(j, k, Complex64::new(0.0, h));
            out.push(im);
        }
    }
    out
}

/// Complex Hermitian matrix `R + iI` from an embedded block, with
/// `R = (Z11 + Z22)/2` and `I = (Z21 − Z12)/2`.
pub fn recover_hermitian(z: &DMatrix<f64>) -> Result<CMatrix> {
    if z.nrows() != z.ncols() || z.nrows() % 2 != 0 {
        return Err(Error::Dimension(format!("embedded block must be square of even size, got {}x{}", z.nrows(), z.ncols())));
    }
    let n = z.nrows() / 2;
    let m = CMatrix::from_fn(n, n, |r, c| {
        Complex64::new(
            0.5 * (z[(r, c)] + z[(r + n, c + n)]),
            0.5 * (z[(r + n, c)] - z[(r, c + n)]),
        )
    });
    Ok(hermitian_part(&m))
}

/// `‖Z J − J Z‖_F / (1 + ‖Z‖_F)` with `J = [[0, −1], [1, 0]]`.
fn structure_residual(z: &DMatrix<f64>) -> f64 {
    let n = z.nrows() / 2;
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            let d1 = z[(r, c)] - z[(r + n, c + n)];
            let d2 = z[(r, c + n)] + z[(r + n, c)];
            acc += 2.0 * (d1 * d1 + d2 * d2);
        }
    }
    acc.sqrt() / (1.0 + z.norm())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexConstraint {
    pub terms: Vec<(usize, HermSparse)>,
    pub rhs: f64,
}

impl ComplexConstraint {
    pub fn new(terms: Vec<(usize, HermSparse)>, rhs: f64) -> Self {
        Self { terms, rhs }
    }
}

/// `min Σ_b Tr(C_b X_b)` s.t. `Σ_b Tr(A_{m,b} X_b) = r_m`, `X_b ⪰ 0` over
/// complex Hermitian blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexProgram {
    blocks: Vec<usize>,
    objective: Vec<HermSparse>,
    constraints: Vec<ComplexConstraint>,
}

impl ComplexProgram {
    pub fn new(blocks: Vec<usize>) -> Self {
        let objective = blocks.iter().map(|&n| HermSparse::new(n)).collect();
        Self {
            blocks,
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn constraints(&self) -> &[ComplexConstraint] {
        &self.constraints
    }

    pub fn set_objective(&mut self, block: usize, c: HermSparse) {
        self.objective[block] = c;
    }

    pub fn add_constraint(&mut self, c: ComplexConstraint) {
        self.constraints.push(c);
    }

    pub fn embed(&self) -> ConicProgram {
        let mut p = ConicProgram::new(self.blocks.iter().map(|n| 2 * n).collect());
        for (b, c) in self.objective.iter().enumerate() {
            p.set_objective(b, c.embed_half());
        }
        for con in &self.constraints {
            let terms = con.terms.iter().map(|(b, a)| (*b, a.embed_half())).collect();
            p.add_constraint(Constraint::new(terms, con.rhs));
        }
        p
    }

    /// Solves the embedded program and maps the solution back.
    pub fn solve(&self, options: &SolverOptions) -> Result<ComplexSolution> {
        for (b, c) in self.objective.iter().enumerate() {
            if c.size() != self.blocks[b] {
                return Err(Error::InvalidProgram(format!("objective for block {b} has wrong size")));
            }
        }
        let raw = solve(&self.embed(), options)?;
        ComplexSolution::from_raw(raw, options.eps_feas)
    }
}

#[derive(Clone, Debug)]
pub struct ComplexSolution {
    pub status: SolveStatus,
    pub x: Vec<CMatrix>,
    pub y: Vec<f64>,
    /// Complex dual slacks `C_b − Σ_m y_m A_{m,b}`.
    pub s: Vec<CMatrix>,
    /// Largest `‖Z J − J Z‖ / (1 + ‖Z‖)` over primal blocks.
    pub structure_residual: f64,
    pub raw: ConicSolution,
}

impl ComplexSolution {
    fn from_raw(raw: ConicSolution, eps: f64) -> Result<Self> {
        let structure = raw.x.iter().map(structure_residual).fold(0.0, f64::max);
        if raw.status == SolveStatus::Optimal && structure > eps {
            return Err(Error::Solver {
                status: raw.status,
                primal: structure,
                dual: raw.dual_residual,
                gap: raw.gap,
            });
        }
        let x = raw.x.iter().map(recover_hermitian).collect::<Result<Vec<_>>>()?;
        let s = raw
            .s
            .iter()
            .map(|m| recover_hermitian(m).map(|c| c * Complex64::new(2.0, 0.0)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            status: raw.status,
            x,
            y: raw.y.clone(),
            s,
            structure_residual: structure,
            raw,
        })
    }

    pub fn primal_objective(&self) -> f64 {
        self.raw.primal_objective
    }

    pub fn dual_objective(&self) -> f64 {
        self.raw.dual_objective
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn require_optimal(self) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(self.raw.to_error())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::eigen::real_embedding;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let m = CMatrix::from_fn(n, n, |_, _| Complex64::new(next(), next()));
        hermitian_part(&m)
    }

    #[test]
    fn identity_round_trip() {
        let id = CMatrix::identity(3, 3);
        let back = recover_hermitian(&real_embedding(&id)).unwrap();
        assert_eq!(back, id);
        assert_eq!(structure_residual(&real_embedding(&id)), 0.0);
    }

    #[test]
    fn embedded_inner_product_matches_complex_trace() {
        for seed in 0..20 {
            let a = random_hermitian(4, seed);
            let b = random_hermitian(4, seed + 100);
            let complex = (&a * &b).trace().re;
            let sparse = HermSparse::from_dense(&a).unwrap();
            let embedded = sparse.embed_half().inner(&real_embedding(&b));
            assert!((complex - embedded).abs() < 1e-12, "{complex} vs {embedded}");
            assert!((sparse.inner(&b) - complex).abs() < 1e-12);
            let back = recover_hermitian(&real_embedding(&a)).unwrap();
            assert!((back - &a).norm() < 1e-15);
        }
    }

    #[test]
    fn basis_is_orthonormal() {
        let basis = hermitian_basis(3);
        assert_eq!(basis.len(), 9);
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let v = a.inner(&b.to_dense());
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn complex_minimum_eigenvalue() {
        // min Tr(C X) s.t. Tr X = 1 over complex X ⪰ 0 equals λ_min(C)
        let c = random_hermitian(4, 7);
        let mut p = ComplexProgram::new(vec![4]);
        p.set_objective(0, HermSparse::from_dense(&c).unwrap());
        p.add_constraint(ComplexConstraint::new(vec![(0, HermSparse::identity(4))], 1.0));
        let sol = p.solve(&SolverOptions::default()).unwrap();
        assert!(sol.is_optimal());
        let lmin = crate::operator::hermitian_eigenvalues(&c).unwrap()[0];
        assert!((sol.primal_objective() - lmin).abs() < 1e-6);
        assert!(sol.structure_residual < 1e-12);
        // complex slack C − y 𝟙
        let expected = &c - CMatrix::identity(4, 4) * Complex64::new(sol.y[0], 0.0);
        assert!((&sol.s[0] - expected).norm() < 1e-5);
    }
}
