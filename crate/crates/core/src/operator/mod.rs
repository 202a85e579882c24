//! Dense Hermitian operators on `C^{d1} ⊗ C^{d2}`.
//!
//! Basis convention: the product basis vector `|i⟩ ⊗ |j⟩` has row index
//! `i * d2 + j` (second factor fastest). Every constructor, the partial
//! transpose and the JSON format use this single convention.

pub(crate) mod eigen;
mod families;

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances;

pub use eigen::{hermitian_eigen, hermitian_eigenvalues, Spectrum};
pub use families::{state_family, Family};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Local dimensions of a bipartite system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[usize; 2]", into = "[usize; 2]")]
pub struct SystemDims {
    d1: usize,
    d2: usize,
}

impl SystemDims {
    pub fn new(d1: usize, d2: usize) -> Result<Self> {
        if d1 < 2 || d2 < 2 {
            return Err(Error::Dimension(format!(
                "bipartite dimensions must be at least 2, got {d1}x{d2}"
            )));
        }
        Ok(Self { d1, d2 })
    }

    /// Two qudits of equal local dimension.
    pub fn square(d: usize) -> Result<Self> {
        Self::new(d, d)
    }

    pub fn d1(&self) -> usize {
        self.d1
    }

    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn total(&self) -> usize {
        self.d1 * self.d2
    }

    /// Row index of the product basis vector `|i⟩ ⊗ |j⟩`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.d1 && j < self.d2);
        i * self.d2 + j
    }

    /// Inverse of [`SystemDims::index`].
    pub fn split(&self, row: usize) -> (usize, usize) {
        (row / self.d2, row % self.d2)
    }
}

impl TryFrom<[usize; 2]> for SystemDims {
    type Error = Error;

    fn try_from(value: [usize; 2]) -> Result<Self> {
        Self::new(value[0], value[1])
    }
}

impl From<SystemDims> for [usize; 2] {
    fn from(dims: SystemDims) -> Self {
        [dims.d1, dims.d2]
    }
}

impl fmt::Display for SystemDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}⊗{}", self.d1, self.d2)
    }
}

/// Largest entry of `|A - A†|`.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for c in 0..n {
        for r in c..n {
            worst = worst.max((m[(r, c)] - m[(c, r)].conj()).norm());
        }
    }
    worst
}

/// `(A + A†) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// A Hermitian operator on a bipartite space.
///
/// Entries are stored exactly Hermitian: construction checks the input
/// against [`tolerances::HERMITIAN`] and then replaces it by its Hermitian
/// part.
///
/// JSON form: `{"dims":[d1,d2],"matrix":[[[re,im],...],...]}`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorJson", into = "OperatorJson")]
pub struct BipartiteOperator {
    dims: SystemDims,
    mat: CMatrix,
}

impl BipartiteOperator {
    pub fn from_matrix(dims: SystemDims, mat: CMatrix) -> Result<Self> {
        let n = dims.total();
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::Dimension(format!(
                "{}x{} matrix does not match dims {} (expected {n}x{n})",
                mat.nrows(),
                mat.ncols(),
                dims
            )));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("operator has non-finite entries".into()));
        }
        let deviation = hermiticity_deviation(&mat);
        let scale = 1.0f64.max(mat.iter().map(|z| z.norm()).fold(0.0, f64::max));
        if deviation > tolerances::HERMITIAN * scale {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self::from_hermitian_unchecked(dims, hermitian_part(&mat)))
    }

    /// Builds an operator from a real symmetric matrix.
    pub fn from_real(dims: SystemDims, mat: &DMatrix<f64>) -> Result<Self> {
        Self::from_matrix(dims, mat.map(|x| Complex64::new(x, 0.0)))
    }

    /// Skips validation. Callers guarantee shape and exact Hermiticity.
    pub(crate) fn from_hermitian_unchecked(dims: SystemDims, mat: CMatrix) -> Self {
        debug_assert_eq!(mat.nrows(), dims.total());
        Self { dims, mat }
    }

    /// Hermitian part of an arbitrary square matrix of the right size.
    pub fn hermitize(dims: SystemDims, mat: &CMatrix) -> Result<Self> {
        let n = dims.total();
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::Dimension(format!(
                "{}x{} matrix does not match dims {dims}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self::from_hermitian_unchecked(dims, hermitian_part(mat)))
    }

    pub fn zeros(dims: SystemDims) -> Self {
        let n = dims.total();
        Self::from_hermitian_unchecked(dims, CMatrix::zeros(n, n))
    }

    pub fn identity(dims: SystemDims) -> Self {
        let n = dims.total();
        Self::from_hermitian_unchecked(dims, CMatrix::identity(n, n))
    }

    /// `𝟙 / D`.
    pub fn maximally_mixed(dims: SystemDims) -> Self {
        Self::identity(dims) * (1.0 / dims.total() as f64)
    }

    /// `|v⟩⟨v|` (not normalized).
    pub fn projector(dims: SystemDims, v: &CVector) -> Result<Self> {
        if v.len() != dims.total() {
            return Err(Error::Dimension(format!(
                "vector of length {} does not match dims {dims}",
                v.len()
            )));
        }
        let m = v * v.adjoint();
        Ok(Self::from_hermitian_unchecked(dims, hermitian_part(&m)))
    }

    /// `|i j⟩⟨i j|` in the product basis.
    pub fn basis_projector(dims: SystemDims, i: usize, j: usize) -> Self {
        let mut out = Self::zeros(dims);
        let r = dims.index(i, j);
        out.mat[(r, r)] = ONE;
        out
    }

    pub fn dims(&self) -> SystemDims {
        self.dims
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest absolute entry difference; useful for exact-identity checks.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dims, other.dims, "dims mismatch");
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Partial transpose on the second factor:
    /// `⟨i j|A^Γ|k l⟩ = ⟨i l|A|k j⟩`.
    pub fn partial_transpose(&self) -> Self {
        let d = self.dims;
        let n = d.total();
        let mut out = CMatrix::zeros(n, n);
        for i in 0..d.d1 {
            for j in 0..d.d2 {
                let row = d.index(i, j);
                for k in 0..d.d1 {
                    for l in 0..d.d2 {
                        out[(row, d.index(k, l))] = self.mat[(d.index(i, l), d.index(k, j))];
                    }
                }
            }
        }
        Self::from_hermitian_unchecked(d, out)
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        hermitian_eigen(&self.mat)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.mat)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(*self.eigenvalues()?.last().expect("nonempty spectrum"))
    }

    /// `min_eigenvalue >= -tolerances::PSD`.
    pub fn is_psd(&self) -> Result<bool> {
        Ok(self.min_eigenvalue()? >= -tolerances::PSD)
    }

    /// Sum of absolute eigenvalues.
    pub fn trace_norm(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().map(|x| x.abs()).sum())
    }

    /// Replaces eigenvalues below zero by zero.
    pub fn clip_negative(&self) -> Result<Self> {
        let spec = self.spectrum()?;
        Ok(spec.map_eigenvalues(self.dims, |x| x.max(0.0)))
    }

    /// `Tr(AB)`.
    pub fn trace_inner(&self, other: &Self) -> Result<f64> {
        trace_inner(self, other)
    }

    /// `(A B + B A) / 2`, the Hermitian part of the product.
    pub fn jordan_product(&self, other: &Self) -> Self {
        assert_eq!(self.dims, other.dims, "dims mismatch");
        let ab = &self.mat * &other.mat;
        Self::from_hermitian_unchecked(self.dims, hermitian_part(&ab))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_hermitian_unchecked(self.dims, self.mat.scale(factor))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorJson {
    dims: SystemDims,
    matrix: Vec<Vec<[f64; 2]>>,
}

impl TryFrom<OperatorJson> for BipartiteOperator {
    type Error = Error;

    fn try_from(j: OperatorJson) -> Result<Self> {
        let n = j.dims.total();
        if j.matrix.len() != n {
            return Err(Error::Schema(format!("matrix has {} rows, dims {} need {n}", j.matrix.len(), j.dims)));
        }
        if let Some(r) = j.matrix.iter().position(|row| row.len() != n) {
            return Err(Error::Schema(format!("matrix row {r} has {} entries, expected {n}", j.matrix[r].len())));
        }
        let mat = CMatrix::from_fn(n, n, |r, c| Complex64::new(j.matrix[r][c][0], j.matrix[r][c][1]));
        Self::from_matrix(j.dims, mat)
    }
}

impl From<BipartiteOperator> for OperatorJson {
    fn from(a: BipartiteOperator) -> Self {
        let n = a.dims.total();
        let matrix = (0..n)
            .map(|r| (0..n).map(|c| [a.mat[(r, c)].re, a.mat[(r, c)].im]).collect())
            .collect();
        Self { dims: a.dims, matrix }
    }
}

/// `Tr(AB)` for Hermitian `A`, `B` of equal dims.
pub fn trace_inner(a: &BipartiteOperator, b: &BipartiteOperator) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::Dimension(format!(
            "trace inner product of {} and {} operators",
            a.dims, b.dims
        )));
    }
    // Tr(AB) = Σ_rc A_rc B_cr = Σ_rc A_rc conj(B_rc) for Hermitian B.
    let z: Complex64 = a
        .mat
        .iter()
        .zip(b.mat.iter())
        .map(|(x, y)| x * y.conj())
        .sum();
    debug_assert!(z.im.abs() <= tolerances::HERMITIAN * (1.0 + a.frobenius_norm() * b.frobenius_norm()));
    Ok(z.re)
}

/// Kronecker product `X ⊗ Y` of Hermitian local operators.
pub fn tensor(x: &CMatrix, y: &CMatrix) -> Result<BipartiteOperator> {
    if !x.is_square() || !y.is_square() {
        return Err(Error::Dimension("tensor factors must be square".into()));
    }
    for (name, m) in [("first", x), ("second", y)] {
        let dev = hermiticity_deviation(m);
        if dev > tolerances::HERMITIAN {
            return Err(Error::InvalidArgument(format!(
                "{name} tensor factor is not Hermitian (deviation {dev:.3e})"
            )));
        }
    }
    let dims = SystemDims::new(x.nrows(), y.nrows())?;
    BipartiteOperator::from_matrix(dims, x.kronecker(y))
}

/// Local rank-one projector `|i⟩⟨i|` on `C^d`.
pub fn local_projector(d: usize, i: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(i, i)] = ONE;
    m
}

impl Add for &BipartiteOperator {
    type Output = BipartiteOperator;

    fn add(self, rhs: Self) -> BipartiteOperator {
        assert_eq!(self.dims, rhs.dims, "dims mismatch");
        BipartiteOperator::from_hermitian_unchecked(self.dims, &self.mat + &rhs.mat)
    }
}

impl Add for BipartiteOperator {
    type Output = BipartiteOperator;

    fn add(self, rhs: Self) -> BipartiteOperator {
        &self + &rhs
    }
}

impl AddAssign<&BipartiteOperator> for BipartiteOperator {
    fn add_assign(&mut self, rhs: &BipartiteOperator) {
        assert_eq!(self.dims, rhs.dims, "dims mismatch");
        self.mat += &rhs.mat;
    }
}

impl Sub for &BipartiteOperator {
    type Output = BipartiteOperator;

    fn sub(self, rhs: Self) -> BipartiteOperator {
        assert_eq!(self.dims, rhs.dims, "dims mismatch");
        BipartiteOperator::from_hermitian_unchecked(self.dims, &self.mat - &rhs.mat)
    }
}

impl Sub for BipartiteOperator {
    type Output = BipartiteOperator;

    fn sub(self, rhs: Self) -> BipartiteOperator {
        &self - &rhs
    }
}

impl Mul<f64> for &BipartiteOperator {
    type Output = BipartiteOperator;

    fn mul(self, rhs: f64) -> BipartiteOperator {
        self.scale(rhs)
    }
}

impl Mul<f64> for BipartiteOperator {
    type Output = BipartiteOperator;

    fn mul(self, rhs: f64) -> BipartiteOperator {
        self.scale(rhs)
    }
}

impl Neg for &BipartiteOperator {
    type Output = BipartiteOperator;

    fn neg(self) -> BipartiteOperator {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn bell_phi_plus() -> BipartiteOperator {
        state_family(SystemDims::square(2).unwrap(), Family::PhiPlus).unwrap()
    }

    #[test]
    fn rejects_small_dims() {
        assert!(SystemDims::new(1, 3).is_err());
        assert!(SystemDims::new(2, 3).is_ok());
    }

    #[test]
    fn index_round_trip() {
        let dims = SystemDims::new(2, 3).unwrap();
        for r in 0..dims.total() {
            let (i, j) = dims.split(r);
            assert_eq!(dims.index(i, j), r);
        }
        // second factor fastest
        assert_eq!(dims.index(1, 0), 3);
        let ket = |d: usize, i: usize| {
            let mut v = CVector::zeros(d);
            v[i] = ONE;
            v
        };
        let prod = ket(2, 1).kronecker(&ket(3, 2));
        assert_eq!(prod[dims.index(1, 2)], ONE);
    }

    #[test]
    fn rejects_non_hermitian() {
        let dims = SystemDims::square(2).unwrap();
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(
            BipartiteOperator::from_matrix(dims, m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn rejects_wrong_shape() {
        let dims = SystemDims::square(2).unwrap();
        assert!(matches!(
            BipartiteOperator::from_matrix(dims, CMatrix::identity(5, 5)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn identity_and_zero_spectra() {
        let dims = SystemDims::square(2).unwrap();
        assert_abs_diff_eq!(BipartiteOperator::identity(dims).min_eigenvalue().unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(BipartiteOperator::zeros(dims).min_eigenvalue().unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn bell_partial_transpose_spectrum() {
        // |Φ+⟩⟨Φ+|^Γ = SWAP / 2, eigenvalues {-1/2, 1/2, 1/2, 1/2}.
        let pt = bell_phi_plus().partial_transpose();
        let ev = pt.eigenvalues().unwrap();
        assert_abs_diff_eq!(ev[0], -0.5, epsilon = 1e-12);
        for x in &ev[1..] {
            assert_abs_diff_eq!(*x, 0.5, epsilon = 1e-12);
        }
        let mut swap = CMatrix::zeros(4, 4);
        for (r, col) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            swap[(r, col)] = c(0.5, 0.0);
        }
        assert!(pt.matrix().iter().zip(swap.iter()).all(|(a, b)| a == b));
    }

    #[test]
    fn product_partial_transpose_transposes_second_factor() {
        let x = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.3, -0.2), c(0.3, 0.2), c(-0.5, 0.0)]);
        let y = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(2.0, 0.0),
                c(0.1, 0.4),
                c(0.0, -1.0),
                c(0.1, -0.4),
                c(0.0, 0.0),
                c(0.7, 0.2),
                c(0.0, 1.0),
                c(0.7, -0.2),
                c(-1.0, 0.0),
            ],
        );
        let pt = tensor(&x, &y).unwrap().partial_transpose();
        let expected = tensor(&x, &y.transpose()).unwrap();
        assert!(pt.max_abs_diff(&expected) == 0.0);
    }

    #[test]
    fn trace_inner_examples() {
        let dims = SystemDims::square(2).unwrap();
        let rho = BipartiteOperator::maximally_mixed(dims);
        assert_abs_diff_eq!(
            trace_inner(&BipartiteOperator::identity(dims), &rho).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let p00 = BipartiteOperator::basis_projector(dims, 0, 0);
        let p11 = BipartiteOperator::basis_projector(dims, 1, 1);
        assert_eq!(trace_inner(&p00, &p11).unwrap(), 0.0);
        let other = SystemDims::new(2, 3).unwrap();
        assert!(trace_inner(&p00, &BipartiteOperator::zeros(other)).is_err());
    }

    #[test]
    fn tensor_of_identities_and_projectors() {
        let id = tensor(&CMatrix::identity(2, 2), &CMatrix::identity(3, 3)).unwrap();
        assert_eq!(id, BipartiteOperator::identity(SystemDims::new(2, 3).unwrap()));
        let rho1 = tensor(&local_projector(2, 0), &local_projector(2, 0)).unwrap();
        assert_eq!(rho1, BipartiteOperator::basis_projector(SystemDims::square(2).unwrap(), 0, 0));
        assert!(tensor(&CMatrix::zeros(2, 3), &CMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn trace_norm_of_difference_of_orthogonal_states() {
        let dims = SystemDims::square(2).unwrap();
        let d = &BipartiteOperator::basis_projector(dims, 0, 0) - &BipartiteOperator::basis_projector(dims, 1, 1);
        assert_abs_diff_eq!(d.trace_norm().unwrap(), 2.0, epsilon = 1e-12);
    }
}
