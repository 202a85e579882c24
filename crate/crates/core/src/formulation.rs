//! Shared pieces for compiling operator equations into complex programs.

use num_complex::Complex64;

use crate::operator::{BipartiteOperator, CMatrix, SystemDims};
use crate::solver::{hermitian_basis, HermSparse};

/// Orthonormal Hermitian basis `B_k` of the operator space together with the
/// partial transposes `B_k^Γ`.
pub(crate) struct Basis {
    pub dims: SystemDims,
    pub plain: Vec<HermSparse>,
    pub transposed: Vec<HermSparse>,
}

impl Basis {
    pub fn new(dims: SystemDims) -> Self {
        let plain = hermitian_basis(dims.total());
        let transposed = plain.iter().map(|b| partial_transpose_sparse(dims, b)).collect();
        Self { dims, plain, transposed }
    }

    pub fn len(&self) -> usize {
        self.plain.len()
    }

    /// `Σ_k y_k B_k`.
    pub fn combine(&self, y: &[f64]) -> BipartiteOperator {
        let n = self.dims.total();
        let mut m = CMatrix::zeros(n, n);
        for (b, &yk) in self.plain.iter().zip(y) {
            for &(r, c, z) in b.entries() {
                m[(r, c)] += z * yk;
                if r != c {
                    m[(c, r)] += z.conj() * yk;
                }
            }
        }
        to_operator(self.dims, &m)
    }

    /// Coordinates `Tr(B_k A)`.
    pub fn coordinates(&self, a: &BipartiteOperator) -> Vec<f64> {
        self.plain.iter().map(|b| b.inner(a.matrix())).collect()
    }
}

/// `⟨i j|A^Γ|k l⟩ = ⟨i l|A|k j⟩` on sparse storage.
pub(crate) fn partial_transpose_sparse(dims: SystemDims, a: &HermSparse) -> HermSparse {
    let mut out = HermSparse::new(a.size());
    for &(r, c, z) in a.entries() {
        let (i, j) = dims.split(r);
        let (k, l) = dims.split(c);
        out.push(dims.index(i, l), dims.index(k, j), z);
    }
    out
}

#[allow(dead_code)]
pub(crate) fn to_sparse(a: &BipartiteOperator) -> HermSparse {
    let m = a.matrix();
    let mut out = HermSparse::new(m.nrows());
    for c in 0..m.ncols() {
        for r in 0..=c {
            let z = if r == c { Complex64::new(m[(r, r)].re, 0.0) } else { m[(r, c)] };
            out.push(r, c, z);
        }
    }
    out
}

/// Hermitian part of a recovered block as an operator.
pub(crate) fn to_operator(dims: SystemDims, m: &CMatrix) -> BipartiteOperator {
    BipartiteOperator::hermitize(dims, m).expect("block size matches dims")
}
