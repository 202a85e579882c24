//! Hermitian eigendecomposition through the real symmetric embedding
//! `[[Re A, -Im A], [Im A, Re A]]`.
//!
//! Each eigenvalue of `A` appears twice in the embedding. Eigenvalues are
//! deduplicated by taking every other entry of the sorted embedded spectrum.
//! Eigenvectors are recovered as `a + i b` from embedded vectors `(a; b)`;
//! the two embedded vectors of a pair map onto the same complex line, so a
//! pivoted complex Gram-Schmidt pass keeps exactly `n` of them.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use super::{BipartiteOperator, CMatrix, SystemDims, ZERO};
use crate::error::{Error, Result};

const MAX_SWEEPS_PER_ROW: usize = 1000;

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending.
pub(crate) fn real_symmetric_eigen(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigen("matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, MAX_SWEEPS_PER_ROW * n.max(1))
        .ok_or_else(|| Error::Eigen(format!("no convergence for {n}x{n} symmetric matrix")))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Real symmetric embedding of a complex square matrix.
pub(crate) fn real_embedding(a: &CMatrix) -> DMatrix<f64> {
    let n = a.nrows();
    let mut e = DMatrix::zeros(2 * n, 2 * n);
    for c in 0..n {
        for r in 0..n {
            let z = a[(r, c)];
            e[(r, c)] = z.re;
            e[(r + n, c + n)] = z.re;
            e[(r, c + n)] = -z.im;
            e[(r + n, c)] = z.im;
        }
    }
    e
}

/// Eigenvalues and orthonormal eigenvectors (columns), eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl Spectrum {
    /// `‖A − V Λ V†‖_F / max(‖A‖_F, 1e-300)`.
    pub fn reconstruction_residual(&self, a: &CMatrix) -> f64 {
        let rebuilt = self.rebuild(|x| x);
        let norm = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let diff = (a - rebuilt).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        diff / norm.max(1e-300)
    }

    fn rebuild(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.eigenvectors.nrows();
        let mut scaled = self.eigenvectors.clone();
        for (c, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            for r in 0..n {
                scaled[(r, c)] *= w;
            }
        }
        &scaled * self.eigenvectors.adjoint()
    }

    /// Spectral function `V f(Λ) V†` as a Hermitian operator.
    pub fn map_eigenvalues(&self, dims: SystemDims, f: impl Fn(f64) -> f64) -> BipartiteOperator {
        let m = self.rebuild(f);
        BipartiteOperator::from_hermitian_unchecked(dims, super::hermitian_part(&m))
    }

    /// Column `k` of the eigenvector matrix.
    pub fn vector(&self, k: usize) -> nalgebra::DVector<Complex64> {
        self.eigenvectors.column(k).into_owned()
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Result<Vec<f64>> {
    let (values, _) = real_symmetric_eigen(real_embedding(a))?;
    Ok(values.into_iter().step_by(2).collect())
}

/// Full eigendecomposition of a Hermitian matrix.
pub fn hermitian_eigen(a: &CMatrix) -> Result<Spectrum> {
    let n = a.nrows();
    let (_, vectors) = real_symmetric_eigen(real_embedding(a))?;

    let mut candidates: Vec<DVector<Complex64>> = (0..2 * n)
        .map(|c| DVector::from_fn(n, |r, _| Complex64::new(vectors[(r, c)], vectors[(r + n, c)])))
        .collect();
    let mut alive = vec![true; 2 * n];
    let mut accepted: Vec<DVector<Complex64>> = Vec::with_capacity(n);

    for _ in 0..n {
        let mut best = None;
        let mut best_norm = -1.0;
        for (k, v) in candidates.iter().enumerate() {
            if !alive[k] {
                continue;
            }
            let nrm = v.norm();
            // strict comparison keeps the lowest index among ties
            if nrm > best_norm + 1e-12 {
                best_norm = nrm;
                best = Some(k);
            }
        }
        let k = best.ok_or_else(|| Error::Eigen("eigenvector recovery ran out of candidates".into()))?;
        if best_norm < 0.5 {
            return Err(Error::Eigen(format!(
                "eigenvector recovery degenerate (best residual {best_norm:.3e})"
            )));
        }
        alive[k] = false;
        let q = candidates[k].unscale(best_norm);
        for (j, v) in candidates.iter_mut().enumerate() {
            if alive[j] {
                let overlap = q.dotc(v);
                v.axpy(-overlap, &q, Complex64::new(1.0, 0.0));
            }
        }
        accepted.push(q);
    }

    let mut pairs: Vec<(f64, DVector<Complex64>)> = accepted
        .into_iter()
        .map(|v| {
            let av = a * &v;
            (v.dotc(&av).re, v)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut eigenvectors = CMatrix::from_element(n, n, ZERO);
    let mut eigenvalues = Vec::with_capacity(n);
    for (c, (lam, v)) in pairs.into_iter().enumerate() {
        eigenvalues.push(lam);
        eigenvectors.set_column(c, &v);
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tolerances;
    use proptest::prelude::*;

    fn random_hermitian(n: usize, seed: &[f64]) -> CMatrix {
        let mut k = 0;
        let mut next = || {
            k += 1;
            seed[k % seed.len()] * ((k * 7919 % 13) as f64 - 6.0) / 6.0
        };
        let mut m = CMatrix::zeros(n, n);
        for r in 0..n {
            for c in r..n {
                let z = if r == c {
                    Complex64::new(next(), 0.0)
                } else {
                    Complex64::new(next(), next())
                };
                m[(r, c)] = z;
                m[(c, r)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn degenerate_spectrum_recovers_full_basis() {
        // identity on C^4: every eigenvalue four-fold degenerate in the embedding
        let a = CMatrix::identity(4, 4);
        let spec = hermitian_eigen(&a).unwrap();
        let gram = spec.eigenvectors.adjoint() * &spec.eigenvectors;
        assert!((gram - CMatrix::identity(4, 4)).norm() < 1e-12);
        assert!(spec.reconstruction_residual(&a) < tolerances::EIGEN);
    }

    #[test]
    fn complex_off_diagonal() {
        // [[0, -i], [i, 0]] has eigenvalues -1, 1
        let mut a = CMatrix::zeros(2, 2);
        a[(0, 1)] = Complex64::new(0.0, -1.0);
        a[(1, 0)] = Complex64::new(0.0, 1.0);
        let spec = hermitian_eigen(&a).unwrap();
        assert!((spec.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((spec.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!(spec.reconstruction_residual(&a) < tolerances::EIGEN);
    }

    #[test]
    fn rejects_nan() {
        let mut a = CMatrix::identity(2, 2);
        a[(0, 0)] = Complex64::new(f64::NAN, 0.0);
        assert!(hermitian_eigen(&a).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn reconstruction_within_tolerance(n in 1usize..10, seed in prop::collection::vec(-1.0f64..1.0, 5..40)) {
            let a = random_hermitian(n, &seed);
            let spec = hermitian_eigen(&a).unwrap();
            prop_assert!(spec.reconstruction_residual(&a) < tolerances::EIGEN.max(1e-10));
            let values = hermitian_eigenvalues(&a).unwrap();
            for (x, y) in values.iter().zip(&spec.eigenvalues) {
                prop_assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
            }
            let gram = spec.eigenvectors.adjoint() * &spec.eigenvectors;
            prop_assert!((gram - CMatrix::identity(n, n)).norm() < 1e-10);
        }
    }
}
