#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use pptdisc::discrimination::Ensemble;
use pptdisc::operator::{BipartiteOperator, SystemDims};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(r: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| Complex64::new(r.sample(StandardNormal), r.sample(StandardNormal)))
}

/// `G G† / Tr(G G†)` with `G` a `D × rank` complex Gaussian matrix.
pub fn random_density(r: &mut impl Rng, dims: SystemDims, rank: usize) -> BipartiteOperator {
    let g = gaussian_matrix(r, dims.total(), rank);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    BipartiteOperator::hermitize(dims, &(m / Complex64::new(tr, 0.0))).unwrap()
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian(r: &mut impl Rng, dims: SystemDims) -> BipartiteOperator {
    let g = gaussian_matrix(r, dims.total(), dims.total());
    BipartiteOperator::hermitize(dims, &(&g + g.adjoint())).unwrap()
}

/// Priors from normalized uniform weights, states of random rank.
pub fn random_ensemble(r: &mut impl Rng, dims: SystemDims, n: usize) -> Ensemble {
    let weights: Vec<f64> = (0..n).map(|_| r.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut priors: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let drift = 1.0 - priors.iter().sum::<f64>();
    priors[0] += drift;
    let pairs = priors
        .into_iter()
        .map(|eta| {
            let rank = r.random_range(1..=dims.total());
            (eta, random_density(r, dims, rank))
        })
        .collect();
    Ensemble::from_pairs(dims, pairs).unwrap()
}

/// `½(1 + ‖η₀ρ₀ − η₁ρ₁‖₁)` from eigenvalues of the difference.
pub fn helstrom(e: &Ensemble) -> f64 {
    assert_eq!(e.len(), 2);
    let diff = &e.weighted(0) - &e.weighted(1);
    let m = diff.matrix();
    // independent path: nalgebra's complex Hermitian eigensolver
    let eig = nalgebra::linalg::SymmetricEigen::new(m.clone());
    let norm: f64 = eig.eigenvalues.iter().map(|x| x.abs()).sum();
    0.5 * (1.0 + norm)
}
