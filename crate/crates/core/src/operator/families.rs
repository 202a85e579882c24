//! Named two-qudit operators used by the example ensembles.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{BipartiteOperator, CVector, SystemDims, ONE, ZERO};
use crate::error::{Error, Result};

/// Operator families on `C^d ⊗ C^d`, indexed by a pair `i < j` where relevant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Bell-type projectors: `k = 1, 2` on `|ii⟩ ± |jj⟩`, `k = 3, 4` on `|ij⟩ ± |ji⟩`.
    Psi { k: u8, i: usize, j: usize },
    /// `l = 1`: `|ii⟩⟨ii| + |jj⟩⟨jj|`; `l = 2`: `|ij⟩⟨ij| + |ji⟩⟨ji|`.
    Pi { l: u8, i: usize, j: usize },
    /// Complement of `Pi { l }` within the diagonal (`l = 1`) or off-diagonal
    /// (`l = 2`) product states.
    PiHat { l: u8, i: usize, j: usize },
    /// `(|i⟩⟨i| + |j⟩⟨j|) ⊗ (|i⟩⟨i| + |j⟩⟨j|)`.
    IdentityPair { i: usize, j: usize },
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

fn ket(dims: SystemDims, terms: &[(usize, usize, f64)]) -> CVector {
    let mut v = CVector::from_element(dims.total(), ZERO);
    for &(a, b, amp) in terms {
        v[dims.index(a, b)] += Complex64::new(amp, 0.0);
    }
    v
}

fn check_pair(d: usize, i: usize, j: usize) -> Result<()> {
    if i >= j {
        return Err(Error::InvalidArgument(format!("pair indices must satisfy i < j, got ({i}, {j})")));
    }
    if j >= d {
        return Err(Error::InvalidArgument(format!("index {j} out of range for local dimension {d}")));
    }
    Ok(())
}

fn sum_of_basis(dims: SystemDims, states: impl IntoIterator<Item = (usize, usize)>) -> BipartiteOperator {
    let mut out = BipartiteOperator::zeros(dims);
    for (a, b) in states {
        let r = dims.index(a, b);
        out.mat[(r, r)] += ONE;
    }
    out
}

/// Builds the named operator. Requires `d1 == d2`; the Bell projectors
/// additionally require `d = 2`.
pub fn state_family(dims: SystemDims, family: Family) -> Result<BipartiteOperator> {
    if dims.d1() != dims.d2() {
        return Err(Error::Dimension(format!("named families need equal local dimensions, got {dims}")));
    }
    let d = dims.d1();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match family {
        Family::Psi { k, i, j } => {
            check_pair(d, i, j)?;
            let v = match k {
                1 => ket(dims, &[(i, i, h), (j, j, h)]),
                2 => ket(dims, &[(i, i, h), (j, j, -h)]),
                3 => ket(dims, &[(i, j, h), (j, i, h)]),
                4 => ket(dims, &[(i, j, h), (j, i, -h)]),
                _ => return Err(Error::InvalidArgument(format!("Psi index k must be 1..=4, got {k}"))),
            };
            projector_exact(dims, &v)
        }
        Family::Pi { l, i, j } => {
            check_pair(d, i, j)?;
            match l {
                1 => Ok(sum_of_basis(dims, [(i, i), (j, j)])),
                2 => Ok(sum_of_basis(dims, [(i, j), (j, i)])),
                _ => Err(Error::InvalidArgument(format!("Pi index l must be 1 or 2, got {l}"))),
            }
        }
        Family::PiHat { l, i, j } => {
            check_pair(d, i, j)?;
            match l {
                1 => Ok(sum_of_basis(dims, (0..d).filter(|&a| a != i && a != j).map(|a| (a, a)))),
                2 => Ok(sum_of_basis(
                    dims,
                    (0..d)
                        .flat_map(|a| (0..d).map(move |b| (a, b)))
                        .filter(|&(a, b)| a != b && !((a, b) == (i, j) || (a, b) == (j, i))),
                )),
                _ => Err(Error::InvalidArgument(format!("PiHat index l must be 1 or 2, got {l}"))),
            }
        }
        Family::IdentityPair { i, j } => {
            check_pair(d, i, j)?;
            Ok(sum_of_basis(dims, [(i, i), (i, j), (j, i), (j, j)]))
        }
        Family::PhiPlus | Family::PhiMinus | Family::PsiPlus | Family::PsiMinus => {
            if d != 2 {
                return Err(Error::InvalidArgument(format!("{family:?} is defined on 2⊗2 only")));
            }
            let v = match family {
                Family::PhiPlus => ket(dims, &[(0, 0, h), (1, 1, h)]),
                Family::PhiMinus => ket(dims, &[(0, 0, h), (1, 1, -h)]),
                Family::PsiPlus => ket(dims, &[(0, 1, h), (1, 0, h)]),
                _ => ket(dims, &[(0, 1, h), (1, 0, -h)]),
            };
            projector_exact(dims, &v)
        }
    }
}

/// `|v⟩⟨v|` for vectors with entries in `{0, ±1/√2}`, with products snapped
/// to exactly `±1/2` so that identities between these projectors hold bitwise.
fn projector_exact(dims: SystemDims, v: &CVector) -> Result<BipartiteOperator> {
    let mut p = BipartiteOperator::projector(dims, v)?;
    for z in p.mat.iter_mut() {
        if (z.re.abs() - 0.5).abs() < 1e-15 {
            z.re = 0.5 * z.re.signum();
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tolerances;

    fn pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..d).flat_map(move |i| ((i + 1)..d).map(move |j| (i, j)))
    }

    #[test]
    fn psi_are_unit_trace_projectors() {
        for d in 2..=4 {
            let dims = SystemDims::square(d).unwrap();
            for (i, j) in pairs(d) {
                for k in 1..=4 {
                    let p = state_family(dims, Family::Psi { k, i, j }).unwrap();
                    assert_eq!(p.trace(), 1.0);
                    assert!(p.min_eigenvalue().unwrap() >= -tolerances::PSD);
                    let sq = p.matrix() * p.matrix();
                    assert!((sq - p.matrix()).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn half_identity_pair_minus_psi_is_partial_transpose_of_partner() {
        for d in 2..=4 {
            let dims = SystemDims::square(d).unwrap();
            for (i, j) in pairs(d) {
                let id = state_family(dims, Family::IdentityPair { i, j }).unwrap();
                for k in 1..=4u8 {
                    let lhs = &(&id * 0.5) - &state_family(dims, Family::Psi { k, i, j }).unwrap();
                    let rhs = state_family(dims, Family::Psi { k: 5 - k, i, j }).unwrap().partial_transpose();
                    assert_eq!(lhs.max_abs_diff(&rhs), 0.0, "d={d} ({i},{j}) k={k}");
                }
            }
        }
    }

    #[test]
    fn pi_hat_complements() {
        let dims = SystemDims::square(2).unwrap();
        let hat = state_family(dims, Family::PiHat { l: 1, i: 0, j: 1 }).unwrap();
        assert_eq!(hat, BipartiteOperator::zeros(dims));

        let dims = SystemDims::square(3).unwrap();
        for (i, j) in pairs(3) {
            let mut total = BipartiteOperator::zeros(dims);
            for l in 1..=2 {
                total += &state_family(dims, Family::Pi { l, i, j }).unwrap();
                total += &state_family(dims, Family::PiHat { l, i, j }).unwrap();
            }
            assert_eq!(total, BipartiteOperator::identity(dims));
        }
    }

    #[test]
    fn bell_projectors_orthogonal() {
        let dims = SystemDims::square(2).unwrap();
        let fams = [Family::PhiPlus, Family::PhiMinus, Family::PsiPlus, Family::PsiMinus];
        let ops: Vec<_> = fams.iter().map(|&f| state_family(dims, f).unwrap()).collect();
        for a in 0..4 {
            for b in 0..4 {
                let t = ops[a].trace_inner(&ops[b]).unwrap();
                assert!((t - if a == b { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        let sum = ops.iter().fold(BipartiteOperator::zeros(dims), |acc, o| &acc + o);
        assert!(sum.max_abs_diff(&BipartiteOperator::identity(dims)) < 1e-15);
    }

    #[test]
    fn invalid_arguments() {
        let dims = SystemDims::square(3).unwrap();
        assert!(state_family(dims, Family::Psi { k: 1, i: 1, j: 1 }).is_err());
        assert!(state_family(dims, Family::Psi { k: 1, i: 0, j: 3 }).is_err());
        assert!(state_family(dims, Family::Psi { k: 5, i: 0, j: 1 }).is_err());
        assert!(state_family(dims, Family::PhiPlus).is_err());
        assert!(state_family(SystemDims::new(2, 3).unwrap(), Family::Pi { l: 1, i: 0, j: 1 }).is_err());
    }
}
