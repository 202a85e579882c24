//! Membership in PPT₊ = {E : E ⪰ 0, E^Γ ⪰ 0} and in its dual cone PPT₊*,
//! the decomposable operators `W = P + Q^Γ` with `P, Q ⪰ 0`.
//!
//! Decomposability is decided by the program
//! `max t` s.t. `P + Q^Γ + t 𝟙 = W`, `P, Q ⪰ 0`,
//! whose dual is `min Tr(W F)` over `F ∈ PPT₊` with `Tr F = 1`. `W` is
//! decomposable iff the optimum `t*` is nonnegative; when it is negative the
//! dual optimizer is a unit-trace separating `F`.

use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulation::{to_operator, Basis};
use crate::operator::{BipartiteOperator, CVector};
use crate::solver::{ComplexConstraint, ComplexProgram, HermSparse, SolveStatus, SolverOptions, SolverStats};
use crate::tolerances;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cone {
    PptPlus,
    PptPlusDual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Member,
    NonMember,
    /// The solver did not produce a certificate that survives re-verification.
    Unknown,
}

/// Which of the two PPT₊ tests failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsdTest {
    Operator,
    PartialTranspose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    None,
    /// `⟨v|A|v⟩ = eigenvalue < -τ_psd` for `A = E` or `A = E^Γ`.
    Violation {
        test: PsdTest,
        eigenvalue: f64,
        vector: Vec<[f64; 2]>,
    },
    /// `W = P + Q^Γ`.
    Decomposition { p: BipartiteOperator, q: BipartiteOperator },
    /// `F ∈ PPT₊`, `Tr F = 1`, `Tr(W F) = pairing < 0`.
    Separator { f: BipartiteOperator, pairing: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `‖P + Q^Γ − W‖_F / (1 + ‖W‖_F)` for decompositions.
    pub reconstruction: f64,
    /// Smallest eigenvalue among the certificate's PSD parts.
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeCertificate {
    pub cone: Cone,
    pub verdict: Verdict,
    pub witness: Witness,
    pub residuals: Residuals,
    /// Present when the verdict needed a solve.
    pub solver: Option<SolverStats>,
    /// Optimal `t` of the decomposability program, when solved.
    pub margin: Option<f64>,
}

impl ConeCertificate {
    pub fn is_member(&self) -> bool {
        self.verdict == Verdict::Member
    }

    pub fn decomposition(&self) -> Option<(&BipartiteOperator, &BipartiteOperator)> {
        match &self.witness {
            Witness::Decomposition { p, q } => Some((p, q)),
            _ => None,
        }
    }
}

fn vector_json(v: &CVector) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

/// PSD and PPT test at `τ_psd`.
pub fn check_ppt_plus(e: &BipartiteOperator) -> Result<ConeCertificate> {
    let et = e.partial_transpose();
    let mut worst = f64::INFINITY;
    for (test, a) in [(PsdTest::Operator, e), (PsdTest::PartialTranspose, &et)] {
        let spec = a.spectrum()?;
        let lmin = spec.eigenvalues[0];
        worst = worst.min(lmin);
        if lmin < -tolerances::PSD {
            return Ok(ConeCertificate {
                cone: Cone::PptPlus,
                verdict: Verdict::NonMember,
                witness: Witness::Violation {
                    test,
                    eigenvalue: lmin,
                    vector: vector_json(&spec.vector(0)),
                },
                residuals: Residuals {
                    reconstruction: 0.0,
                    min_eigenvalue: lmin,
                },
                solver: None,
                margin: None,
            });
        }
    }
    Ok(ConeCertificate {
        cone: Cone::PptPlus,
        verdict: Verdict::Member,
        witness: Witness::None,
        residuals: Residuals {
            reconstruction: 0.0,
            min_eigenvalue: worst,
        },
        solver: None,
        margin: None,
    })
}

/// Default solver accuracy for decomposability programs; one order tighter
/// than the certificate PSD tolerance so boundary cases verify.
pub fn decomposability_options() -> SolverOptions {
    SolverOptions::with_tolerances(1e-9, 1e-9)
}

/// Decides `W ∈ PPT₊*` with default options.
pub fn check_decomposable(w: &BipartiteOperator) -> Result<ConeCertificate> {
    check_decomposable_with(w, &decomposability_options())
}

pub fn check_decomposable_with(w: &BipartiteOperator, options: &SolverOptions) -> Result<ConeCertificate> {
    let dims = w.dims();
    if w.is_psd()? {
        let cert = decomposition_certificate(w, w.clone(), BipartiteOperator::zeros(dims), None, None)?;
        if cert.is_member() {
            return finish_member(w, cert);
        }
    }
    let wt = w.partial_transpose();
    if wt.is_psd()? {
        let cert = decomposition_certificate(w, BipartiteOperator::zeros(dims), wt, None, None)?;
        if cert.is_member() {
            return finish_member(w, cert);
        }
    }

    let cert = solve_decomposition(w, options)?;
    let converged = cert.solver.is_some_and(|s| s.status == SolveStatus::Optimal);
    if cert.verdict != Verdict::Unknown || !converged {
        return Ok(cert);
    }
    // boundary operators need a tighter solve before P or F verifies
    let tight = SolverOptions {
        eps_feas: options.eps_feas * 1e-2,
        eps_gap: options.eps_gap * 1e-2,
        ..options.clone()
    };
    solve_decomposition(w, &tight)
}

fn solve_decomposition(w: &BipartiteOperator, options: &SolverOptions) -> Result<ConeCertificate> {
    let dims = w.dims();
    let norm = w.frobenius_norm();
    let ws = w.scale(1.0 / norm);
    let d = dims.total();
    let c0 = ws.trace() / d as f64;
    let basis = Basis::new(dims);
    let rhs_op = &ws - &BipartiteOperator::identity(dims).scale(c0);
    let rhs = basis.coordinates(&rhs_op);

    // blocks: P, Q, s with s = c0 − t ≥ 0
    let mut program = ComplexProgram::new(vec![d, d, 1]);
    program.set_objective(2, HermSparse::identity(1));
    for k in 0..basis.len() {
        let mut terms = vec![(0, basis.plain[k].clone()), (1, basis.transposed[k].clone())];
        let tr = basis.plain[k].trace();
        if tr != 0.0 {
            let mut s = HermSparse::new(1);
            s.push(0, 0, Complex64::new(-tr, 0.0));
            terms.push((2, s));
        }
        program.add_constraint(ComplexConstraint::new(terms, rhs[k]));
    }
    let sol = program.solve(options)?;
    let stats = sol.raw.stats();
    if !sol.is_optimal() {
        return Ok(unknown(Some(stats), None));
    }
    let t = c0 - sol.x[2][(0, 0)].re;

    if t >= -tolerances::PSD {
        // absorb t into P and rebuild P exactly from Q
        let q = to_operator(dims, &sol.x[1]).clip_negative()?.scale(norm);
        let p = w - &q.partial_transpose();
        let cert = decomposition_certificate(w, p, q, Some(stats), Some(t * norm))?;
        if cert.is_member() {
            return finish_member(w, cert);
        }
        let p = to_operator(dims, &sol.x[0]).clip_negative()?;
        let p = (&p + &BipartiteOperator::identity(dims).scale(t.max(0.0))).scale(norm);
        let q = (w - &p).partial_transpose();
        let cert = decomposition_certificate(w, p, q, Some(stats), Some(t * norm))?;
        if cert.is_member() {
            return finish_member(w, cert);
        }
        return Ok(unknown(Some(stats), Some(t * norm)));
    }

    // F is the dual slack of the P block
    let f = to_operator(dims, &sol.s[0]).clip_negative()?;
    let tr = f.trace();
    if !(tr > 0.0) {
        return Ok(unknown(Some(stats), Some(t * norm)));
    }
    let f = f.scale(1.0 / tr);
    let cert = separator_certificate(w, f, Some(stats), Some(t * norm))?;
    Ok(cert)
}

fn unknown(stats: Option<SolverStats>, margin: Option<f64>) -> ConeCertificate {
    ConeCertificate {
        cone: Cone::PptPlusDual,
        verdict: Verdict::Unknown,
        witness: Witness::None,
        residuals: Residuals::default(),
        solver: stats,
        margin,
    }
}

fn finish_member(w: &BipartiteOperator, cert: ConeCertificate) -> Result<ConeCertificate> {
    if !assert_lemma1(w, &cert) {
        return Err(Error::TracePositivity { trace: w.trace() });
    }
    Ok(cert)
}

/// Verifies `(P, Q)` arithmetically; the verdict is `Member` only if the
/// decomposition invariants hold, `Unknown` otherwise.
pub fn decomposition_certificate(
    w: &BipartiteOperator,
    p: BipartiteOperator,
    q: BipartiteOperator,
    solver: Option<SolverStats>,
    margin: Option<f64>,
) -> Result<ConeCertificate> {
    let residuals = decomposition_residuals(w, &p, &q)?;
    let ok = residuals.reconstruction <= tolerances::CERT && residuals.min_eigenvalue >= -tolerances::PSD;
    Ok(ConeCertificate {
        cone: Cone::PptPlusDual,
        verdict: if ok { Verdict::Member } else { Verdict::Unknown },
        witness: Witness::Decomposition { p, q },
        residuals,
        solver,
        margin,
    })
}

fn decomposition_residuals(w: &BipartiteOperator, p: &BipartiteOperator, q: &BipartiteOperator) -> Result<Residuals> {
    if p.dims() != w.dims() || q.dims() != w.dims() {
        return Err(Error::Dimension("decomposition parts do not match the operator dims".into()));
    }
    let diff = &(p + &q.partial_transpose()) - w;
    Ok(Residuals {
        reconstruction: diff.frobenius_norm() / (1.0 + w.frobenius_norm()),
        min_eigenvalue: p.min_eigenvalue()?.min(q.min_eigenvalue()?),
    })
}

/// Verifies a separating `F` for `W`: `F, F^Γ ⪰ -τ_psd` and
/// `Tr(W F) ≤ -10 τ_psd ‖F‖_F`.
pub fn separator_certificate(
    w: &BipartiteOperator,
    f: BipartiteOperator,
    solver: Option<SolverStats>,
    margin: Option<f64>,
) -> Result<ConeCertificate> {
    let pairing = w.trace_inner(&f)?;
    let min_eigenvalue = f.min_eigenvalue()?.min(f.partial_transpose().min_eigenvalue()?);
    let ok = min_eigenvalue >= -tolerances::PSD && pairing <= -10.0 * tolerances::PSD * f.frobenius_norm();
    Ok(ConeCertificate {
        cone: Cone::PptPlusDual,
        verdict: if ok { Verdict::NonMember } else { Verdict::Unknown },
        witness: Witness::Separator { f, pairing },
        residuals: Residuals {
            reconstruction: 0.0,
            min_eigenvalue,
        },
        solver,
        margin,
    })
}

/// Re-checks a certificate against `a` without solving anything. Returns the
/// verdict the embedded witness supports (`Unknown` if it supports none).
pub fn reverify(a: &BipartiteOperator, cert: &ConeCertificate) -> Result<Verdict> {
    match (cert.cone, &cert.witness) {
        (Cone::PptPlus, _) => Ok(check_ppt_plus(a)?.verdict),
        (Cone::PptPlusDual, Witness::Decomposition { p, q }) => {
            Ok(decomposition_certificate(a, p.clone(), q.clone(), None, None)?.verdict)
        }
        (Cone::PptPlusDual, Witness::Separator { f, .. }) => {
            Ok(separator_certificate(a, f.clone(), None, None)?.verdict)
        }
        (Cone::PptPlusDual, _) => Ok(Verdict::Unknown),
    }
}

static LEMMA1_CHECKED: AtomicUsize = AtomicUsize::new(0);
static LEMMA1_VIOLATED: AtomicUsize = AtomicUsize::new(0);

/// Trace positivity of a certified decomposable operator: true iff `E` is
/// zero to `ε_cert` or `Tr E > 0`. Every call is counted in [`lemma1_audit`].
pub fn assert_lemma1(e: &BipartiteOperator, cert: &ConeCertificate) -> bool {
    debug_assert!(cert.cone == Cone::PptPlusDual && cert.is_member());
    let ok = e.frobenius_norm() <= tolerances::CERT || e.trace() > 0.0;
    LEMMA1_CHECKED.fetch_add(1, Ordering::Relaxed);
    if !ok {
        LEMMA1_VIOLATED.fetch_add(1, Ordering::Relaxed);
    }
    ok
}

/// `(checked, violated)` counts of trace-positivity checks in this process.
pub fn lemma1_audit() -> (usize, usize) {
    (LEMMA1_CHECKED.load(Ordering::Relaxed), LEMMA1_VIOLATED.load(Ordering::Relaxed))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    #[serde(rename = "PSD")]
    Psd,
    #[serde(rename = "DEW")]
    Dew,
    NonDecomposable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessClass {
    pub is_psd: bool,
    pub is_decomposable: bool,
    pub classification: Classification,
    pub min_eigenvalue: f64,
    pub certificate: ConeCertificate,
}

/// PSD / DEW / non-decomposable. `Error::Inconclusive` when decomposability
/// could not be certified either way.
pub fn classify_witness(w: &BipartiteOperator) -> Result<WitnessClass> {
    classify_witness_with(w, &decomposability_options())
}

pub fn classify_witness_with(w: &BipartiteOperator, options: &SolverOptions) -> Result<WitnessClass> {
    let min_eigenvalue = w.min_eigenvalue()?;
    let is_psd = min_eigenvalue >= -tolerances::PSD;
    let certificate = check_decomposable_with(w, options)?;
    let is_decomposable = match certificate.verdict {
        Verdict::Member => true,
        Verdict::NonMember => false,
        Verdict::Unknown => {
            return Err(Error::Inconclusive(format!(
                "decomposability undecided (margin {:?}, solver {:?})",
                certificate.margin,
                certificate.solver.map(|s| s.status)
            )))
        }
    };
    let classification = match (is_psd, is_decomposable) {
        (true, _) => Classification::Psd,
        (false, true) => Classification::Dew,
        (false, false) => Classification::NonDecomposable,
    };
    Ok(WitnessClass {
        is_psd,
        is_decomposable,
        classification,
        min_eigenvalue,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{state_family, Family, SystemDims};

    fn d2() -> SystemDims {
        SystemDims::square(2).unwrap()
    }

    #[test]
    fn ppt_plus_examples() {
        let dims = d2();
        assert!(check_ppt_plus(&BipartiteOperator::identity(dims)).unwrap().is_member());
        let phi = state_family(dims, Family::PhiPlus).unwrap();
        let cert = check_ppt_plus(&phi).unwrap();
        assert_eq!(cert.verdict, Verdict::NonMember);
        match cert.witness {
            Witness::Violation { test, eigenvalue, .. } => {
                assert_eq!(test, PsdTest::PartialTranspose);
                assert!((eigenvalue + 0.5).abs() < 1e-12);
            }
            other => panic!("unexpected witness {other:?}"),
        }
        let dims3 = SystemDims::square(3).unwrap();
        let pi = state_family(dims3, Family::Pi { l: 1, i: 0, j: 2 }).unwrap();
        assert!(check_ppt_plus(&pi).unwrap().is_member());
    }

    #[test]
    fn shortcut_decompositions() {
        let dims = d2();
        let psd = state_family(dims, Family::PhiPlus).unwrap();
        let cert = check_decomposable(&psd).unwrap();
        let (p, q) = cert.decomposition().unwrap();
        assert_eq!(p, &psd);
        assert_eq!(q, &BipartiteOperator::zeros(dims));

        let phim = state_family(dims, Family::PhiMinus).unwrap();
        let w = phim.partial_transpose();
        let cert = check_decomposable(&w).unwrap();
        let (p, q) = cert.decomposition().unwrap();
        assert_eq!(p, &BipartiteOperator::zeros(dims));
        assert_eq!(q, &phim);
    }

    #[test]
    fn hand_built_decomposable_instance() {
        // W = Ψ₊ + Ψ₋^Γ: neither W nor W^Γ is PSD, so the program must run
        let dims = d2();
        let w = &state_family(dims, Family::PsiPlus).unwrap()
            + &state_family(dims, Family::PsiMinus).unwrap().partial_transpose();
        assert!(!w.is_psd().unwrap());
        assert!(!w.partial_transpose().is_psd().unwrap());
        let cert = check_decomposable(&w).unwrap();
        assert_eq!(cert.verdict, Verdict::Member);
        assert!(cert.solver.is_some());
        assert_eq!(reverify(&w, &cert).unwrap(), Verdict::Member);
    }

    #[test]
    fn phi_plus_minus_quarter_identity_is_separated_by_product_state() {
        // Tr[(Φ₊ − 𝟙/4)|01⟩⟨01|] = −1/4 with |01⟩⟨01| ∈ PPT₊
        let dims = d2();
        let w = &state_family(dims, Family::PhiPlus).unwrap() - &BipartiteOperator::identity(dims).scale(0.25);
        let cert = check_decomposable(&w).unwrap();
        assert_eq!(cert.verdict, Verdict::NonMember);
        match &cert.witness {
            Witness::Separator { pairing, .. } => assert!((pairing + 0.25).abs() < 1e-6),
            other => panic!("unexpected witness {other:?}"),
        }
    }

    #[test]
    fn negative_trace_is_not_decomposable() {
        let dims = d2();
        let w = state_family(dims, Family::PhiPlus).unwrap().scale(-1.0);
        let cert = check_decomposable(&w).unwrap();
        assert_eq!(cert.verdict, Verdict::NonMember);
        match &cert.witness {
            Witness::Separator { f, pairing } => {
                assert!((f.trace() - 1.0).abs() < 1e-12);
                assert!(*pairing < 0.0);
            }
            other => panic!("unexpected witness {other:?}"),
        }
        assert_eq!(reverify(&w, &cert).unwrap(), Verdict::NonMember);
        let class = classify_witness(&w).unwrap();
        assert_eq!(class.classification, Classification::NonDecomposable);
    }

    #[test]
    fn trace_positivity_branches() {
        let dims = d2();
        let zero = BipartiteOperator::zeros(dims);
        let cert = check_decomposable(&zero).unwrap();
        assert!(assert_lemma1(&zero, &cert));
        let w = state_family(dims, Family::PhiMinus).unwrap().partial_transpose();
        let cert = check_decomposable(&w).unwrap();
        assert!(assert_lemma1(&w, &cert));
    }

    #[test]
    fn classification_of_identity_and_flip() {
        let dims = d2();
        assert_eq!(classify_witness(&BipartiteOperator::identity(dims)).unwrap().classification, Classification::Psd);
        let w = state_family(dims, Family::PhiMinus).unwrap().partial_transpose();
        let class = classify_witness(&w).unwrap();
        assert!(!class.is_psd);
        assert_eq!(class.classification, Classification::Dew);
        assert!((class.min_eigenvalue + 0.5).abs() < 1e-12);
    }
}
