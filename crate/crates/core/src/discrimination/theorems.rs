//! Certificates linking optimal values, dual operators and witnesses.

use serde::{Deserialize, Serialize};

use super::programs::{
    discrimination_options, dual_qppt_with, optimal_global_with, optimal_ppt_with, psd_restricted_dual_with,
};
use super::types::{DiscriminationResult, EqualityVerdict, Evidence, Ensemble, Measurement, Outcome};
use crate::cone::{self, Classification, ConeCertificate, Verdict, WitnessClass};
use crate::error::{Error, Result};
use crate::operator::{BipartiteOperator, CMatrix};
use crate::solver::SolverOptions;
use crate::tolerances;

fn check_pivot(e: &Ensemble, pivot: usize) -> Result<()> {
    if pivot >= e.len() {
        return Err(Error::InvalidArgument(format!("pivot {pivot} out of range for {} items", e.len())));
    }
    Ok(())
}

fn check_measurement(e: &Ensemble, m: &Measurement) -> Result<()> {
    if m.dims() != e.dims() || m.len() != e.len() {
        return Err(Error::Precondition(format!(
            "measurement ({} elements on {}) does not match ensemble ({} items on {})",
            m.len(),
            m.dims(),
            e.len(),
            e.dims()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointOptimality {
    /// `r_i = Tr[M_i (H − η_i ρ_i)]`.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Decomposability certificate of each `H − η_i ρ_i`.
    pub certificates: Vec<ConeCertificate>,
    /// One message per failed precondition, naming the item.
    pub precondition_failures: Vec<String>,
    /// Preconditions hold and `max_i |r_i| ≤ ε_cert`.
    pub optimal_pair: bool,
}

/// Complementary slackness for a PPT measurement `M` and a dual `H` whose
/// differences `H − η_i ρ_i` are decomposable. When it passes, `M` attains
/// `p_PPT` and `H` attains `q_PPT`.
pub fn verify_joint_optimality(e: &Ensemble, m: &Measurement, h: &BipartiteOperator) -> Result<JointOptimality> {
    verify_joint_optimality_with(e, m, h, None)
}

/// As [`verify_joint_optimality`], reusing supplied certificates for
/// `H − η_i ρ_i` where they re-verify arithmetically. The rest are solved.
pub fn verify_joint_optimality_with(
    e: &Ensemble,
    m: &Measurement,
    h: &BipartiteOperator,
    supplied: Option<&[ConeCertificate]>,
) -> Result<JointOptimality> {
    check_measurement(e, m)?;
    if h.dims() != e.dims() {
        return Err(Error::Dimension(format!("H has dims {}, ensemble has {}", h.dims(), e.dims())));
    }
    let mut failures = Vec::new();
    for (i, mi) in m.elements().iter().enumerate() {
        let lmin = mi.partial_transpose().min_eigenvalue()?;
        if lmin < -tolerances::PSD {
            failures.push(format!("M_{i} is not PPT (partial transpose eigenvalue {lmin:.3e})"));
        }
    }
    let mut certificates = Vec::with_capacity(e.len());
    let mut residuals = Vec::with_capacity(e.len());
    for (i, mi) in m.elements().iter().enumerate() {
        let w = h - &e.weighted(i);
        let reusable = match supplied.and_then(|c| c.get(i)) {
            Some(c) if cone::reverify(&w, c)? == Verdict::Member => Some(c.clone()),
            _ => None,
        };
        let cert = match reusable {
            Some(c) => c,
            None => cone::check_decomposable(&w)?,
        };
        match cert.verdict {
            Verdict::Member => {}
            Verdict::NonMember => failures.push(format!("H − η_{i} ρ_{i} is not decomposable")),
            Verdict::Unknown => failures.push(format!("decomposability of H − η_{i} ρ_{i} undecided")),
        }
        certificates.push(cert);
        residuals.push(mi.trace_inner(&w)?);
    }
    let max_residual = residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    Ok(JointOptimality {
        optimal_pair: failures.is_empty() && max_residual <= tolerances::CERT,
        residuals,
        max_residual,
        certificates,
        precondition_failures: failures,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corollary1 {
    pub pivot: usize,
    /// Every `η_p ρ_p − η_i ρ_i` (`i ≠ p`) is certified decomposable.
    pub holds: bool,
    /// `η_p`, which equals `p_PPT` when `holds`.
    pub value: f64,
    /// `(i, certificate)` for each `i ≠ p`.
    pub certificates: Vec<(usize, ConeCertificate)>,
}

/// Decomposability of every difference against the pivot. Undecided
/// certificates are errors.
pub fn corollary1_check(e: &Ensemble, pivot: usize) -> Result<Corollary1> {
    corollary1_check_with(e, pivot, &cone::decomposability_options())
}

/// As [`corollary1_check`] with explicit decomposability solver options.
pub fn corollary1_check_with(e: &Ensemble, pivot: usize, options: &SolverOptions) -> Result<Corollary1> {
    check_pivot(e, pivot)?;
    let wp = e.weighted(pivot);
    let mut holds = true;
    let mut certificates = Vec::new();
    for i in (0..e.len()).filter(|&i| i != pivot) {
        let w = &wp - &e.weighted(i);
        let cert = cone::check_decomposable_with(&w, options)?;
        match cert.verdict {
            Verdict::Member => {}
            Verdict::NonMember => holds = false,
            Verdict::Unknown => {
                return Err(Error::Inconclusive(format!(
                    "decomposability of η_{pivot} ρ_{pivot} − η_{i} ρ_{i} undecided"
                )))
            }
        }
        certificates.push((i, cert));
    }
    Ok(Corollary1 {
        pivot,
        holds,
        value: if holds { e.eta(pivot) } else { f64::NAN },
        certificates,
    })
}

/// Under the pivot condition, `p_PPT = p_G` iff no difference
/// `η_p ρ_p − η_i ρ_i` is a DEW, i.e. iff all of them are PSD. The margin is
/// the largest negative eigenvalue magnitude among the differences.
pub fn corollary2_classify(e: &Ensemble, pivot: usize) -> Result<EqualityVerdict> {
    corollary2_classify_with(e, pivot, &cone::decomposability_options())
}

pub fn corollary2_classify_with(e: &Ensemble, pivot: usize, options: &SolverOptions) -> Result<EqualityVerdict> {
    let c1 = corollary1_check_with(e, pivot, options)?;
    if !c1.holds {
        return Err(Error::Precondition(format!(
            "not every η_{pivot} ρ_{pivot} − η_i ρ_i is decomposable"
        )));
    }
    let wp = e.weighted(pivot);
    let mut worst = 0.0f64;
    let mut worst_index = None;
    for i in (0..e.len()).filter(|&i| i != pivot) {
        let lmin = (&wp - &e.weighted(i)).min_eigenvalue()?;
        if -lmin > worst {
            worst = -lmin;
            worst_index = Some(i);
        }
    }
    if worst <= tolerances::PSD {
        return Ok(EqualityVerdict {
            p_ppt: c1.value,
            p_g: Some(c1.value),
            outcome: Outcome::Equal,
            equal: true,
            margin: worst,
            evidence: Evidence::NoDewDualFound,
        });
    }
    // decomposable and not PSD: a DEW, so p_PPT < p_G
    Ok(EqualityVerdict {
        p_ppt: c1.value,
        p_g: None,
        outcome: Outcome::NotEqual,
        equal: false,
        margin: worst,
        evidence: Evidence::DewObstruction {
            index: worst_index.expect("nonzero margin has an index"),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem3 {
    /// Every `H − η_i ρ_i` is decomposable and at least one is a DEW.
    pub condition_holds: bool,
    /// `Σ η_i Tr(ρ_i M_i)`, reported only when the condition holds.
    pub p_ppt: Option<f64>,
    pub dew_indices: Vec<usize>,
    pub classes: Vec<WitnessClass>,
    /// `‖S − S†‖_F / 2` for `S = Σ η_i ρ_i M_i`.
    pub hermitization_residual: f64,
    pub h: BipartiteOperator,
}

/// Forms `H = Herm(Σ η_i ρ_i M_i)` for a PPT measurement and classifies each
/// `H − η_i ρ_i`. When the condition holds, `M` is PPT-optimal and
/// `p_PPT < p_G`.
pub fn theorem3_witness_check(e: &Ensemble, m: &Measurement) -> Result<Theorem3> {
    theorem3_witness_check_with(e, m, &cone::decomposability_options())
}

pub fn theorem3_witness_check_with(e: &Ensemble, m: &Measurement, options: &SolverOptions) -> Result<Theorem3> {
    check_measurement(e, m)?;
    let lmin = m.min_pt_eigenvalue()?;
    if lmin < -tolerances::PSD {
        return Err(Error::Precondition(format!("measurement is not PPT (partial transpose eigenvalue {lmin:.3e})")));
    }
    let dims = e.dims();
    let mut s = CMatrix::zeros(dims.total(), dims.total());
    for (i, mi) in m.elements().iter().enumerate() {
        s += e.weighted(i).matrix() * mi.matrix();
    }
    let asym = (&s - s.adjoint()).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / 2.0;
    if asym > tolerances::CERT {
        return Err(Error::Precondition(format!("Σ η_i ρ_i M_i is not Hermitian (residual {asym:.3e})")));
    }
    let h = BipartiteOperator::hermitize(dims, &s)?;
    let mut classes = Vec::with_capacity(e.len());
    let mut dew_indices = Vec::new();
    let mut all_decomposable = true;
    for i in 0..e.len() {
        let class = cone::classify_witness_with(&(&h - &e.weighted(i)), options)?;
        all_decomposable &= class.is_decomposable;
        if class.classification == Classification::Dew {
            dew_indices.push(i);
        }
        classes.push(class);
    }
    let condition_holds = all_decomposable && !dew_indices.is_empty();
    let p_ppt = if condition_holds {
        Some(super::programs::evaluate_measurement(e, m)?)
    } else {
        None
    };
    Ok(Theorem3 {
        condition_holds,
        p_ppt,
        dew_indices,
        classes,
        hermitization_residual: asym,
        h,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem4 {
    pub verdict: EqualityVerdict,
    pub q_ppt: f64,
    /// `min Tr H` over `H ⪰ η_i ρ_i`.
    pub psd_restricted: f64,
    pub p_global: f64,
    pub p_ppt_primal: f64,
    /// Outcome of comparing `p_G` and `p_PPT` directly.
    pub direct: Outcome,
    pub iterations: usize,
    /// The four solves, kept so the verdict can be re-checked from their
    /// measurements and certificates alone.
    pub runs: Theorem4Runs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem4Runs {
    pub dual: DiscriminationResult,
    pub psd_restricted: DiscriminationResult,
    pub global: DiscriminationResult,
    pub ppt: DiscriminationResult,
}

/// `p_PPT = p_G` iff the PSD-restricted dual attains `q_PPT`. Runs the four
/// programs and fails with `Error::Inconclusive` if they disagree.
pub fn theorem4_classify(e: &Ensemble) -> Result<Theorem4> {
    theorem4_classify_with(e, &discrimination_options())
}

pub fn theorem4_classify_with(e: &Ensemble, options: &SolverOptions) -> Result<Theorem4> {
    let q = dual_qppt_with(e, options)?;
    let psd = psd_restricted_dual_with(e, options)?;
    let g = optimal_global_with(e, options)?;
    let p = optimal_ppt_with(e, options)?;
    let iterations = q.iterations() + psd.iterations() + g.iterations() + p.iterations();

    let drift = |a: f64, b: f64, what: &str| -> Result<()> {
        if (a - b).abs() > 2.0 * tolerances::CERT {
            return Err(Error::Inconclusive(format!("{what}: {a} vs {b}")));
        }
        Ok(())
    };
    drift(psd.value, g.value, "PSD-restricted dual and p_G disagree")?;
    drift(q.value, p.value, "q_PPT and p_PPT disagree")?;

    let margin = (psd.value - q.value).max(0.0);
    let verdict = EqualityVerdict::from_margin(q.value, Some(psd.value), margin, Evidence::NumericGap);
    let direct = EqualityVerdict::from_margin(p.value, Some(g.value), (g.value - p.value).max(0.0), Evidence::NumericGap).outcome;
    let determinate = |o: Outcome| o != Outcome::Indeterminate;
    if determinate(verdict.outcome) && determinate(direct) && verdict.outcome != direct {
        return Err(Error::Inconclusive(format!(
            "dual comparison says {:?}, direct comparison says {:?}",
            verdict.outcome, direct
        )));
    }
    Ok(Theorem4 {
        verdict,
        q_ppt: q.value,
        psd_restricted: psd.value,
        p_global: g.value,
        p_ppt_primal: p.value,
        direct,
        iterations,
        runs: Theorem4Runs {
            dual: q,
            psd_restricted: psd,
            global: g,
            ppt: p,
        },
    })
}
