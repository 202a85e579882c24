//! The four discrimination programs. Items with zero prior are left out of
//! every solve and receive `M_i = 0`.
//!
//! Solver output is turned into exact objects before it is returned:
//! measurements are repaired so that they satisfy the POVM (and PPT)
//! constraints, and `H` is shifted by a multiple of `𝟙` so that every
//! `H − η_i ρ_i` has an exactly verifiable certificate. Values are computed
//! from the repaired objects, so a primal value is a lower bound and a dual
//! value an upper bound on the true optimum.

use std::time::Instant;

use num_complex::Complex64;

use super::types::{DiscriminationResult, Ensemble, Measurement, Mode};
use crate::cone::{assert_lemma1, decomposition_certificate, ConeCertificate};
use crate::error::{Error, Result};
use crate::formulation::{to_operator, Basis};
use crate::operator::{BipartiteOperator, CMatrix};
use crate::solver::{ComplexConstraint, ComplexProgram, ComplexSolution, HermSparse, SolverOptions, SolverStats};
use crate::tolerances;

/// Default solver accuracy for discrimination programs.
pub fn discrimination_options() -> SolverOptions {
    SolverOptions::with_tolerances(tolerances::DISCRIMINATION_FEAS, tolerances::DISCRIMINATION_GAP)
}

fn active_items(e: &Ensemble) -> Vec<usize> {
    (0..e.len()).filter(|&i| e.eta(i) > 0.0).collect()
}

fn weighted_sparse(e: &Ensemble, i: usize, factor: f64) -> HermSparse {
    let m = e.weighted(i).into_matrix() * Complex64::new(factor, 0.0);
    HermSparse::from_dense(&m).expect("ensemble operators are Hermitian")
}

fn block(e: &Ensemble, m: &CMatrix) -> BipartiteOperator {
    to_operator(e.dims(), m)
}

fn sum(ops: &[BipartiteOperator], dims: crate::operator::SystemDims) -> BipartiteOperator {
    let mut s = BipartiteOperator::zeros(dims);
    for o in ops {
        s += o;
    }
    s
}

/// Projects raw solver blocks onto a valid (PPT) measurement:
/// clip to PSD, lift each element by `ε_i 𝟙` until its partial transpose is
/// PSD, scale the sum below `𝟙` (and `𝟙` after PT), and give the remainder,
/// which lies in PPT₊, to the element at `sink`.
fn repair_measurement(e: &Ensemble, raw: Vec<BipartiteOperator>, sink: usize, ppt: bool) -> Result<Measurement> {
    let dims = e.dims();
    let id = BipartiteOperator::identity(dims);
    let mut m: Vec<BipartiteOperator> = raw.iter().map(|x| x.clip_negative()).collect::<Result<_>>()?;
    if ppt {
        for mi in m.iter_mut() {
            let lmin = mi.partial_transpose().min_eigenvalue()?;
            if lmin < 0.0 {
                *mi = &*mi + &id.scale(-lmin);
            }
        }
    }
    let s = sum(&m, dims);
    let mut top = s.max_eigenvalue()?;
    if ppt {
        top = top.max(s.partial_transpose().max_eigenvalue()?);
    }
    if top > 0.0 {
        let c = 1.0 / top;
        for mi in m.iter_mut() {
            *mi = mi.scale(c);
        }
        let rest = &id - &s.scale(c);
        m[sink] = &m[sink] + &rest;
    } else {
        m[sink] = id;
    }
    Measurement::new(dims, m)
}

fn value_of(e: &Ensemble, m: &Measurement) -> Result<f64> {
    let mut v = 0.0;
    for (i, mi) in m.elements().iter().enumerate() {
        v += e.eta(i) * e.rho(i).trace_inner(mi)?;
    }
    Ok(v)
}

fn slackness(e: &Ensemble, m: &Measurement, h: &BipartiteOperator) -> Result<Vec<f64>> {
    m.elements()
        .iter()
        .enumerate()
        .map(|(i, mi)| mi.trace_inner(&(h - &e.weighted(i))))
        .collect()
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Single item with nonzero prior: value 1 with `M = 𝟙` on it, `H = η ρ`.
fn trivial(e: &Ensemble, only: usize, mode: Mode, start: Instant) -> Result<DiscriminationResult> {
    let dims = e.dims();
    let h = e.weighted(only);
    let measurement = if mode == Mode::DualOnly {
        None
    } else {
        Some(Measurement::trivial(dims, e.len(), only)?)
    };
    let certificates = (0..e.len())
        .map(|i| {
            let w = &h - &e.weighted(i);
            decomposition_certificate(&w, w.clone(), BipartiteOperator::zeros(dims), None, None)
        })
        .collect::<Result<Vec<_>>>()?;
    trace_positivity(e, &h, &certificates)?;
    let slackness = match &measurement {
        Some(m) => slackness(e, m, &h)?,
        None => Vec::new(),
    };
    let value = match &measurement {
        Some(m) => value_of(e, m)?,
        None => h.trace(),
    };
    Ok(DiscriminationResult {
        mode,
        value,
        measurement,
        dual_value: h.trace(),
        dual_h: h,
        slackness,
        certificates,
        dual_shift: 0.0,
        solver: None,
        wall_ms: elapsed_ms(start),
    })
}

/// Every certified `H − η_i ρ_i` must have positive trace unless it vanishes.
fn trace_positivity(e: &Ensemble, h: &BipartiteOperator, certificates: &[ConeCertificate]) -> Result<()> {
    for (i, cert) in certificates.iter().enumerate().filter(|(_, c)| c.is_member()) {
        let w = h - &e.weighted(i);
        if !assert_lemma1(&w, cert) {
            return Err(Error::TracePositivity { trace: w.trace() });
        }
    }
    Ok(())
}

fn completeness_constraints(program: &mut ComplexProgram, basis: &Basis, blocks: &[usize]) {
    for k in 0..basis.len() {
        let terms = blocks.iter().map(|&b| (b, basis.plain[k].clone())).collect();
        program.add_constraint(ComplexConstraint::new(terms, basis.plain[k].trace()));
    }
}

fn solve_checked(program: &ComplexProgram, options: &SolverOptions) -> Result<ComplexSolution> {
    program.solve(options)?.require_optimal()
}

/// Smallest `δ ≥ 0` with `λ_min(A) + δ ≥ 0` for every `A`.
fn shift_for(ops: &[BipartiteOperator]) -> Result<f64> {
    let mut delta: f64 = 0.0;
    for a in ops {
        delta = delta.max(-a.min_eigenvalue()?);
    }
    Ok(delta)
}

/// `p_G`: `max Σ η_i Tr(ρ_i M_i)` over all measurements, with the dual
/// `H` minimizing `Tr H` subject to `H ⪰ η_i ρ_i`.
pub fn optimal_global(e: &Ensemble) -> Result<DiscriminationResult> {
    optimal_global_with(e, &discrimination_options())
}

pub fn optimal_global_with(e: &Ensemble, options: &SolverOptions) -> Result<DiscriminationResult> {
    let start = Instant::now();
    let dims = e.dims();
    let active = active_items(e);
    if active.len() == 1 {
        return trivial(e, active[0], Mode::Global, start);
    }
    let d = dims.total();
    let n = active.len();
    let basis = Basis::new(dims);
    let mut program = ComplexProgram::new(vec![d; n]);
    for (slot, &i) in active.iter().enumerate() {
        program.set_objective(slot, weighted_sparse(e, i, -1.0));
    }
    completeness_constraints(&mut program, &basis, &(0..n).collect::<Vec<_>>());
    let sol = solve_checked(&program, options)?;

    let mut raw = vec![BipartiteOperator::zeros(dims); e.len()];
    for (slot, &i) in active.iter().enumerate() {
        raw[i] = block(e, &sol.x[slot]);
    }
    let sink = e.largest_prior();
    let measurement = repair_measurement(e, raw, sink, false)?;

    let h0 = basis.combine(&sol.y).scale(-1.0);
    let diffs: Vec<BipartiteOperator> = (0..e.len()).map(|i| &h0 - &e.weighted(i)).collect();
    let delta = shift_for(&diffs)?;
    let h = &h0 + &BipartiteOperator::identity(dims).scale(delta);
    let certificates = (0..e.len())
        .map(|i| {
            let w = &h - &e.weighted(i);
            decomposition_certificate(&w, w.clone(), BipartiteOperator::zeros(dims), None, None)
        })
        .collect::<Result<Vec<_>>>()?;

    // Σ η_j ρ_j M_j − η_i ρ_i ⪰ 0 on the returned measurement
    let g = global_condition(e, &measurement)?;
    if g < -tolerances::CERT {
        return Err(Error::Inconclusive(format!(
            "returned measurement violates the global optimality condition by {g:.3e}"
        )));
    }

    finish(e, Mode::Global, Some(measurement), h, delta, certificates, sol.raw.stats(), start)
}

/// `min_i λ_min(Herm(Σ_j η_j ρ_j M_j) − η_i ρ_i)`.
pub fn global_condition(e: &Ensemble, m: &Measurement) -> Result<f64> {
    let dims = e.dims();
    let mut acc = CMatrix::zeros(dims.total(), dims.total());
    for (j, mj) in m.elements().iter().enumerate() {
        acc += e.weighted(j).matrix() * mj.matrix();
    }
    let g = BipartiteOperator::hermitize(dims, &acc)?;
    let mut worst = f64::INFINITY;
    for i in 0..e.len() {
        worst = worst.min((&g - &e.weighted(i)).min_eigenvalue()?);
    }
    Ok(worst)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    e: &Ensemble,
    mode: Mode,
    measurement: Option<Measurement>,
    h: BipartiteOperator,
    shift: f64,
    certificates: Vec<ConeCertificate>,
    stats: SolverStats,
    start: Instant,
) -> Result<DiscriminationResult> {
    if let Some(bad) = certificates.iter().position(|c| !c.is_member()) {
        return Err(Error::Inconclusive(format!(
            "certificate for H − η_{bad} ρ_{bad} failed re-verification (residuals {:?})",
            certificates[bad].residuals
        )));
    }
    trace_positivity(e, &h, &certificates)?;
    let dual_value = h.trace();
    let (value, slack) = match &measurement {
        Some(m) => (value_of(e, m)?, slackness(e, m, &h)?),
        None => (dual_value, Vec::new()),
    };
    Ok(DiscriminationResult {
        mode,
        value,
        measurement,
        dual_h: h,
        dual_value,
        slackness: slack,
        certificates,
        dual_shift: shift,
        solver: Some(stats),
        wall_ms: elapsed_ms(start),
    })
}

/// `p_PPT`: the maximum over PPT measurements. Blocks `M_i` and `Y_i` with
/// `Y_i = M_i^Γ` imposed coordinate-wise. The dual gives `H` and the
/// decompositions `H − η_i ρ_i = P_i + Q_i^Γ` from the slacks of `M_i`, `Y_i`.
pub fn optimal_ppt(e: &Ensemble) -> Result<DiscriminationResult> {
    optimal_ppt_with(e, &discrimination_options())
}

pub fn optimal_ppt_with(e: &Ensemble, options: &SolverOptions) -> Result<DiscriminationResult> {
    let start = Instant::now();
    let dims = e.dims();
    let active = active_items(e);
    if active.len() == 1 {
        return trivial(e, active[0], Mode::Ppt, start);
    }
    let d = dims.total();
    let n = active.len();
    let basis = Basis::new(dims);
    let mut program = ComplexProgram::new(vec![d; 2 * n]);
    for (slot, &i) in active.iter().enumerate() {
        program.set_objective(slot, weighted_sparse(e, i, -1.0));
    }
    completeness_constraints(&mut program, &basis, &(0..n).collect::<Vec<_>>());
    for slot in 0..n {
        for k in 0..basis.len() {
            program.add_constraint(ComplexConstraint::new(
                vec![(n + slot, basis.plain[k].clone()), (slot, basis.transposed[k].scaled(-1.0))],
                0.0,
            ));
        }
    }
    let sol = solve_checked(&program, options)?;

    let mut raw = vec![BipartiteOperator::zeros(dims); e.len()];
    for (slot, &i) in active.iter().enumerate() {
        raw[i] = block(e, &sol.x[slot]);
    }
    let sink = e.largest_prior();
    let measurement = repair_measurement(e, raw, sink, true)?;

    let h0 = basis.combine(&sol.y[..basis.len()]).scale(-1.0);
    let qs: Vec<BipartiteOperator> = (0..n)
        .map(|slot| block(e, &sol.s[n + slot]).clip_negative())
        .collect::<Result<_>>()?;
    let (h, delta, certificates) = exact_decompositions(e, &active, h0, qs, sink)?;
    finish(e, Mode::Ppt, Some(measurement), h, delta, certificates, sol.raw.stats(), start)
}

/// Given a candidate `H` and PSD `Q_slot` for each active item, sets
/// `P_i = H − η_i ρ_i − Q_i^Γ`, shifts `H` by the smallest multiple of `𝟙`
/// making every `P_i` PSD, and certifies zero-prior items through `pivot`.
fn exact_decompositions(
    e: &Ensemble,
    active: &[usize],
    h0: BipartiteOperator,
    qs: Vec<BipartiteOperator>,
    pivot: usize,
) -> Result<(BipartiteOperator, f64, Vec<ConeCertificate>)> {
    let dims = e.dims();
    let id = BipartiteOperator::identity(dims);
    let ps0: Vec<BipartiteOperator> = active
        .iter()
        .zip(&qs)
        .map(|(&i, q)| &(&h0 - &e.weighted(i)) - &q.partial_transpose())
        .collect();
    let delta = shift_for(&ps0)?;
    let h = &h0 + &id.scale(delta);
    let mut pq: Vec<Option<(BipartiteOperator, BipartiteOperator)>> = vec![None; e.len()];
    for ((&i, p0), q) in active.iter().zip(&ps0).zip(qs) {
        pq[i] = Some((p0 + &id.scale(delta), q));
    }
    let pivot_pq = pq[pivot].clone().expect("pivot has nonzero prior");
    let certificates = (0..e.len())
        .map(|i| {
            let w = &h - &e.weighted(i);
            let (p, q) = match &pq[i] {
                Some(x) => x.clone(),
                // H = η_p ρ_p + P_p + Q_p^Γ
                None => (&pivot_pq.0 + &e.weighted(pivot), pivot_pq.1.clone()),
            };
            decomposition_certificate(&w, p, q, None, None)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((h, delta, certificates))
}

/// `q_PPT = min Tr H` s.t. `H − η_i ρ_i = P_i + Q_i^Γ`, solved independently
/// of [`optimal_ppt`]. `H` is eliminated through the largest-prior item `p`:
/// `H = η_p ρ_p + P_p + Q_p^Γ`.
pub fn dual_qppt(e: &Ensemble) -> Result<DiscriminationResult> {
    dual_qppt_with(e, &discrimination_options())
}

pub fn dual_qppt_with(e: &Ensemble, options: &SolverOptions) -> Result<DiscriminationResult> {
    restricted_dual(e, options, true)
}

/// `min Tr H` s.t. `H ⪰ η_i ρ_i`: the dual of `p_G`, equivalently the
/// decomposable dual with every `Q_i = 0`.
pub fn psd_restricted_dual(e: &Ensemble) -> Result<DiscriminationResult> {
    psd_restricted_dual_with(e, &discrimination_options())
}

pub fn psd_restricted_dual_with(e: &Ensemble, options: &SolverOptions) -> Result<DiscriminationResult> {
    restricted_dual(e, options, false)
}

fn restricted_dual(e: &Ensemble, options: &SolverOptions, with_q: bool) -> Result<DiscriminationResult> {
    let start = Instant::now();
    let dims = e.dims();
    let active = active_items(e);
    if active.len() == 1 {
        return trivial(e, active[0], Mode::DualOnly, start);
    }
    let d = dims.total();
    let n = active.len();
    let pivot = e.largest_prior();
    let pslot = active.iter().position(|&i| i == pivot).expect("largest prior is active");
    let basis = Basis::new(dims);
    let nblocks = if with_q { 2 * n } else { n };
    let mut program = ComplexProgram::new(vec![d; nblocks]);
    program.set_objective(pslot, HermSparse::identity(d));
    if with_q {
        program.set_objective(n + pslot, HermSparse::identity(d));
    }
    let wp = e.weighted(pivot);
    for (slot, &i) in active.iter().enumerate() {
        if slot == pslot {
            continue;
        }
        let rhs = basis.coordinates(&(&e.weighted(i) - &wp));
        for k in 0..basis.len() {
            let mut terms = vec![(pslot, basis.plain[k].clone()), (slot, basis.plain[k].scaled(-1.0))];
            if with_q {
                terms.push((n + pslot, basis.transposed[k].clone()));
                terms.push((n + slot, basis.transposed[k].scaled(-1.0)));
            }
            program.add_constraint(ComplexConstraint::new(terms, rhs[k]));
        }
    }
    let sol = solve_checked(&program, options)?;

    let zero = BipartiteOperator::zeros(dims);
    let pp = block(e, &sol.x[pslot]).clip_negative()?;
    let qp = if with_q { block(e, &sol.x[n + pslot]).clip_negative()? } else { zero.clone() };
    let h0 = &(&wp + &pp) + &qp.partial_transpose();
    let qs: Vec<BipartiteOperator> = if with_q {
        (0..n).map(|slot| block(e, &sol.x[n + slot]).clip_negative()).collect::<Result<_>>()?
    } else {
        vec![zero; n]
    };
    let (h, delta, certificates) = exact_decompositions(e, &active, h0, qs, pivot)?;
    finish(e, Mode::DualOnly, None, h, delta, certificates, sol.raw.stats(), start)
}

/// `Σ η_i Tr(ρ_i M_i)` for a fixed measurement.
pub fn evaluate_measurement(e: &Ensemble, m: &Measurement) -> Result<f64> {
    if m.dims() != e.dims() {
        return Err(Error::Dimension(format!("measurement dims {} vs ensemble dims {}", m.dims(), e.dims())));
    }
    if m.len() != e.len() {
        return Err(Error::InvalidMeasurement(format!(
            "measurement has {} elements, ensemble has {} items",
            m.len(),
            e.len()
        )));
    }
    value_of(e, m)
}
