//! Run reports and their offline re-verification.
//!
//! A report embeds every measurement, dual operator and cone certificate its
//! verdicts rest on. [`reproduce_verdicts`] recomputes each verdict from
//! those alone, using eigenvalues and arithmetic but no solver.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pptdisc::cone::{self, Classification, ConeCertificate, Verdict, WitnessClass};
use pptdisc::discrimination::{
    evaluate_measurement, Corollary1, DiscriminationResult, Ensemble, EqualityVerdict, Evidence, Mode, Outcome,
    Theorem3, Theorem4,
};
use pptdisc::ensembles::{BuiltExample, Construction, ExampleKind};
use pptdisc::operator::BipartiteOperator;
use pptdisc::solver::{SolverOptions, SolverStats};
use pptdisc::tolerances;

/// Largest `|numeric − closed form|` accepted by `reproduce`.
pub const REPRODUCE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of_file(role: &str, path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

/// Headline numbers. `p_locc_*` bracket the LOCC value when known.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Values {
    pub p_global: Option<f64>,
    pub p_ppt: Option<f64>,
    pub q_ppt: Option<f64>,
    pub p_locc_lower: Option<f64>,
    pub p_locc_upper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub name: String,
    pub outcome: String,
    /// Distance from the nearest decision boundary in the verdict's own measure.
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub evidence: Option<Evidence>,
}

impl VerdictEntry {
    pub fn new(name: impl Into<String>, outcome: impl Into<String>, margin: f64) -> Self {
        Self {
            name: name.into(),
            outcome: outcome.into(),
            margin,
            evidence: None,
        }
    }

    pub fn with_evidence(mut self, evidence: Evidence) -> Self {
        self.evidence = Some(evidence);
        self
    }

    /// Outcomes that make the run uncertified.
    pub fn is_undecided(&self) -> bool {
        matches!(self.outcome.as_str(), "indeterminate" | "mismatch" | "unknown" | "fails")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveRecord {
    pub label: String,
    pub stats: Option<SolverStats>,
    pub wall_ms: f64,
}

impl SolveRecord {
    pub fn of(label: &str, r: &DiscriminationResult) -> Self {
        Self {
            label: label.to_string(),
            stats: r.solver,
            wall_ms: r.wall_ms,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableRow {
    pub param: f64,
    pub closed_form: f64,
    pub numeric: f64,
    pub abs_err: f64,
    pub iterations: usize,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Payload {
    Solve {
        ensemble: Ensemble,
        result: DiscriminationResult,
    },
    Classify {
        ensemble: Ensemble,
        pivot: usize,
        theorem4: Box<Theorem4>,
        corollary1: Option<Corollary1>,
        corollary2: Option<EqualityVerdict>,
    },
    Witness {
        operator: BipartiteOperator,
        class: WitnessClass,
    },
    Construct {
        construction: Construction,
        theorem4: Box<Theorem4>,
    },
    Reproduce(Box<Reproduction>),
    Table {
        example: ExampleKind,
        d: usize,
        rows: Vec<TableRow>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Reproduction {
    pub built: BuiltExample,
    /// `optimal_ppt` on the example ensemble.
    pub numeric: DiscriminationResult,
    pub theorem3: Option<Theorem3>,
    pub corollary1: Option<Corollary1>,
    pub corollary2: Option<EqualityVerdict>,
    /// Certificates for `H(t) − η_i ρ_i` of the supplied dual family member.
    pub dual_certificates: Vec<ConeCertificate>,
    pub dual_class: Option<WitnessClass>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub inputs: Vec<InputDigest>,
    pub options: SolverOptions,
    pub cone_options: SolverOptions,
    pub values: Values,
    pub verdicts: Vec<VerdictEntry>,
    pub solver: Vec<SolveRecord>,
    /// True iff every verdict is decided and re-verified offline.
    pub certified: bool,
    pub payload: Payload,
}

impl RunReport {
    pub fn new(
        inputs: Vec<InputDigest>,
        options: SolverOptions,
        cone_options: SolverOptions,
        values: Values,
        verdicts: Vec<VerdictEntry>,
        solver: Vec<SolveRecord>,
        payload: Payload,
    ) -> Self {
        Self {
            tool: env!("CARGO_BIN_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: std::env::args().collect(),
            inputs,
            options,
            cone_options,
            values,
            verdicts,
            solver,
            certified: false,
            payload,
        }
    }
}

/// Recorded against reproduced outcome for one verdict.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub name: String,
    pub recorded: Option<String>,
    pub reproduced: Option<String>,
}

impl Comparison {
    pub fn agrees(&self) -> bool {
        self.recorded.is_some() && self.recorded == self.reproduced
    }
}

/// Matches recorded verdicts against offline reproductions by name.
pub fn compare(report: &RunReport) -> Result<Vec<Comparison>> {
    let reproduced = reproduce_verdicts(&report.payload)?;
    let mut out: Vec<Comparison> = report
        .verdicts
        .iter()
        .map(|v| Comparison {
            name: v.name.clone(),
            recorded: Some(v.outcome.clone()),
            reproduced: reproduced.iter().find(|r| r.0 == v.name).map(|r| r.1.clone()),
        })
        .collect();
    for (name, outcome) in reproduced {
        if !report.verdicts.iter().any(|v| v.name == name) {
            out.push(Comparison {
                name,
                recorded: None,
                reproduced: Some(outcome),
            });
        }
    }
    Ok(out)
}

/// Certified bounds on the optimal value of the program `run` solved.
struct Bounds {
    lower: Option<f64>,
    upper: f64,
}

fn same(a: f64, b: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

/// Re-checks a discrimination run: every `H − η_i ρ_i` against its
/// certificate, the measurement's validity and both reported values.
fn check_run(e: &Ensemble, run: &DiscriminationResult) -> Result<Bounds> {
    let h = &run.dual_h;
    anyhow::ensure!(run.certificates.len() == e.len(), "certificate count {} for {} items", run.certificates.len(), e.len());
    let psd_only = run.mode == Mode::Global;
    for (i, cert) in run.certificates.iter().enumerate() {
        let w = h - &e.weighted(i);
        anyhow::ensure!(cone::reverify(&w, cert)? == Verdict::Member, "certificate {i} does not re-verify");
        if psd_only {
            let (_, q) = cert.decomposition().context("global certificate without decomposition")?;
            anyhow::ensure!(q.frobenius_norm() <= tolerances::CERT, "global certificate {i} has a PT part");
        }
    }
    anyhow::ensure!(same(h.trace(), run.dual_value), "Tr H = {} but {} recorded", h.trace(), run.dual_value);
    let lower = match &run.measurement {
        Some(m) => {
            anyhow::ensure!(m.completeness_residual() <= tolerances::COMPLETENESS, "measurement incomplete");
            if run.mode == Mode::Ppt {
                anyhow::ensure!(m.min_pt_eigenvalue()? >= -tolerances::PSD, "measurement is not PPT");
            }
            let v = evaluate_measurement(e, m)?;
            anyhow::ensure!(same(v, run.value), "measurement value {v} but {} recorded", run.value);
            Some(v)
        }
        None => None,
    };
    Ok(Bounds {
        lower,
        upper: h.trace(),
    })
}

/// The psd-restricted dual is a `p_G` upper bound only if its certificates
/// are PSD decompositions, which is what `Mode::Global` checks.
fn check_psd_dual(e: &Ensemble, run: &DiscriminationResult) -> Result<f64> {
    let as_global = DiscriminationResult {
        mode: Mode::Global,
        ..run.clone()
    };
    Ok(check_run(e, &as_global)?.upper)
}

/// `equal` iff `p_G ≤ p_PPT` up to certificate noise, `not_equal` iff
/// `p_G − p_PPT` exceeds the verdict threshold less that noise.
fn equality_outcome(e: &Ensemble, t4: &Theorem4) -> Result<String> {
    let q = check_run(e, &t4.runs.dual)?;
    let g_upper = check_psd_dual(e, &t4.runs.psd_restricted)?;
    let g_lower = check_run(e, &t4.runs.global)?.lower.context("global run without measurement")?;
    let p_lower = check_run(e, &t4.runs.ppt)?.lower.context("PPT run without measurement")?;
    let out = if g_upper - p_lower <= 3.0 * tolerances::CERT {
        Outcome::Equal
    } else if g_lower - q.upper >= tolerances::VERDICT - 2.0 * tolerances::CERT {
        Outcome::NotEqual
    } else {
        Outcome::Indeterminate
    };
    Ok(outcome_name(out).to_string())
}

pub fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Equal => "equal",
        Outcome::NotEqual => "not_equal",
        Outcome::Indeterminate => "indeterminate",
    }
}

pub fn class_name(c: Classification) -> &'static str {
    match c {
        Classification::Psd => "PSD",
        Classification::Dew => "DEW",
        Classification::NonDecomposable => "non_decomposable",
    }
}

fn reclassify(w: &BipartiteOperator, cert: &ConeCertificate) -> Result<Classification> {
    if w.min_eigenvalue()? >= -tolerances::PSD {
        return Ok(Classification::Psd);
    }
    match cone::reverify(w, cert)? {
        Verdict::Member => Ok(Classification::Dew),
        Verdict::NonMember => Ok(Classification::NonDecomposable),
        Verdict::Unknown => anyhow::bail!("certificate supports no verdict"),
    }
}

/// Pivot condition and pivot equality from the pivot certificates.
fn pivot_outcomes(e: &Ensemble, c1: &Corollary1, with_equality: bool) -> Result<Vec<(String, String)>> {
    let wp = e.weighted(c1.pivot);
    let mut holds = c1.certificates.len() + 1 == e.len();
    let mut worst = 0.0f64;
    for (i, cert) in &c1.certificates {
        let w = &wp - &e.weighted(*i);
        holds &= cone::reverify(&w, cert)? == Verdict::Member;
        worst = worst.max(-w.min_eigenvalue()?);
    }
    let mut out = vec![("pivot_condition".to_string(), if holds { "holds" } else { "does_not_hold" }.to_string())];
    if with_equality && holds {
        let o = if worst <= tolerances::PSD { Outcome::Equal } else { Outcome::NotEqual };
        out.push(("pivot_equality".to_string(), outcome_name(o).to_string()));
    }
    Ok(out)
}

pub fn closeness(numeric: f64, closed_form: f64) -> &'static str {
    if (numeric - closed_form).abs() <= REPRODUCE_TOL {
        "match"
    } else {
        "mismatch"
    }
}

/// Both the primal value and the dual bound must sit within tolerance.
pub fn bracket_closeness(lower: f64, upper: f64, closed_form: f64) -> &'static str {
    let worst = (lower - closed_form).abs().max((upper - closed_form).abs());
    if worst <= REPRODUCE_TOL {
        "match"
    } else {
        "mismatch"
    }
}

/// `(name, outcome)` for every verdict the payload supports.
pub fn reproduce_verdicts(payload: &Payload) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    match payload {
        Payload::Solve { ensemble, result } => {
            let b = check_run(ensemble, result)?;
            let outcome = match b.lower {
                Some(lower) if b.upper - lower <= 2.0 * tolerances::CERT => "optimal",
                Some(_) => "indeterminate",
                None => "upper_bound",
            };
            out.push(("value".to_string(), outcome.to_string()));
        }
        Payload::Classify {
            ensemble,
            theorem4,
            corollary1,
            corollary2,
            ..
        } => {
            out.push(("equality".to_string(), equality_outcome(ensemble, theorem4)?));
            if let Some(c1) = corollary1 {
                out.extend(pivot_outcomes(ensemble, c1, corollary2.is_some())?);
            }
        }
        Payload::Witness { operator, class } => {
            let c = reclassify(operator, &class.certificate)?;
            out.push(("classification".to_string(), class_name(c).to_string()));
        }
        Payload::Construct { construction, theorem4 } => {
            let e = &construction.ensemble;
            let p = construction.pivot;
            let others = (0..e.len()).filter(|&i| i != p);
            for (k, (i, class)) in others.zip(&construction.witnesses).enumerate() {
                let scale = construction.scales[k];
                let w = (&e.weighted(p) - &e.weighted(i)).scale(1.0 / scale);
                let c = reclassify(&w, &class.certificate)?;
                out.push((format!("witness_{k}"), class_name(c).to_string()));
            }
            let equality = equality_outcome(e, theorem4)?;
            let claim = if equality == "not_equal" { "holds" } else { "fails" };
            out.push(("equality".to_string(), equality));
            out.push(("claim_ppt_below_global".to_string(), claim.to_string()));
        }
        Payload::Reproduce(r) => out.extend(reproduce_example(r)?),
        Payload::Table { rows, .. } => {
            for (k, row) in rows.iter().enumerate() {
                anyhow::ensure!(same(row.abs_err, (row.numeric - row.closed_form).abs()), "row {k}: abs_err inconsistent");
                out.push((format!("row_{k}"), closeness(row.numeric, row.closed_form).to_string()));
            }
        }
    }
    Ok(out)
}

fn reproduce_example(r: &Reproduction) -> Result<Vec<(String, String)>> {
    let e = &r.built.ensemble;
    let mut out = Vec::new();
    let b = check_run(e, &r.numeric)?;
    let lower = b.lower.context("PPT run without measurement")?;
    out.push(("closed_form".to_string(), bracket_closeness(lower, b.upper, r.built.closed_form).to_string()));

    if let (Some(t3), Some(m)) = (&r.theorem3, &r.built.measurement) {
        anyhow::ensure!(m.min_pt_eigenvalue()? >= -tolerances::PSD, "reference measurement is not PPT");
        let mut all_decomposable = true;
        let mut any_dew = false;
        for (i, class) in t3.classes.iter().enumerate() {
            let w = &t3.h - &e.weighted(i);
            match reclassify(&w, &class.certificate)? {
                Classification::Psd => {}
                Classification::Dew => any_dew = true,
                Classification::NonDecomposable => all_decomposable = false,
            }
        }
        let holds = all_decomposable && any_dew;
        out.push(("witness_condition".to_string(), if holds { "holds" } else { "fails" }.to_string()));
    }
    if let Some(c1) = &r.corollary1 {
        out.extend(pivot_outcomes(e, c1, r.corollary2.is_some())?);
    }
    if let Some(h) = &r.built.dual {
        if r.built.spec.example == ExampleKind::Ex2 {
            let mut member = r.dual_certificates.len() == e.len();
            for (i, cert) in r.dual_certificates.iter().enumerate() {
                member &= cone::reverify(&(h - &e.weighted(i)), cert)? == Verdict::Member;
            }
            let dew = match &r.dual_class {
                Some(class) => reclassify(&(h - &e.weighted(2)), &class.certificate)? == Classification::Dew,
                None => false,
            };
            let outcome = if member && dew { "certified" } else { "fails" };
            out.push(("dual_in_dew_set".to_string(), outcome.to_string()));
            out.push(("dual_value".to_string(), closeness(h.trace(), r.built.closed_form).to_string()));
        }
    }
    Ok(out)
}
