use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};

use pptdisc::cone::{self, ConeCertificate, Verdict};
use pptdisc::discrimination::{
    corollary1_check_with, corollary2_classify_with, dual_qppt_with, evaluate_measurement, optimal_global_with,
    optimal_ppt_with, theorem3_witness_check_with, theorem4_classify_with, Ensemble, Outcome, Theorem4,
};
use pptdisc::ensembles::{
    construct_from_dew, construct_from_dews, example2_dual, load_ensemble, load_operator, save_ensemble, save_json,
    ExampleKind, ExampleSpec,
};
use pptdisc::solver::SolverOptions;
use pptdisc::Error;

use crate::report::{
    bracket_closeness, class_name, closeness, outcome_name, InputDigest, Payload, Reproduction, RunReport,
    SolveRecord, TableRow, Values, VerdictEntry,
};

pub struct Settings {
    pub options: SolverOptions,
    pub cone_options: SolverOptions,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SolveMode {
    Global,
    Ppt,
    Dual,
}

fn report(
    ctx: &Settings,
    inputs: Vec<InputDigest>,
    values: Values,
    verdicts: Vec<VerdictEntry>,
    solver: Vec<SolveRecord>,
    payload: Payload,
) -> RunReport {
    RunReport::new(inputs, ctx.options.clone(), ctx.cone_options.clone(), values, verdicts, solver, payload)
}

fn read_ensemble(role: &str, path: &Path) -> Result<(Ensemble, InputDigest)> {
    let digest = InputDigest::of_file(role, path)?;
    Ok((load_ensemble(path)?, digest))
}

/// Decomposability margin `t*` when solved, smallest eigenvalue otherwise.
fn cert_margin(c: &ConeCertificate) -> f64 {
    c.margin.unwrap_or(c.residuals.min_eigenvalue)
}

pub fn solve(ctx: &Settings, path: &Path, mode: SolveMode) -> Result<RunReport> {
    let (e, digest) = read_ensemble("ensemble", path)?;
    let r = match mode {
        SolveMode::Global => optimal_global_with(&e, &ctx.options)?,
        SolveMode::Ppt => optimal_ppt_with(&e, &ctx.options)?,
        SolveMode::Dual => dual_qppt_with(&e, &ctx.options)?,
    };
    let mut values = Values::default();
    match mode {
        SolveMode::Global => values.p_global = Some(r.value),
        SolveMode::Ppt => {
            values.p_ppt = Some(r.value);
            values.p_locc_upper = Some(r.value);
        }
        SolveMode::Dual => {
            values.q_ppt = Some(r.value);
            values.p_locc_upper = Some(r.value);
        }
    }
    let gap = (r.dual_value - r.value).abs();
    let outcome = match (&r.measurement, gap <= 2.0 * pptdisc::tolerances::CERT) {
        (None, _) => "upper_bound",
        (Some(_), true) => "optimal",
        (Some(_), false) => "indeterminate",
    };
    let label = format!("{mode:?}").to_lowercase();
    Ok(report(
        ctx,
        vec![digest],
        values,
        vec![VerdictEntry::new("value", outcome, gap)],
        vec![SolveRecord::of(&label, &r)],
        Payload::Solve { ensemble: e, result: r },
    ))
}

fn theorem4_records(t4: &Theorem4) -> Vec<SolveRecord> {
    vec![
        SolveRecord::of("dual", &t4.runs.dual),
        SolveRecord::of("psd_restricted", &t4.runs.psd_restricted),
        SolveRecord::of("global", &t4.runs.global),
        SolveRecord::of("ppt", &t4.runs.ppt),
    ]
}

fn theorem4_values(t4: &Theorem4) -> Values {
    Values {
        p_global: Some(t4.p_global),
        p_ppt: Some(t4.p_ppt_primal),
        q_ppt: Some(t4.q_ppt),
        p_locc_lower: None,
        p_locc_upper: Some(t4.p_ppt_primal),
    }
}

fn equality_entry(t4: &Theorem4) -> VerdictEntry {
    VerdictEntry::new("equality", outcome_name(t4.verdict.outcome), t4.verdict.margin).with_evidence(t4.verdict.evidence)
}

pub fn classify(ctx: &Settings, path: &Path, pivot: Option<usize>) -> Result<RunReport> {
    let (e, digest) = read_ensemble("ensemble", path)?;
    let pivot = pivot.unwrap_or_else(|| e.largest_prior());
    if pivot >= e.len() {
        bail!("pivot {pivot} out of range for {} items", e.len());
    }
    let t4 = theorem4_classify_with(&e, &ctx.options)?;
    let mut verdicts = vec![equality_entry(&t4)];

    // the pivot path is a cross-check; an undecided certificate only skips it
    let c1 = match corollary1_check_with(&e, pivot, &ctx.cone_options) {
        Ok(c1) => Some(c1),
        Err(Error::Inconclusive(msg)) => {
            eprintln!("note: pivot cross-check skipped: {msg}");
            None
        }
        Err(err) => return Err(err.into()),
    };
    let mut c2 = None;
    if let Some(c1) = &c1 {
        let margin = c1.certificates.iter().map(|(_, c)| cert_margin(c)).fold(f64::INFINITY, f64::min);
        verdicts.push(VerdictEntry::new("pivot_condition", if c1.holds { "holds" } else { "does_not_hold" }, margin));
        if c1.holds {
            let v = corollary2_classify_with(&e, pivot, &ctx.cone_options)?;
            let determinate = |o: Outcome| o != Outcome::Indeterminate;
            if determinate(v.outcome) && determinate(t4.verdict.outcome) && v.outcome != t4.verdict.outcome {
                bail!(
                    "verdicts disagree: dual comparison says {}, pivot path says {}",
                    outcome_name(t4.verdict.outcome),
                    outcome_name(v.outcome)
                );
            }
            verdicts.push(VerdictEntry::new("pivot_equality", outcome_name(v.outcome), v.margin).with_evidence(v.evidence));
            c2 = Some(v);
        }
    }
    Ok(report(
        ctx,
        vec![digest],
        theorem4_values(&t4),
        verdicts,
        theorem4_records(&t4),
        Payload::Classify {
            ensemble: e,
            pivot,
            theorem4: Box::new(t4),
            corollary1: c1,
            corollary2: c2,
        },
    ))
}

pub fn witness(ctx: &Settings, path: &Path, certificate: Option<&Path>) -> Result<RunReport> {
    let digest = InputDigest::of_file("operator", path)?;
    let w = load_operator(path)?;
    let class = cone::classify_witness_with(&w, &ctx.cone_options)?;
    if let Some(out) = certificate {
        save_json(&class.certificate, out).with_context(|| format!("writing {}", out.display()))?;
    }
    let margin = match class.classification {
        cone::Classification::Psd => class.min_eigenvalue,
        _ => cert_margin(&class.certificate),
    };
    let verdict = VerdictEntry::new("classification", class_name(class.classification), margin);
    let solver = class
        .certificate
        .solver
        .map(|stats| SolveRecord {
            label: "decomposability".to_string(),
            stats: Some(stats),
            wall_ms: 0.0,
        })
        .into_iter()
        .collect();
    Ok(report(ctx, vec![digest], Values::default(), vec![verdict], solver, Payload::Witness { operator: w, class }))
}

pub struct ConstructArgs {
    pub dew: Option<PathBuf>,
    pub pos: Option<PathBuf>,
    pub dews: Vec<PathBuf>,
    pub lambdas: Vec<f64>,
    pub out: Option<PathBuf>,
}

pub fn construct(ctx: &Settings, args: &ConstructArgs) -> Result<RunReport> {
    let mut inputs = Vec::new();
    let mut read = |role: &str, p: &Path| -> Result<_> {
        inputs.push(InputDigest::of_file(role, p)?);
        Ok(load_operator(p)?)
    };
    let construction = match &args.dew {
        Some(dew) => {
            let w = read("dew", dew)?;
            let p = args.pos.as_deref().map(|p| read("pos", p)).transpose()?;
            construct_from_dew(&w, p.as_ref())?
        }
        None => {
            if args.dews.len() != args.lambdas.len() {
                bail!("{} witnesses but {} weights", args.dews.len(), args.lambdas.len());
            }
            let ws = args.dews.iter().map(|p| read("dew", p)).collect::<Result<Vec<_>>>()?;
            construct_from_dews(&ws, &args.lambdas)?
        }
    };
    if let Some(out) = &args.out {
        save_ensemble(&construction.ensemble, out).with_context(|| format!("writing {}", out.display()))?;
    }
    let t4 = theorem4_classify_with(&construction.ensemble, &ctx.options)?;
    let mut verdicts: Vec<VerdictEntry> = construction
        .witnesses
        .iter()
        .enumerate()
        .map(|(k, c)| VerdictEntry::new(format!("witness_{k}"), class_name(c.classification), cert_margin(&c.certificate)))
        .collect();
    verdicts.push(equality_entry(&t4));
    let claim = if t4.verdict.outcome == Outcome::NotEqual { "holds" } else { "fails" };
    verdicts.push(VerdictEntry::new("claim_ppt_below_global", claim, t4.verdict.margin));
    Ok(report(
        ctx,
        inputs,
        theorem4_values(&t4),
        verdicts,
        theorem4_records(&t4),
        Payload::Construct {
            construction,
            theorem4: Box::new(t4),
        },
    ))
}

fn spec_for(example: u8, d: usize, lambda: Option<f64>, t: Option<f64>) -> Result<ExampleSpec> {
    let need = |name: &str| lambda.with_context(|| format!("example {name} needs --lambda"));
    Ok(match example {
        1 => ExampleSpec::ex1(d, need("1")?),
        2 => ExampleSpec::ex2(t),
        3 => ExampleSpec::ex3(d, need("3")?),
        other => bail!("unknown example {other}"),
    })
}

pub fn reproduce(
    ctx: &Settings,
    example: u8,
    d: usize,
    lambda: Option<f64>,
    t: Option<f64>,
    save: Option<&Path>,
) -> Result<RunReport> {
    let built = spec_for(example, d, lambda, t)?.build()?;
    let e = &built.ensemble;
    if let Some(out) = save {
        save_ensemble(e, out).with_context(|| format!("writing {}", out.display()))?;
    }
    let numeric = optimal_ppt_with(e, &ctx.options)?;
    let worst = (numeric.value - built.closed_form).abs().max((numeric.dual_value - built.closed_form).abs());
    let mut verdicts = vec![VerdictEntry::new(
        "closed_form",
        bracket_closeness(numeric.value, numeric.dual_value, built.closed_form),
        worst,
    )];
    let mut values = Values {
        p_ppt: Some(numeric.value),
        q_ppt: Some(numeric.dual_value),
        p_locc_upper: Some(numeric.value),
        ..Values::default()
    };
    if built.locc_by_construction {
        if let Some(m) = &built.measurement {
            values.p_locc_lower = Some(evaluate_measurement(e, m)?);
        }
    }
    let mut r = Reproduction {
        numeric: numeric.clone(),
        theorem3: None,
        corollary1: None,
        corollary2: None,
        dual_certificates: Vec::new(),
        dual_class: None,
        built: built.clone(),
    };
    match built.spec.example {
        ExampleKind::Ex1 => {
            let m = built.measurement.as_ref().context("example 1 has a reference measurement")?;
            let t3 = theorem3_witness_check_with(e, m, &ctx.cone_options)?;
            let margin = t3.classes.iter().map(|c| cert_margin(&c.certificate)).fold(f64::INFINITY, f64::min);
            let outcome = if t3.condition_holds { "holds" } else { "fails" };
            verdicts.push(VerdictEntry::new("witness_condition", outcome, margin));
            r.theorem3 = Some(t3);
        }
        ExampleKind::Ex2 => {
            if let Some(h) = &built.dual {
                let mut certs = Vec::with_capacity(e.len());
                for i in 0..e.len() {
                    certs.push(cone::check_decomposable_with(&(h - &e.weighted(i)), &ctx.cone_options)?);
                }
                let class = cone::classify_witness_with(&(h - &e.weighted(2)), &ctx.cone_options)?;
                let member = certs.iter().all(|c| c.verdict == Verdict::Member);
                let dew = class.classification == cone::Classification::Dew;
                let margin = certs.iter().map(cert_margin).fold(f64::INFINITY, f64::min);
                verdicts.push(VerdictEntry::new("dual_in_dew_set", if member && dew { "certified" } else { "fails" }, margin));
                verdicts.push(VerdictEntry::new(
                    "dual_value",
                    closeness(h.trace(), built.closed_form),
                    (h.trace() - built.closed_form).abs(),
                ));
                if member {
                    values.q_ppt = Some(h.trace());
                }
                r.dual_certificates = certs;
                r.dual_class = Some(class);
            }
        }
        ExampleKind::Ex3 => {
            let c1 = corollary1_check_with(e, 0, &ctx.cone_options)?;
            let margin = c1.certificates.iter().map(|(_, c)| cert_margin(c)).fold(f64::INFINITY, f64::min);
            verdicts.push(VerdictEntry::new("pivot_condition", if c1.holds { "holds" } else { "does_not_hold" }, margin));
            if c1.holds {
                let v = corollary2_classify_with(e, 0, &ctx.cone_options)?;
                verdicts.push(VerdictEntry::new("pivot_equality", outcome_name(v.outcome), v.margin).with_evidence(v.evidence));
                r.corollary2 = Some(v);
            }
            r.corollary1 = Some(c1);
        }
    }
    Ok(report(
        ctx,
        Vec::new(),
        values,
        verdicts,
        vec![SolveRecord::of("ppt", &numeric)],
        Payload::Reproduce(Box::new(r)),
    ))
}

/// Parameter grid of each example's sweep: `λ` for 1 and 3, `t` for 2.
pub fn grid(example: u8) -> Vec<f64> {
    match example {
        1 => (1..=10).map(|k| k as f64 / 10.0).collect(),
        2 => vec![0.0, 0.25, 0.5, 0.75],
        _ => (0..10).map(|k| k as f64 / 10.0).collect(),
    }
}

/// One row per grid point: `p_PPT` against the closed form for Examples 1
/// and 3; for Example 2 the certified value `Tr H(t)` of the dual family.
pub fn table(ctx: &Settings, example: u8, d: usize) -> Result<RunReport> {
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for (k, param) in grid(example).into_iter().enumerate() {
        let start = Instant::now();
        let (closed_form, numeric, iterations) = if example == 2 {
            let e = spec_for(2, d, None, None)?.build()?.ensemble;
            let h = example2_dual(param)?;
            let mut iterations = 0;
            let mut member = true;
            for i in 0..e.len() {
                let c = cone::check_decomposable_with(&(&h - &e.weighted(i)), &ctx.cone_options)?;
                iterations += c.solver.map(|s| s.iterations).unwrap_or(0);
                member &= c.is_member();
            }
            (1.0, if member { h.trace() } else { f64::NAN }, iterations)
        } else {
            let built = spec_for(example, d, Some(param), None)?.build()?;
            let r = optimal_ppt_with(&built.ensemble, &ctx.options)?;
            (built.closed_form, r.value, r.iterations())
        };
        let row = TableRow {
            param,
            closed_form,
            numeric,
            abs_err: (numeric - closed_form).abs(),
            iterations,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        verdicts.push(VerdictEntry::new(format!("row_{k}"), closeness(numeric, closed_form), row.abs_err));
        rows.push(row);
    }
    let kind = match example {
        1 => ExampleKind::Ex1,
        2 => ExampleKind::Ex2,
        _ => ExampleKind::Ex3,
    };
    Ok(report(
        ctx,
        Vec::new(),
        Values::default(),
        verdicts,
        Vec::new(),
        Payload::Table { example: kind, d, rows },
    ))
}

pub fn write_csv(rows: &[TableRow], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
