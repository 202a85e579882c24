//! `pptdisc`: solve, classify and certify minimum-error discrimination of
//! bipartite ensembles from the command line.
//!
//! Exit codes: 0 when every verdict is decided and passes offline
//! re-verification, 2 when a verdict is indeterminate or a certificate is
//! undecided, 1 on any error.

mod commands;
mod options;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use pptdisc::ensembles::{load_json, save_json};
use pptdisc::solver::SolveStatus;

use commands::{ConstructArgs, Settings, SolveMode};
use options::Overrides;
use report::RunReport;

#[derive(Parser)]
#[command(name = "pptdisc", version, about = "Minimum-error discrimination under global and PPT measurements")]
struct Cli {
    /// Solver feasibility tolerance (overrides PPTDISC_EPS_OVERRIDE).
    #[arg(long, global = true)]
    eps_feas: Option<f64>,
    /// Solver duality-gap tolerance (overrides PPTDISC_EPS_OVERRIDE).
    #[arg(long, global = true)]
    eps_gap: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Recorded in the options; the default solve path uses no randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the JSON report to this file.
    #[arg(long, global = true, value_name = "FILE")]
    report: Option<PathBuf>,
    /// Do not print the report on stdout.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal success probability of one program.
    Solve {
        #[arg(long)]
        ensemble: PathBuf,
        #[arg(long, value_enum)]
        mode: SolveMode,
        /// Report file (same as --report).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide whether PPT measurements reach the global optimum.
    Classify {
        #[arg(long)]
        ensemble: PathBuf,
        /// Zero-based pivot item for the cross-check; defaults to the largest prior.
        #[arg(long)]
        pivot: Option<usize>,
    },
    /// Classify an operator as PSD, decomposable witness or neither.
    Witness {
        #[arg(long)]
        operator: PathBuf,
        /// Write the cone certificate to this file.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Build an ensemble with a PPT gap from decomposable witnesses.
    Construct {
        #[arg(long, conflicts_with_all = ["dews", "lambdas"], required_unless_present = "dews")]
        dew: Option<PathBuf>,
        /// Positive operator added to both states; defaults to the negative-part compensator.
        #[arg(long, requires = "dew")]
        pos: Option<PathBuf>,
        #[arg(long, num_args = 1.., requires = "lambdas")]
        dews: Vec<PathBuf>,
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        lambdas: Vec<f64>,
        /// Where to write the constructed ensemble.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute a worked example and compare with its closed form.
    Reproduce {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        example: u8,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long)]
        lambda: Option<f64>,
        /// Dual family parameter of example 2.
        #[arg(long)]
        t: Option<f64>,
        /// Sweep the example's parameter grid and print CSV.
        #[arg(long, conflicts_with = "save_ensemble")]
        table: bool,
        /// Also write the example ensemble to this file.
        #[arg(long)]
        save_ensemble: Option<PathBuf>,
    },
    /// Re-check a saved report from its embedded certificates, without solving.
    Verify { file: PathBuf },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<pptdisc::Error>() {
        Some(pptdisc::Error::Inconclusive(_)) => 2,
        Some(pptdisc::Error::Solver {
            status: SolveStatus::MaxIter,
            ..
        }) => 2,
        _ => 1,
    }
}

/// Sets `certified` from the offline comparison; mismatches go to stderr.
fn finalize(report: &mut RunReport) -> Result<()> {
    let comparisons = report::compare(report)?;
    let mut ok = true;
    for c in comparisons.iter().filter(|c| !c.agrees()) {
        ok = false;
        eprintln!(
            "re-verification mismatch for {}: recorded {:?}, reproduced {:?}",
            c.name, c.recorded, c.reproduced
        );
    }
    report.certified = ok && !report.verdicts.iter().any(|v| v.is_undecided());
    Ok(())
}

fn emit(report: &RunReport, path: Option<&PathBuf>, print: bool) -> Result<()> {
    if let Some(p) = path {
        save_json(report, p).with_context(|| format!("writing {}", p.display()))?;
    }
    if print {
        let mut out = std::io::stdout().lock();
        serde_json::to_writer_pretty(&mut out, report)?;
        writeln!(out)?;
    }
    Ok(())
}

fn verify(file: &PathBuf) -> Result<u8> {
    let report: RunReport = load_json(file)?;
    let comparisons = report::compare(&report)?;
    let mut all = true;
    for c in &comparisons {
        let tag = if c.agrees() { "ok" } else { "MISMATCH" };
        all &= c.agrees();
        println!(
            "{tag:8} {}: recorded {}, reproduced {}",
            c.name,
            c.recorded.as_deref().unwrap_or("-"),
            c.reproduced.as_deref().unwrap_or("-")
        );
    }
    let decided = !report.verdicts.iter().any(|v| v.is_undecided());
    Ok(match (all, decided) {
        (false, _) => 1,
        (true, false) => 2,
        (true, true) => 0,
    })
}

fn run(cli: Cli) -> Result<u8> {
    let overrides = Overrides {
        eps_feas: cli.eps_feas,
        eps_gap: cli.eps_gap,
        max_iter: cli.max_iter,
        seed: cli.seed,
    };
    let (options, cone_options) = overrides.resolve()?;
    let settings = Settings { options, cone_options };
    let mut report_path = cli.report.clone();
    let mut csv = false;
    let mut report = match &cli.command {
        Command::Solve { ensemble, mode, out } => {
            report_path = out.clone().or(report_path);
            commands::solve(&settings, ensemble, *mode)?
        }
        Command::Classify { ensemble, pivot } => commands::classify(&settings, ensemble, *pivot)?,
        Command::Witness { operator, certificate } => commands::witness(&settings, operator, certificate.as_deref())?,
        Command::Construct {
            dew,
            pos,
            dews,
            lambdas,
            out,
        } => {
            let args = ConstructArgs {
                dew: dew.clone(),
                pos: pos.clone(),
                dews: dews.clone(),
                lambdas: lambdas.clone(),
                out: out.clone(),
            };
            commands::construct(&settings, &args)?
        }
        Command::Reproduce {
            example,
            d,
            lambda,
            t,
            table,
            save_ensemble,
        } => {
            if *table {
                csv = true;
                commands::table(&settings, *example, *d)?
            } else {
                commands::reproduce(&settings, *example, *d, *lambda, *t, save_ensemble.as_deref())?
            }
        }
        Command::Verify { file } => return verify(file),
    };
    finalize(&mut report)?;
    if csv {
        if let report::Payload::Table { rows, .. } = &report.payload {
            commands::write_csv(rows, std::io::stdout().lock())?;
        }
    }
    emit(&report, report_path.as_ref(), !csv && !cli.quiet)?;
    Ok(if report.certified { 0 } else { 2 })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are errors, not indeterminate verdicts
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
