//! `qhm`: batch front end for the verification suites.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 for
//! configuration or usage errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use qhm_core::harness::{self, CheckRow, Session, DESCENT_STARTS, SWEEP_SAMPLES};
use qhm_core::minimize::DescentConfig;
use qhm_core::{ConfigFile, Error};

#[derive(Parser)]
#[command(name = "qhm", version, about = "Verification suites for the quantum Heisenberg manifold Yang-Mills laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named suite (conventions, algebra, module, gauge, minimize, all).
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        suite: String,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimality sweep and multi-start descent, written as CSV plus a JSON
    /// summary next to it.
    Minimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SWEEP_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = DESCENT_STARTS)]
        starts: usize,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Per-iteration descent history as CSV.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Re-run one check at xStep, xStep/2 and xStep/4.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        check: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Checks,
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ConfigNotFound(_)
            | Error::InvalidParameter(_)
            | Error::Json(_)
            | Error::UnknownSuite(_)
            | Error::UnknownCheck(_)
            | Error::OutOfRange(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Verify { config, suite, out } => verify(&config, &suite, out.as_deref()),
        Command::Minimize {
            config,
            seed,
            out,
            samples,
            starts,
            max_iter,
            history,
        } => minimize(&config, seed, &out, samples, starts, max_iter, history.as_deref()),
        Command::Converge { config, check, out } => converge(&config, &check, out.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn print_rows(rows: &[CheckRow]) {
    for r in rows {
        let mark = if r.pass { "PASS" } else { "FAIL" };
        eprintln!(
            "{mark} {:<34} measured {:>10.3e}  tol {:>8.1e}  {}",
            r.check, r.measured, r.tolerance, r.anchor
        );
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn verify(config: &Path, suite: &str, out: Option<&Path>) -> Result<(), Failure> {
    let report = harness::run_suite(config, suite)?;
    for s in &report.suites {
        eprintln!("[{}]", s.suite);
        if let Some(why) = &s.skipped {
            eprintln!("SKIP {why}");
        }
        print_rows(&s.rows);
    }
    write_or_print(out, &report.to_json())?;
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

#[allow(clippy::too_many_arguments)]
fn minimize(
    config: &Path,
    seed: u64,
    out: &Path,
    samples: usize,
    starts: usize,
    max_iter: Option<usize>,
    history: Option<&Path>,
) -> Result<(), Failure> {
    let mut cfg = ConfigFile::load(config)?;
    cfg.seed = seed;
    let setup = cfg.validate()?;
    let mut session = Session::new(&setup);
    let conv = session.validate_conventions()?;
    if conv.iter().any(|r| !r.pass) {
        print_rows(&conv);
        eprintln!("convention oracles failed; minimization not run");
        return Err(Failure::Checks);
    }
    let mut descent = DescentConfig {
        seed,
        ..DescentConfig::default()
    };
    if let Some(m) = max_iter {
        descent.max_iter = m;
    }
    let run = harness::minimality_run(&session, samples, starts, &descent)?;

    let mut w = csv::Writer::from_path(out)?;
    for row in &run.sweep {
        w.serialize(row)?;
    }
    w.flush()?;
    if let Some(path) = history {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["start", "iteration", "ym"])?;
        for (s, d) in run.descents.iter().enumerate() {
            for (i, ym) in d.history.iter().enumerate() {
                w.write_record([s.to_string(), i.to_string(), format!("{ym:e}")])?;
            }
        }
        w.flush()?;
    }

    let rows = run.rows();
    print_rows(&rows);
    let pass = rows.iter().all(|r| r.pass);
    let descents: Vec<_> = run
        .descents
        .iter()
        .map(|d| {
            json!({
                "finalYm": d.final_ym,
                "gap": d.final_ym - run.ym0,
                "iterations": d.iterations,
                "status": d.status,
                "finalGradNorm": d.final_grad_norm,
            })
        })
        .collect();
    let summary = json!({
        "configEcho": cfg,
        "calibrationConstant": session.calibration()?.constant,
        "descentConfig": descent,
        "ymReference": run.ym0,
        "gradientAtZero": run.gradient_at_zero,
        "samples": run.sweep.len(),
        "descents": descents,
        "rows": rows,
        "pass": pass,
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(out.with_extension("json"), text)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn converge(config: &Path, check: &str, out: Option<&Path>) -> Result<(), Failure> {
    let table = harness::convergence_study(config, check)?;
    for r in &table.rows {
        match r.rel_change {
            Some(c) => eprintln!("xStep {:<12} value {:.15e}  rel change {c:.2e}", r.x_step, r.value),
            None => eprintln!("xStep {:<12} value {:.15e}", r.x_step, r.value),
        }
    }
    if let Some(o) = table.observed_order {
        eprintln!("observed order {o:.2}");
    }
    eprintln!("{} (tolerance {:.1e})", if table.pass { "PASS" } else { "FAIL" }, table.tolerance);
    let text = serde_json::to_string_pretty(&table).expect("table serializes");
    write_or_print(out, &text)?;
    if table.pass {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}
