//! End-to-end acceptance: every criterion at its stated tolerance on the
//! default configuration, one PASS/FAIL line each.

use std::io::Write;

use qhm_core::harness::{convergence_study_with, run_suites, CheckRow, Report, Suite};
use qhm_core::ConfigFile;

struct Criterion {
    label: &'static str,
    pass: bool,
    detail: String,
}

fn from_rows(label: &'static str, report: &Report, keep: impl Fn(&str) -> bool) -> Criterion {
    let rows: Vec<&CheckRow> = report.rows().filter(|r| keep(&r.check)).collect();
    let failing: Vec<String> = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| format!("{} {:.2e} > {:.1e}", r.check, r.measured, r.tolerance))
        .collect();
    let pass = !rows.is_empty() && failing.is_empty();
    let detail = if rows.is_empty() {
        "no rows".to_string()
    } else if failing.is_empty() {
        format!("{} rows", rows.len())
    } else {
        failing.join("; ")
    };
    Criterion { label, pass, detail }
}

#[test]
fn acceptance() {
    let cfg = ConfigFile::default();
    let report = run_suites(&cfg, &Suite::ALL).unwrap();
    for s in &report.suites {
        if let Some(why) = &s.skipped {
            eprintln!("suite {} skipped: {why}", s.suite);
        }
    }

    let in_suite = |name: &'static str| {
        let checks: Vec<String> = report
            .suites
            .iter()
            .filter(|s| s.suite == name)
            .flat_map(|s| s.rows.iter().map(|r| r.check.clone()))
            .collect();
        move |c: &str| checks.iter().any(|k| k == c)
    };

    let mut criteria = vec![
        from_rows("1 convention oracles", &report, in_suite("conventions")),
        from_rows("2 algebra suite", &report, in_suite("algebra")),
        from_rows("3 connection suite", &report, |c| c.starts_with("connection.")),
        from_rows("4 curvature", &report, |c| c.starts_with("curvature.")),
        from_rows("5 Yang-Mills equation", &report, |c| c.starts_with("ym_equation.")),
        from_rows("6 minimality", &report, |c| c.starts_with("minimality.")),
        from_rows("7 gauge invariance", &report, |c| c == "ym.gauge_invariance"),
        from_rows("8 reference value", &report, |c| c == "ym.reference_value"),
    ];

    let mut details = Vec::new();
    let mut converged = true;
    for check in ["kappa_zx", "constant_fit_zx", "ym_reference", "calibration"] {
        let t = convergence_study_with(&cfg, check, &[1, 2]).unwrap();
        let last = t.rows.last().unwrap();
        details.push(format!(
            "{check} {:.2e}",
            last.rel_change.filter(|_| check != "constant_fit_zx").unwrap_or(last.value)
        ));
        converged &= t.pass;
    }
    criteria.push(Criterion {
        label: "9 grid refinement",
        pass: converged,
        detail: details.join("; "),
    });

    // written to the raw handle so the lines survive libtest's capture
    let mut err = std::io::stderr().lock();
    for c in &criteria {
        let mark = if c.pass { "PASS" } else { "FAIL" };
        writeln!(err, "{mark} {:<24} {}", c.label, c.detail).unwrap();
    }
    let failed: Vec<_> = criteria.iter().filter(|c| !c.pass).map(|c| c.label).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
