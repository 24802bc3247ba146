use crate::error::CliError;
use crate::output::{fmt_f64, fmt_opt, RunWriter, Table};
use crate::settings::{ConvergeRun, EqArg, ModeArg, PerturbRun, Settings, SpectrumRun};
use serde::{Deserialize, Serialize};
use soliton_core::experiments::{
    run_creation_probability, run_diffusion_convergence, run_first_order_validation, Records,
    ValidationReport,
};
use soliton_core::kdv::kdv_find_eigenvalues;
use soliton_core::nls::nls_find_eigenvalues;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub bisection: usize,
    pub formula: usize,
    pub argument_principle: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub equation: EqArg,
    pub q: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub quiescent: bool,
    pub counts: Counts,
    pub scan_points: usize,
}

pub fn spectrum(settings: &Settings, out: &Path) -> Result<bool, CliError> {
    let (run, resolved) = SpectrumRun::resolve(settings)?;
    let writer = RunWriter::start(out, "spectrum")?;
    let result = match run.equation {
        EqArg::Nls => {
            let rep = nls_find_eigenvalues(&run.pot, run.tol)?;
            SpectrumResult {
                equation: run.equation,
                q: run.pot.q,
                r: run.pot.r,
                counts: Counts {
                    bisection: rep.count_bisection(),
                    formula: rep.count_formula,
                    argument_principle: rep.count_argument_principle,
                },
                eigenvalues: rep.eigenvalues,
                residuals: rep.residuals,
                quiescent: rep.quiescent,
                scan_points: rep.scan_points,
            }
        }
        EqArg::Kdv => {
            let rep = kdv_find_eigenvalues(&run.pot, run.tol)?;
            SpectrumResult {
                equation: run.equation,
                q: run.pot.q,
                r: run.pot.r,
                counts: Counts {
                    bisection: rep.count(),
                    formula: rep.count_formula,
                    argument_principle: None,
                },
                eigenvalues: rep.eigenvalues,
                residuals: rep.residuals,
                quiescent: rep.quiescent,
                scan_points: rep.scan_points,
            }
        }
    };
    let c = &result.counts;
    let passed = c.bisection == c.formula && c.argument_principle.is_none_or(|a| a == c.formula);
    let mut table = Table::new(vec!["index", "eta", "residual"]);
    for (i, (eta, res)) in result.eigenvalues.iter().zip(&result.residuals).enumerate() {
        table.push(vec![i.to_string(), fmt_f64(*eta), fmt_f64(*res)]);
    }
    let paths = writer.finish(resolved, &table, passed, &result)?;
    println!(
        "{} eigenvalue(s); counts bisection {} formula {} argument principle {}",
        result.eigenvalues.len(),
        c.bisection,
        c.formula,
        c.argument_principle.map_or("n/a".into(), |a| a.to_string())
    );
    report_paths(&paths);
    if !passed {
        eprintln!("eigenvalue counts disagree");
    }
    Ok(passed)
}

fn first_order_table(report: &ValidationReport) -> Table {
    let mut t = Table::new(vec![
        "path_id",
        "sigma",
        "w_terminal",
        "w2_terminal",
        "formula_d_eta",
        "formula_d_xi",
        "direct_eta",
        "direct_xi",
        "direct_d_eta",
        "direct_d_xi",
    ]);
    let Records::FirstOrder { records, summary } = &report.data else {
        return t;
    };
    for r in records {
        for d in &r.direct {
            let s = report.config.noise.with_sigma(d.sigma).intensity();
            t.push(vec![
                r.path_id.to_string(),
                fmt_f64(d.sigma),
                fmt_f64(r.w_terminal),
                fmt_opt(r.w2_terminal),
                fmt_f64(r.formula_d_eta),
                fmt_f64(r.formula_d_xi),
                fmt_opt(d.eta),
                fmt_opt(d.xi),
                fmt_opt(d.eta.map(|e| (e - summary.eta0) / s)),
                fmt_opt(d.xi.map(|x| x / s)),
            ]);
        }
    }
    t
}

fn creation_table(report: &ValidationReport) -> Table {
    let mut t = Table::new(vec![
        "path_id",
        "w_terminal",
        "formula_d_eta",
        "created_formula",
        "created_direct",
        "eta_direct",
        "ratio",
    ]);
    if let Records::Creation { records, .. } = &report.data {
        for r in records {
            t.push(vec![
                r.path_id.to_string(),
                fmt_f64(r.w_terminal),
                fmt_f64(r.formula_d_eta),
                r.created_formula.to_string(),
                r.created_direct.to_string(),
                fmt_opt(r.eta_direct),
                fmt_opt(r.ratio),
            ]);
        }
    }
    t
}

fn diffusion_table(report: &ValidationReport) -> Table {
    let mut t = Table::new(vec![
        "epsilon",
        "mean_re",
        "mean_im",
        "se",
        "discrepancy",
        "second_moment",
        "second_moment_se",
        "second_moment_discrepancy",
    ]);
    if let Records::Diffusion { records, .. } = &report.data {
        for r in records {
            t.push(vec![
                fmt_f64(r.epsilon),
                fmt_f64(r.mean_re),
                fmt_f64(r.mean_im),
                fmt_f64(r.se),
                fmt_f64(r.discrepancy),
                fmt_f64(r.second_moment),
                fmt_f64(r.second_moment_se),
                fmt_f64(r.second_moment_discrepancy),
            ]);
        }
    }
    t
}

fn print_checks(report: &ValidationReport) {
    for c in &report.checks {
        println!(
            "  {:<32} {:>12} {}{}",
            c.name,
            c.value.map_or("n/a".into(), |v| format!("{v:.6}")),
            if c.passed { "pass" } else { "FAIL" },
            if c.gating { "" } else { " (advisory)" }
        );
    }
    if !report.failures.is_empty() {
        println!("  {} path(s) failed", report.failures.len());
    }
}

fn report_paths(paths: &[std::path::PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

pub fn perturb(settings: &Settings, out: &Path) -> Result<bool, CliError> {
    let (run, resolved) = PerturbRun::resolve(settings)?;
    let writer = RunWriter::start(out, "perturb")?;
    let (report, table) = match run.mode {
        ModeArg::Validate => {
            let r = run_first_order_validation(&run.config)?;
            let t = first_order_table(&r);
            (r, t)
        }
        ModeArg::Creation => {
            let r = run_creation_probability(&run.config)?;
            let t = creation_table(&r);
            (r, t)
        }
    };
    let passed = report.passed();
    let paths = writer.finish(resolved, &table, passed, &report)?;
    print_checks(&report);
    report_paths(&paths);
    Ok(passed)
}

pub fn converge(settings: &Settings, out: &Path) -> Result<bool, CliError> {
    let (run, resolved) = ConvergeRun::resolve(settings)?;
    let writer = RunWriter::start(out, "converge")?;
    let report = run_diffusion_convergence(&run.config)?;
    let passed = report
        .check("discrepancy_non_increasing")
        .is_none_or(|c| c.passed);
    let table = diffusion_table(&report);
    let paths = writer.finish(resolved, &table, passed, &report)?;
    print_checks(&report);
    report_paths(&paths);
    Ok(passed)
}
