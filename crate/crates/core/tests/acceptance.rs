//! Acceptance suite. Runs every criterion at its pinned tolerance, prints one
//! line per criterion and exits non-zero when any of them fails.

use num_complex::Complex64;
use soliton_core::experiments::{
    run_creation_probability, run_diffusion_convergence, run_first_order_validation, Equation,
    ExperimentConfig, Records, ValidationReport,
};
use soliton_core::kdv::{kdv_count_formula, kdv_final_condition, kdv_find_eigenvalues};
use soliton_core::nls::{nls_count_formula, nls_find_eigenvalues, nls_jost_box, nls_jost_coefficient_a};
use soliton_core::perturbation::{kdv_eta_denominator, nls_d_eta_f};
use soliton_core::sde::{Integrator, LimitEquation, LimitSystemSpec, Scheme};
use soliton_core::stats::log_log_slope;
use soliton_core::{BoxPotential, BrownianPath, NoiseSpec, PathGrid, SpectralPoint};
use std::f64::consts::{FRAC_PI_2, PI};
use std::time::{Duration, Instant};

type Outcome = Result<(bool, String), String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn pot(q: f64, r: f64) -> BoxPotential {
    BoxPotential::new(q, r).unwrap()
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn nls_counts() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for q in [0.5, 1.0, 2.0] {
        for r in [1.0, 2.0, 5.0] {
            let p = pot(q, r);
            let qr = q * r;
            let k = ((qr / FRAC_PI_2 - 1.0) / 2.0).round();
            if (qr - (2.0 * k + 1.0) * FRAC_PI_2).abs() < 0.05 {
                continue;
            }
            let rep = nls_find_eigenvalues(&p, 1e-10).map_err(err)?;
            let formula = nls_count_formula(&p);
            let ap = rep.count_argument_principle;
            let good = rep.count_bisection() == formula && ap == Some(formula);
            ok &= good;
            detail.push(format!("({q},{r}):{}/{formula}/{ap:?}", rep.count_bisection()));
        }
    }
    Ok((ok, detail.join(" ")))
}

fn kdv_counts() -> Outcome {
    let expected = [1usize, 2, 3, 4];
    let mut ok = true;
    let mut found = Vec::new();
    for (q, want) in [5.0, 15.0, 50.0, 100.0].into_iter().zip(expected) {
        let p = pot(q, 1.0);
        let n = kdv_find_eigenvalues(&p, 1e-10).map_err(err)?.count();
        ok &= n == want && kdv_count_formula(&p) == want;
        found.push(n);
    }
    let thresholds = [PI * PI, 4.0 * PI * PI, 9.0 * PI * PI];
    for (j, t) in thresholds.iter().enumerate() {
        ok &= kdv_count_formula(&pot(t - 1e-6, 1.0)) == j + 1;
        ok &= kdv_count_formula(&pot(t + 1e-6, 1.0)) == j + 2;
    }
    Ok((ok, format!("counts {found:?}, expected {expected:?}")))
}

fn kdv_special() -> Outcome {
    let rep = kdv_find_eigenvalues(&pot(PI * PI / 2.0, 1.0), 1e-10).map_err(err)?;
    let best = rep
        .eigenvalues
        .iter()
        .map(|e| (e - FRAC_PI_2).abs())
        .fold(f64::INFINITY, f64::min);
    Ok((best <= 1e-8, format!("|eta - pi/2| = {best:.2e}")))
}

fn kdv_small_q() -> Outcome {
    let r = 1.0;
    let qs = [1e-1, 1e-2, 1e-3, 1e-4];
    let mut residuals = Vec::new();
    for &q in &qs {
        let rep = kdv_find_eigenvalues(&pot(q, r), 1e-12).map_err(err)?;
        let eta = *rep.eigenvalues.first().ok_or("no eigenvalue")?;
        residuals.push((eta - r * q / 2.0).abs());
    }
    let slope = log_log_slope(&qs, &residuals);
    // Intercept of the log-log fit with the slope fixed at 2.
    let log_c = qs
        .iter()
        .zip(&residuals)
        .map(|(q, d)| d.ln() - 2.0 * q.ln())
        .sum::<f64>()
        / qs.len() as f64;
    let coeff = log_c.exp();
    let target = r * r * r / 12.0;
    let rel = (coeff - target).abs() / target;
    Ok((
        (slope - 2.0).abs() <= 0.2 && rel <= 0.1,
        format!("slope {slope:.4}, coefficient {coeff:.5} vs {target:.5} (rel {rel:.2e})"),
    ))
}

fn check_line(report: &ValidationReport, names: &[&str]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in names {
        match report.check(name) {
            Some(c) => {
                ok &= c.passed;
                let v = c.value.map_or("n/a".into(), |v| format!("{v:.4}"));
                parts.push(format!("{name}={v}{}", if c.passed { "" } else { "(x)" }));
            }
            None => {
                ok = false;
                parts.push(format!("{name}=missing"));
            }
        }
    }
    if !report.failures.is_empty() {
        ok = false;
        parts.push(format!("{} path failures", report.failures.len()));
    }
    (ok, parts.join(" "))
}

fn nls_first_order() -> Outcome {
    let cfg = ExperimentConfig::new(Equation::Nls, pot(1.0, 3.0), NoiseSpec::white(0.01), 1000, 3000, 20_240_501)
        .map_err(err)?
        .with_sigma_ladder(vec![0.02, 0.01, 0.005]);
    let rep = run_first_order_validation(&cfg).map_err(err)?;
    let (ok, mut line) = check_line(
        &rep,
        &["correlation_eta", "mean_eta_within_3se", "variance_ratio_eta", "xi_scaling"],
    );
    if let Some(note) = rep.check("xi_scaling").and_then(|c| c.note.clone()) {
        line.push_str(&format!(" [{note}]"));
    }
    Ok((ok, line))
}

fn nls_complex() -> Outcome {
    let cfg = ExperimentConfig::new(
        Equation::Nls,
        pot(1.0, 3.0),
        NoiseSpec::complex_white(0.01),
        1000,
        3000,
        20_240_502,
    )
    .map_err(err)?;
    let rep = run_first_order_validation(&cfg).map_err(err)?;
    let (ok, line) = check_line(&rep, &["xi_eta_correlation_within_3se", "xi_eta_variance_ratio"]);
    let (_, extra) = check_line(&rep, &["correlation_xi", "variance_ratio_xi", "correlation_eta"]);
    Ok((ok, format!("{line} | oracle: {extra}")))
}

fn kdv_first_order() -> Outcome {
    let cfg = ExperimentConfig::new(Equation::Kdv, pot(5.0, 1.0), NoiseSpec::white(0.01), 1000, 1000, 20_240_503)
        .map_err(err)?;
    let rep = run_first_order_validation(&cfg).map_err(err)?;
    Ok(check_line(&rep, &["correlation_eta", "mean_eta_within_3se", "variance_ratio_eta"]))
}

fn creation() -> Outcome {
    let cases = [
        ("NLS", Equation::Nls, pot(1.0, FRAC_PI_2), 2000usize),
        ("KdV", Equation::Kdv, pot(PI * PI, 1.0), 1000),
        ("KdV q=0", Equation::Kdv, pot(0.0, 1.0), 1000),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, (label, eq, p, n_steps)) in cases.into_iter().enumerate() {
        let cfg = ExperimentConfig::new(eq, p, NoiseSpec::white(0.01), 2000, n_steps, 20_240_510 + k as u64)
            .map_err(err)?;
        let rep = run_creation_probability(&cfg).map_err(err)?;
        let Records::Creation { summary, .. } = &rep.data else {
            return Err("unexpected report kind".into());
        };
        let frac_ok = (summary.fraction_direct - 0.5).abs() <= 0.033;
        let ratio_ok = summary.ratio_mean.is_some_and(|m| (0.95..=1.05).contains(&m));
        ok &= frac_ok && ratio_ok && rep.failures.is_empty();
        parts.push(format!(
            "{label}: fraction {:.4}{} ratio {}{}",
            summary.fraction_direct,
            if frac_ok { "" } else { "(x)" },
            summary.ratio_mean.map_or("n/a".into(), |m| format!("{m:.4}")),
            if ratio_ok { "" } else { "(x)" },
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn diffusion() -> Outcome {
    let cases = [
        ("NLS", Equation::Nls, pot(1.0, 2.0), 0.5, 2000usize),
        ("KdV", Equation::Kdv, pot(1.0, 1.0), 0.3, 1000),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, (label, eq, p, eta, n_steps)) in cases.into_iter().enumerate() {
        let mut noise = NoiseSpec::white(0.3);
        noise.alpha = 0.5;
        let cfg = ExperimentConfig::new(eq, p, noise, 2000, n_steps, 20_240_520 + k as u64)
            .map_err(err)?
            .with_epsilon_ladder(vec![0.4, 0.2, 0.1])
            .with_zeta(SpectralPoint::imaginary(eta).map_err(err)?);
        let rep = run_diffusion_convergence(&cfg).map_err(err)?;
        let Records::Diffusion { records, .. } = &rep.data else {
            return Err("unexpected report kind".into());
        };
        let (good, line) = check_line(&rep, &["discrepancy_non_increasing", "final_within_3se"]);
        ok &= good;
        let ds: Vec<String> = records
            .iter()
            .map(|r| format!("{:.1e}±{:.1e}", r.discrepancy, r.se))
            .collect();
        parts.push(format!("{label}: {line} d=[{}]", ds.join(", ")));
    }
    Ok((ok, parts.join("; ")))
}

/// `∂ξψ₁(R)` by the trapezoidal Cauchy integral on a small circle in the `ζ` plane.
fn cauchy_derivative(p: &BoxPotential, zeta: Complex64) -> Complex64 {
    let n = 64;
    let rho = 0.05 * zeta.im.max(0.2);
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        let u = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64);
        let z = zeta + rho * u;
        acc += nls_jost_coefficient_a(p, SpectralPoint { xi: z.re, eta: z.im }) * (-Complex64::i() * z * p.r).exp() / u;
    }
    acc / (n as f64 * rho)
}

fn analytic_cross_checks() -> Outcome {
    let mut ok = true;
    let mut worst_jac: f64 = 0.0;
    for q in [0.5, 1.0, 2.0] {
        for r in [1.0, 2.0, 3.0, 5.0] {
            let p = pot(q, r);
            let Ok(rep) = nls_find_eigenvalues(&p, 1e-10) else { continue };
            for &eta in &rep.eigenvalues {
                let zeta = Complex64::new(0.0, eta);
                let d_xi = cauchy_derivative(&p, zeta);
                let d_eta = nls_d_eta_f(&p, zeta);
                let diff = (Complex64::i() * d_xi - d_eta).norm() / d_eta.norm().max(1.0);
                worst_jac = worst_jac.max(diff);
            }
        }
    }
    ok &= worst_jac <= 1e-12;

    let mut worst_den: f64 = 0.0;
    for q in [5.0, 15.0, 50.0, 100.0] {
        for r in [0.5, 1.0, 1.5] {
            let p = pot(q, r);
            let rep = kdv_find_eigenvalues(&p, 1e-10).map_err(err)?;
            for &eta in &rep.eigenvalues {
                let h = 1e-5 * eta.min(q.sqrt() - eta).min(1.0);
                let fd = (kdv_final_condition(&p, eta + h).map_err(err)?
                    - kdv_final_condition(&p, eta - h).map_err(err)?)
                    / (2.0 * h);
                let den = kdv_eta_denominator(&p, eta).map_err(err)?;
                ok &= den.abs() > 1e-6;
                worst_den = worst_den.max((den - fd).abs() / den.abs());
            }
        }
    }
    ok &= worst_den <= 1e-5;

    let orders = richardson_orders().map_err(err)?;
    // Gate on the production scheme; Heun approaches 2 from below and is listed only.
    let min_order = orders
        .iter()
        .filter(|(n, _)| n.ends_with("WongZakaiRk4"))
        .map(|(_, o)| *o)
        .fold(f64::INFINITY, f64::min);
    ok &= min_order >= 2.0;
    let listed: Vec<String> = orders.iter().map(|(n, o)| format!("{n} {o:.5}")).collect();
    Ok((
        ok,
        format!(
            "jacobian {worst_jac:.1e}, kdv denominator rel {worst_den:.1e}, orders [{}]",
            listed.join(", ")
        ),
    ))
}

fn richardson_orders() -> soliton_core::Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    let p = pot(1.3, 2.0);
    let zeta = SpectralPoint::new(0.3, 0.4)?;
    let exact = nls_jost_box(&p, zeta, p.r)?;
    let kzeta = SpectralPoint::imaginary(0.4)?;
    let kdv_exact = {
        let c = (p.q - 0.16f64).sqrt();
        let x = p.r;
        ((c * x).cos() + 0.4 * (c * x).sin() / c, -c * (c * x).sin() + 0.4 * (c * x).cos())
    };
    for scheme in [Scheme::WongZakaiRk4, Scheme::Heun] {
        let mut errs = Vec::new();
        let mut kerrs = Vec::new();
        let ns = [32usize, 64, 128];
        for n in ns {
            let w = BrownianPath::zero(PathGrid::new(p.r, n)?);
            let spec = LimitSystemSpec {
                equation: LimitEquation::NlsReal,
                pot: p,
                zeta,
                noise: NoiseSpec::white(0.0),
            };
            let s = Integrator::new(scheme).nls_limit(&spec, &w)?.terminal_state;
            errs.push(((s.psi1 - exact.psi1).norm_sqr() + (s.psi2 - exact.psi2).norm_sqr()).sqrt());
            let kspec = LimitSystemSpec {
                equation: LimitEquation::Kdv,
                zeta: kzeta,
                ..spec
            };
            let k = Integrator::new(scheme).kdv_limit(&kspec, &w)?.terminal_state;
            kerrs.push(((k.phi - kdv_exact.0).powi(2) + (k.phi_x - kdv_exact.1).powi(2)).sqrt());
        }
        // Order from the finest halving, log2(e(h) / e(h/2)).
        let order = |e: &[f64]| (e[e.len() - 2] / e[e.len() - 1]).log2();
        out.push((format!("nls-{scheme:?}"), order(&errs)));
        out.push((format!("kdv-{scheme:?}"), order(&kerrs)));
    }
    Ok(out)
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "NLS soliton counts", budget: Duration::from_secs(5), run: nls_counts },
        Criterion { id: 2, name: "KdV soliton counts", budget: Duration::from_secs(5), run: kdv_counts },
        Criterion { id: 3, name: "KdV special eigenvalue", budget: Duration::from_secs(1), run: kdv_special },
        Criterion { id: 4, name: "KdV small-q asymptotics", budget: Duration::from_secs(5), run: kdv_small_q },
        Criterion { id: 5, name: "NLS first-order validation", budget: Duration::from_secs(300), run: nls_first_order },
        Criterion { id: 6, name: "NLS complex-noise validation", budget: Duration::from_secs(300), run: nls_complex },
        Criterion { id: 7, name: "KdV first-order validation", budget: Duration::from_secs(300), run: kdv_first_order },
        Criterion { id: 8, name: "Creation probabilities", budget: Duration::from_secs(600), run: creation },
        Criterion { id: 9, name: "Diffusion approximation", budget: Duration::from_secs(1800), run: diffusion },
        Criterion { id: 10, name: "Analytic cross-checks", budget: Duration::from_secs(60), run: analytic_cross_checks },
    ];
    let filter: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = Vec::new();
    for c in criteria.iter().filter(|c| filter.is_none_or(|f| f == c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let (passed, detail) = match outcome {
            Ok((p, d)) => (p && in_time, d),
            Err(e) => (false, format!("error: {e}")),
        };
        println!(
            "criterion {:>2} {}: {} ({:.2}s of {}s) {}",
            c.id,
            c.name,
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            c.budget.as_secs(),
            detail
        );
        if !passed {
            failed.push(c.id);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
