//! Monte Carlo campaigns.
//!
//! Every campaign draws path `i` from seed `base_seed + i`, so reports do not
//! depend on the number of worker threads. The direct re-solve integrates the
//! limit system along the same path at trial spectral parameters and locates
//! the perturbed root; it is the reference against which the first-order
//! formulas are judged.

use crate::error::{Error, Result};
use crate::kdv::{self, kdv_critical_index, kdv_find_eigenvalues};
use crate::nls::{self, nls_critical_index, nls_find_eigenvalues, BoxPotential, SpectralPoint};
use crate::perturbation::{
    kdv_critical_correction, kdv_eta_correction, kdv_eta_denominator, kdv_zero_q_correction,
    nls_complex_corrections, nls_eta_correction, nls_eta_denominator, nls_quiescent_correction,
    CorrectionResult, DENOMINATOR_FLOOR,
};
use crate::roots::brent;
use crate::sde::{
    integrate_eps_streaming, nls_first_order_kernels, Integrator, LimitEquation, LimitSystemSpec,
    TelegraphParams,
};
use crate::stats;
use crate::stochastic::{path_seed, sample_brownian_stream, BrownianPath, NoiseKind, NoiseSpec, PathGrid};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::sde::Equation;

/// Below this mean `|Δξ|` the velocity is treated as exactly invariant.
pub const XI_FLOOR: f64 = 1e-12;

/// Integration tolerance for noise-free comparisons.
pub const CONTROL_TOL: f64 = 1e-6;

/// Largest admissible `dx · ω` on the limit-system grid, `ω` being the
/// fastest deterministic frequency of the flow.
pub const MAX_PHASE_STEP: f64 = 0.1;

const ROOT_XTOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub equation: Equation,
    pub pot: BoxPotential,
    pub noise: NoiseSpec,
    pub n_paths: usize,
    pub grid: PathGrid,
    pub base_seed: u64,
    pub sigma_ladder: Vec<f64>,
    pub epsilon_ladder: Vec<f64>,
    /// Spectral parameter for the convergence campaign.
    pub zeta: Option<SpectralPoint>,
}

impl ExperimentConfig {
    pub fn new(
        equation: Equation,
        pot: BoxPotential,
        noise: NoiseSpec,
        n_paths: usize,
        n_steps: usize,
        base_seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            equation,
            pot,
            noise,
            n_paths,
            grid: PathGrid::new(pot.r, n_steps)?,
            base_seed,
            sigma_ladder: Vec::new(),
            epsilon_ladder: Vec::new(),
            zeta: None,
        })
    }

    pub fn with_sigma_ladder(self, sigma_ladder: Vec<f64>) -> Self {
        Self { sigma_ladder, ..self }
    }

    pub fn with_epsilon_ladder(self, epsilon_ladder: Vec<f64>) -> Self {
        Self {
            epsilon_ladder,
            ..self
        }
    }

    pub fn with_zeta(self, zeta: SpectralPoint) -> Self {
        Self {
            zeta: Some(zeta),
            ..self
        }
    }

    pub fn is_complex(&self) -> bool {
        self.noise.kind == NoiseKind::ComplexWhite
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.n_paths < 100 {
            return Err(Error::InvalidParameter(format!(
                "n_paths must be at least 100, got {}",
                self.n_paths
            )));
        }
        if (self.grid.x_max() - self.pot.r).abs() > 1e-12 * self.pot.r {
            return Err(Error::GridMismatch {
                x_max: self.grid.x_max(),
                n_steps: self.grid.n_steps(),
                expected: format!("the potential width R = {}", self.pot.r),
            });
        }
        check_ladder("sigma_ladder", &self.sigma_ladder)?;
        check_ladder("epsilon_ladder", &self.epsilon_ladder)?;
        if self.is_complex() && self.equation == Equation::Kdv {
            return Err(Error::InvalidParameter("complex noise is defined for NLS only".into()));
        }
        Ok(())
    }
}

/// Rejects limit-system grids with `dx · ω > MAX_PHASE_STEP`.
pub fn check_resolution(equation: Equation, pot: &BoxPotential, zeta: SpectralPoint, grid: &PathGrid) -> Result<()> {
    let z = zeta.as_complex();
    let omega = match equation {
        Equation::Nls => pot.q.max(z.norm()),
        Equation::Kdv => (pot.q + z.norm_sqr()).sqrt(),
    }
    .max(1.0);
    let step = grid.dx() * omega;
    if step > MAX_PHASE_STEP {
        return Err(Error::UnderResolved(format!(
            "grid step {} times frequency {omega} is {step}, above {MAX_PHASE_STEP}",
            grid.dx()
        )));
    }
    Ok(())
}

fn check_ladder(name: &str, ladder: &[f64]) -> Result<()> {
    if ladder.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidParameter(format!("{name} entries must be positive and finite")));
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be strictly decreasing, got {ladder:?}"
        )));
    }
    Ok(())
}

/// One pass/fail line of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub passed: bool,
    /// Non-gating checks are reported but do not affect [`ValidationReport::passed`].
    pub gating: bool,
    pub note: Option<String>,
}

impl Check {
    fn range(name: &str, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let passed = value.is_finite()
            && lower.is_none_or(|l| value >= l)
            && upper.is_none_or(|u| value <= u);
        Self {
            name: name.into(),
            value: finite(value),
            lower,
            upper,
            passed,
            gating: true,
            note: None,
        }
    }

    fn advisory(self) -> Self {
        Self { gating: false, ..self }
    }

    fn with_note(self, note: impl Into<String>) -> Self {
        Self {
            note: Some(note.into()),
            ..self
        }
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathFailure {
    pub path_id: u64,
    pub message: String,
}

/// Direct re-solve at one noise amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectSample {
    pub sigma: f64,
    pub eta: Option<f64>,
    pub xi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderRecord {
    pub path_id: u64,
    pub w_terminal: f64,
    pub w2_terminal: Option<f64>,
    pub formula_d_eta: f64,
    pub formula_d_xi: f64,
    pub direct: Vec<DirectSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaRow {
    pub sigma: f64,
    pub n_roots: usize,
    /// Mean of `|ξ_direct|`.
    pub mean_abs_xi: Option<f64>,
    /// Root mean square of `η_direct − η₀ − s·d_eta`.
    pub rms_remainder: Option<f64>,
    /// Mean of `(η_direct − η₀ − s·d_eta) / s²`.
    pub mean_remainder_over_s2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderSummary {
    pub eta0: f64,
    pub denominator: f64,
    pub variance_eta_analytic: f64,
    pub variance_xi_analytic: f64,
    pub mean_eta: Option<f64>,
    pub se_eta: Option<f64>,
    pub variance_eta: Option<f64>,
    pub mean_xi: Option<f64>,
    pub se_xi: Option<f64>,
    pub variance_xi: Option<f64>,
    pub correlation_eta: Option<f64>,
    pub correlation_xi: Option<f64>,
    pub correlation_xi_eta: Option<f64>,
    pub direct_mean_eta: Option<f64>,
    pub direct_variance_eta: Option<f64>,
    pub ks_eta: Option<f64>,
    pub ks_xi: Option<f64>,
    pub xi_slope: Option<f64>,
    pub remainder_slope: Option<f64>,
    pub per_sigma: Vec<SigmaRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreationRecord {
    pub path_id: u64,
    pub w_terminal: f64,
    pub formula_d_eta: f64,
    pub created_formula: bool,
    pub created_direct: bool,
    pub eta_direct: Option<f64>,
    /// `η_direct / (s · d_eta)` for created solitons.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreationSummary {
    pub fraction_direct: f64,
    pub fraction_formula: f64,
    pub binomial_se: f64,
    pub agreement: f64,
    pub n_created: usize,
    pub ratio_mean: Option<f64>,
    pub ratio_median: Option<f64>,
    pub ratio_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionRecord {
    pub epsilon: f64,
    pub mean_re: f64,
    pub mean_im: f64,
    /// Standard error of the complex mean, `√(Var Re + Var Im) / √n`.
    pub se: f64,
    /// `|E[X^ε(R)] − E[X(R)]|` against the exact limit mean.
    pub discrepancy: f64,
    pub second_moment: f64,
    pub second_moment_se: f64,
    pub second_moment_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSummary {
    pub limit_mean_re: f64,
    pub limit_mean_im: f64,
    pub limit_mc_mean_re: f64,
    pub limit_mc_mean_im: f64,
    pub limit_mc_se: f64,
    pub limit_mc_second_moment: f64,
    pub limit_mc_second_moment_se: f64,
    pub control_max_discrepancy: Option<f64>,
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Records {
    FirstOrder {
        records: Vec<FirstOrderRecord>,
        summary: FirstOrderSummary,
    },
    Creation {
        records: Vec<CreationRecord>,
        summary: CreationSummary,
    },
    Diffusion {
        records: Vec<DiffusionRecord>,
        summary: DiffusionSummary,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config: ExperimentConfig,
    pub data: Records,
    pub checks: Vec<Check>,
    pub failures: Vec<PathFailure>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().filter(|c| c.gating).all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn limit_spec(equation: Equation, pot: &BoxPotential, noise: &NoiseSpec, zeta: SpectralPoint) -> LimitSystemSpec {
    LimitSystemSpec {
        equation: match equation {
            Equation::Nls if noise.kind == NoiseKind::ComplexWhite => LimitEquation::NlsComplex,
            Equation::Nls => LimitEquation::NlsReal,
            Equation::Kdv => LimitEquation::Kdv,
        },
        pot: *pot,
        zeta,
        noise: *noise,
    }
}

/// Final-condition value on the imaginary axis: `ψ₁(R)` (real there) for NLS,
/// `φₓ(R) + ηφ(R)` for KdV.
fn axis_final_condition(equation: Equation, pot: &BoxPotential, noise: &NoiseSpec, path: &BrownianPath, eta: f64) -> Result<f64> {
    let zeta = SpectralPoint { xi: 0.0, eta };
    let spec = limit_spec(equation, pot, &NoiseSpec { kind: NoiseKind::RealWhite, ..*noise }, zeta);
    let integ = Integrator::default();
    Ok(match equation {
        Equation::Nls => integ.nls_limit(&spec, path)?.terminal_state.psi1.re,
        Equation::Kdv => {
            let s = integ.kdv_limit(&spec, path)?.terminal_state;
            s.phi_x + eta * s.phi
        }
    })
}

/// `max|kernel| / |∂ηF|` at `eta0`, in units of noise intensity.
fn kernel_bound(equation: Equation, pot: &BoxPotential, eta0: f64) -> Result<f64> {
    const N: usize = 512;
    let (kmax, den) = match equation {
        Equation::Nls => {
            let den = nls_eta_denominator(pot, eta0)?;
            let kmax = (0..=N)
                .map(|j| {
                    let (k1, k2) = nls_first_order_kernels(pot.q, eta0, pot.r, pot.r * j as f64 / N as f64);
                    k1[0].norm().max(k2[0].norm())
                })
                .fold(0.0, f64::max);
            (kmax, den)
        }
        Equation::Kdv => {
            let den = if pot.q == 0.0 { 2.0 } else { kdv_eta_denominator(pot, eta0)? };
            let c = (pot.q - eta0 * eta0).sqrt();
            let phi = |t: f64| kdv::bound_closed_form(c, eta0, t).phi;
            let kmax = (0..=N)
                .map(|j| {
                    let y = pot.r * j as f64 / N as f64;
                    (phi(pot.r - y) * phi(y)).abs()
                })
                .fold(0.0, f64::max);
            (kmax, den)
        }
    };
    if den.abs() < DENOMINATOR_FLOOR {
        return Err(Error::DegenerateDenominator(den));
    }
    Ok(kmax / den.abs())
}

/// Root of the perturbed final condition along `path`, searched in
/// `η_hint ± 10 s √R B` with `s = √(2α)σ` and `B` the kernel bound. When
/// `η_hint = 0` the search interval is `(0, 10 s √R B]`. The interval is
/// widened fourfold once; `None` means no root was bracketed.
pub fn direct_eigenvalue_resolve(
    equation: Equation,
    pot: &BoxPotential,
    noise: &NoiseSpec,
    path: &BrownianPath,
    eta_hint: f64,
) -> Result<Option<f64>> {
    noise.validate()?;
    let top = match equation {
        Equation::Nls => pot.q,
        Equation::Kdv => pot.q.sqrt(),
    };
    if !(eta_hint >= 0.0 && (eta_hint < top || (eta_hint == 0.0 && top == 0.0))) {
        return Err(Error::OutOfDomain {
            name: "eta_hint",
            value: eta_hint,
            domain: format!("[0, {top})"),
        });
    }
    let f = |eta: f64| axis_final_condition(equation, pot, noise, path, eta);
    let s = noise.intensity();
    if s == 0.0 {
        return resolve_deterministic(equation, pot, eta_hint);
    }
    let half = 10.0 * s * pot.r.sqrt() * kernel_bound(equation, pot, eta_hint)?;
    // The upper edge is only bounded for NLS, where eigenvalues stay below q.
    let upper_cap = if equation == Equation::Nls { top } else { f64::INFINITY };
    for widen in [1.0, 4.0] {
        let w = half * widen;
        let (lo, hi) = if eta_hint == 0.0 {
            (0.0, w.min(upper_cap))
        } else {
            ((eta_hint - w).max(0.0), (eta_hint + w).min(upper_cap))
        };
        let (flo, fhi) = (f(lo)?, f(hi)?);
        if flo == 0.0 && lo > 0.0 {
            return Ok(Some(lo));
        }
        if (flo < 0.0) != (fhi < 0.0) {
            let err = std::cell::RefCell::new(None);
            let root = brent(
                |x| match f(x) {
                    Ok(v) => v,
                    Err(e) => {
                        err.borrow_mut().get_or_insert(e);
                        f64::NAN
                    }
                },
                lo,
                hi,
                ROOT_XTOL,
            );
            if let Some(e) = err.into_inner() {
                return Err(e);
            }
            return root.map(Some);
        }
    }
    Ok(None)
}

fn resolve_deterministic(equation: Equation, pot: &BoxPotential, eta_hint: f64) -> Result<Option<f64>> {
    let roots = match equation {
        Equation::Nls => nls_find_eigenvalues(pot, 1e-12)?.eigenvalues,
        Equation::Kdv if pot.q == 0.0 => Vec::new(),
        Equation::Kdv => kdv_find_eigenvalues(pot, 1e-12)?.eigenvalues,
    };
    if eta_hint == 0.0 {
        return Ok(None);
    }
    Ok(roots
        .into_iter()
        .min_by(|a, b| (a - eta_hint).abs().total_cmp(&(b - eta_hint).abs())))
}

/// Root `ζ` of `ψ₁(R; ζ)` for the NLS flow driven by `path1` (and `path2` for
/// complex noise), by complex secant iteration from two points near `start`.
/// `None` when the iteration leaves the upper half-plane or does not settle.
pub fn direct_complex_resolve(
    pot: &BoxPotential,
    noise: &NoiseSpec,
    path1: &BrownianPath,
    path2: Option<&BrownianPath>,
    start: SpectralPoint,
) -> Result<Option<SpectralPoint>> {
    noise.validate()?;
    let integ = Integrator::default();
    let f = |z: Complex64| -> Result<Complex64> {
        let zeta = SpectralPoint { xi: z.re, eta: z.im };
        Ok(match path2 {
            Some(p2) => {
                let spec = limit_spec(Equation::Nls, pot, &NoiseSpec { kind: NoiseKind::ComplexWhite, ..*noise }, zeta);
                integ.nls_complex_limit(&spec, path1, p2)?.terminal_state.psi1
            }
            None => {
                let spec = limit_spec(Equation::Nls, pot, &NoiseSpec { kind: NoiseKind::RealWhite, ..*noise }, zeta);
                integ.nls_limit(&spec, path1)?.terminal_state.psi1
            }
        })
    };
    let mut z0 = start.as_complex() + Complex64::new(1e-3, 0.0);
    let mut z1 = start.as_complex() + Complex64::new(-5e-4, 5e-4);
    let mut f0 = f(z0)?;
    let mut f1 = f(z1)?;
    for _ in 0..60 {
        let denom = f1 - f0;
        if denom.norm() == 0.0 {
            break;
        }
        let z2 = z1 - f1 * (z1 - z0) / denom;
        if !(z2.im > 0.0 && z2.im < pot.q && z2.re.abs() < pot.q) {
            return Ok(None);
        }
        let step = (z2 - z1).norm();
        z0 = z1;
        f0 = f1;
        z1 = z2;
        f1 = f(z1)?;
        if step < ROOT_XTOL || f1.norm() == 0.0 {
            return Ok(Some(SpectralPoint { xi: z1.re, eta: z1.im }));
        }
    }
    Ok(None)
}

fn largest_eigenvalue(equation: Equation, pot: &BoxPotential) -> Result<f64> {
    let eigs = match equation {
        Equation::Nls => nls_find_eigenvalues(pot, 1e-12)?.eigenvalues,
        Equation::Kdv => kdv_find_eigenvalues(pot, 1e-12)?.eigenvalues,
    };
    eigs.last()
        .copied()
        .ok_or_else(|| Error::NoEigenvalue(format!("q = {}, R = {}", pot.q, pot.r)))
}

fn sigma_list(cfg: &ExperimentConfig) -> Vec<f64> {
    let mut out = vec![cfg.noise.sigma];
    for &s in &cfg.sigma_ladder {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

fn first_order_correction(cfg: &ExperimentConfig, eta0: f64, w: &BrownianPath, w2: Option<&BrownianPath>) -> Result<CorrectionResult> {
    match (cfg.equation, w2) {
        (Equation::Nls, Some(w2)) => nls_complex_corrections(&cfg.pot, eta0, w, w2),
        (Equation::Nls, None) => nls_eta_correction(&cfg.pot, eta0, w),
        (Equation::Kdv, _) => kdv_eta_correction(&cfg.pot, eta0, w),
    }
}

fn first_order_path(cfg: &ExperimentConfig, eta0: f64, sigmas: &[f64], idx: usize) -> Result<FirstOrderRecord> {
    let seed = path_seed(cfg.base_seed, idx);
    let w = sample_brownian_stream(seed, 0, &cfg.grid);
    let w2 = cfg.is_complex().then(|| sample_brownian_stream(seed, 1, &cfg.grid));
    let corr = first_order_correction(cfg, eta0, &w, w2.as_ref())?;
    let mut direct = Vec::with_capacity(sigmas.len());
    for &sigma in sigmas {
        let noise = cfg.noise.with_sigma(sigma);
        let (eta, xi) = match (cfg.equation, w2.as_ref()) {
            (Equation::Nls, Some(w2)) => {
                let hint = SpectralPoint { xi: 0.0, eta: eta0 };
                match direct_complex_resolve(&cfg.pot, &noise, &w, Some(w2), hint)? {
                    Some(z) => (Some(z.eta), Some(z.xi)),
                    None => (None, None),
                }
            }
            (Equation::Nls, None) => {
                let eta = direct_eigenvalue_resolve(Equation::Nls, &cfg.pot, &noise, &w, eta0)?;
                let xi = match eta {
                    Some(e) => direct_complex_resolve(&cfg.pot, &noise, &w, None, SpectralPoint { xi: 0.0, eta: e })?
                        .map(|z| z.xi),
                    None => None,
                };
                (eta, xi)
            }
            (Equation::Kdv, _) => (direct_eigenvalue_resolve(Equation::Kdv, &cfg.pot, &noise, &w, eta0)?, None),
        };
        direct.push(DirectSample { sigma, eta, xi });
    }
    Ok(FirstOrderRecord {
        path_id: idx as u64,
        w_terminal: w.terminal(),
        w2_terminal: w2.as_ref().map(|p| p.terminal()),
        formula_d_eta: corr.d_eta,
        formula_d_xi: corr.d_xi,
        direct,
    })
}

fn split_results<T>(results: Vec<Result<T>>) -> (Vec<T>, Vec<PathFailure>) {
    let mut ok = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => failures.push(PathFailure {
                path_id: i as u64,
                message: e.to_string(),
            }),
        }
    }
    (ok, failures)
}

/// Formula corrections against the direct re-solve, path by path.
pub fn run_first_order_validation(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    let eta0 = largest_eigenvalue(cfg.equation, &cfg.pot)?;
    check_resolution(cfg.equation, &cfg.pot, SpectralPoint { xi: 0.0, eta: eta0 }, &cfg.grid)?;
    let zero = BrownianPath::zero(cfg.grid);
    let analytic = first_order_correction(cfg, eta0, &zero, cfg.is_complex().then_some(&zero))?;
    let sigmas = sigma_list(cfg);
    let results: Vec<Result<FirstOrderRecord>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| first_order_path(cfg, eta0, &sigmas, i))
        .collect();
    let (records, failures) = split_results(results);
    let summary = first_order_summary(cfg, eta0, &analytic, &sigmas, &records);
    let checks = first_order_checks(cfg, &summary, records.len());
    Ok(ValidationReport {
        config: cfg.clone(),
        data: Records::FirstOrder { records, summary },
        checks,
        failures,
    })
}

/// Rebuilds the summary of a first-order run from its records.
pub fn first_order_summary(
    cfg: &ExperimentConfig,
    eta0: f64,
    analytic: &CorrectionResult,
    sigmas: &[f64],
    records: &[FirstOrderRecord],
) -> FirstOrderSummary {
    let s0 = cfg.noise.with_sigma(sigmas[0]).intensity();
    let f_eta: Vec<f64> = records.iter().map(|r| r.formula_d_eta).collect();
    let f_xi: Vec<f64> = records.iter().map(|r| r.formula_d_xi).collect();

    let paired = |get: &dyn Fn(&DirectSample) -> Option<f64>, formula: &dyn Fn(&FirstOrderRecord) -> f64| {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for r in records {
            if let Some(v) = get(&r.direct[0]) {
                a.push(formula(r));
                b.push(v);
            }
        }
        (a, b)
    };
    let (fe, de) = paired(&|d| d.eta.map(|e| (e - eta0) / s0), &|r| r.formula_d_eta);
    let (fx, dx) = paired(&|d| d.xi.map(|x| x / s0), &|r| r.formula_d_xi);
    let opt = |xs: &[f64], f: fn(&[f64]) -> f64| (xs.len() >= 2).then(|| f(xs)).and_then(finite);

    let complex = cfg.is_complex();
    let per_sigma: Vec<SigmaRow> = sigmas
        .iter()
        .enumerate()
        .map(|(k, &sigma)| {
            let s = cfg.noise.with_sigma(sigma).intensity();
            let mut xi_abs = Vec::new();
            let mut rem = Vec::new();
            for r in records {
                let d = &r.direct[k];
                if let Some(x) = d.xi {
                    xi_abs.push(x.abs());
                }
                if let Some(e) = d.eta {
                    rem.push(e - eta0 - s * r.formula_d_eta);
                }
            }
            let n_roots = rem.len();
            SigmaRow {
                sigma,
                n_roots,
                mean_abs_xi: opt(&xi_abs, stats::mean),
                rms_remainder: (n_roots > 0)
                    .then(|| (rem.iter().map(|v| v * v).sum::<f64>() / n_roots as f64).sqrt()),
                mean_remainder_over_s2: (n_roots > 0).then(|| stats::mean(&rem) / (s * s)),
            }
        })
        .collect();

    let ladder_rows: Vec<&SigmaRow> = per_sigma
        .iter()
        .filter(|r| cfg.sigma_ladder.contains(&r.sigma))
        .collect();
    let slope_of = |get: &dyn Fn(&SigmaRow) -> Option<f64>| -> Option<f64> {
        let pts: Vec<(f64, f64)> = ladder_rows
            .iter()
            .filter_map(|r| get(r).filter(|v| *v > 0.0).map(|v| (r.sigma, v)))
            .collect();
        (pts.len() >= 2 && pts.len() == ladder_rows.len()).then(|| {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            stats::log_log_slope(&x, &y)
        })
    };
    let sd_eta = analytic.variance_eta.sqrt();
    let sd_xi = analytic.variance_xi.sqrt();
    FirstOrderSummary {
        eta0,
        denominator: analytic.denominator,
        variance_eta_analytic: analytic.variance_eta,
        variance_xi_analytic: analytic.variance_xi,
        mean_eta: opt(&f_eta, stats::mean),
        se_eta: opt(&f_eta, stats::std_error),
        variance_eta: opt(&f_eta, stats::variance),
        mean_xi: opt(&f_xi, stats::mean),
        se_xi: opt(&f_xi, stats::std_error),
        variance_xi: opt(&f_xi, stats::variance),
        correlation_eta: (fe.len() >= 2).then(|| stats::correlation(&fe, &de)),
        correlation_xi: (complex && fx.len() >= 2).then(|| stats::correlation(&fx, &dx)),
        correlation_xi_eta: (complex && f_eta.len() >= 2).then(|| stats::correlation(&f_xi, &f_eta)),
        direct_mean_eta: opt(&de, stats::mean),
        direct_variance_eta: opt(&de, stats::variance),
        ks_eta: (sd_eta > 0.0 && !f_eta.is_empty())
            .then(|| stats::ks_statistic_normal(&f_eta.iter().map(|v| v / sd_eta).collect::<Vec<_>>())),
        ks_xi: (complex && sd_xi > 0.0 && !f_xi.is_empty())
            .then(|| stats::ks_statistic_normal(&f_xi.iter().map(|v| v / sd_xi).collect::<Vec<_>>())),
        xi_slope: slope_of(&|r| r.mean_abs_xi),
        remainder_slope: slope_of(&|r| r.rms_remainder),
        per_sigma,
    }
}

fn opt_range(name: &str, value: Option<f64>, lower: Option<f64>, upper: Option<f64>) -> Check {
    Check::range(name, value.unwrap_or(f64::NAN), lower, upper)
}

fn first_order_checks(cfg: &ExperimentConfig, s: &FirstOrderSummary, n: usize) -> Vec<Check> {
    let mut checks = vec![
        opt_range("correlation_eta", s.correlation_eta, Some(0.99), None),
        opt_range(
            "mean_eta_within_3se",
            s.mean_eta.zip(s.se_eta).map(|(m, se)| m.abs() / se),
            None,
            Some(3.0),
        )
        .with_note("|mean| / SE of the formula corrections"),
        opt_range(
            "variance_ratio_eta",
            s.variance_eta.map(|v| v / s.variance_eta_analytic),
            Some(0.9),
            Some(1.1),
        ),
    ];
    if cfg.is_complex() {
        let se_corr = 1.0 / (n as f64).sqrt();
        checks.push(opt_range("correlation_xi", s.correlation_xi, Some(0.99), None));
        checks.push(
            opt_range(
                "mean_xi_within_3se",
                s.mean_xi.zip(s.se_xi).map(|(m, se)| m.abs() / se),
                None,
                Some(3.0),
            )
            .with_note("|mean| / SE of the formula corrections"),
        );
        checks.push(opt_range(
            "variance_ratio_xi",
            s.variance_xi.map(|v| v / s.variance_xi_analytic),
            Some(0.9),
            Some(1.1),
        ));
        checks.push(
            opt_range(
                "xi_eta_correlation_within_3se",
                s.correlation_xi_eta.map(f64::abs),
                None,
                Some(3.0 * se_corr),
            )
            .with_note("|corr(d_xi, d_eta)| against 3/sqrt(n)"),
        );
        checks.push(opt_range(
            "xi_eta_variance_ratio",
            s.variance_xi.zip(s.variance_eta).map(|(x, e)| x / e),
            Some(0.9),
            Some(1.1),
        ));
    } else if cfg.equation == Equation::Nls && !cfg.sigma_ladder.is_empty() {
        let max_xi = s
            .per_sigma
            .iter()
            .filter(|r| cfg.sigma_ladder.contains(&r.sigma))
            .filter_map(|r| r.mean_abs_xi)
            .fold(0.0, f64::max);
        let check = if max_xi < XI_FLOOR {
            Check {
                name: "xi_scaling".into(),
                value: s.xi_slope,
                lower: Some(1.8),
                upper: None,
                passed: true,
                gating: true,
                note: Some(format!(
                    "mean |xi_direct| <= {max_xi:e} at every sigma: velocity invariant to rounding"
                )),
            }
        } else {
            opt_range("xi_scaling", s.xi_slope, Some(1.8), None)
        };
        checks.push(check);
    }
    if cfg.sigma_ladder.len() >= 2 {
        checks.push(
            opt_range("remainder_slope", s.remainder_slope, Some(1.8), None)
                .advisory()
                .with_note("rms of eta_direct - eta0 - s d_eta against sigma"),
        );
    }
    let ks_crit = stats::ks_critical_01(n);
    checks.push(opt_range("ks_eta", s.ks_eta, None, Some(ks_crit)).advisory());
    if cfg.is_complex() {
        checks.push(opt_range("ks_xi", s.ks_xi, None, Some(ks_crit)).advisory());
    }
    checks
}

fn creation_correction(cfg: &ExperimentConfig, w: &BrownianPath) -> Result<CorrectionResult> {
    match cfg.equation {
        Equation::Nls => nls_quiescent_correction(&cfg.pot, w),
        Equation::Kdv if cfg.pot.q == 0.0 => kdv_zero_q_correction(w),
        Equation::Kdv => kdv_critical_correction(&cfg.pot, w),
    }
}

fn require_critical(cfg: &ExperimentConfig) -> Result<()> {
    let critical = match cfg.equation {
        Equation::Nls => nls_critical_index(&cfg.pot).is_some(),
        Equation::Kdv => cfg.pot.q == 0.0 || kdv_critical_index(&cfg.pot).is_some(),
    };
    if critical {
        Ok(())
    } else {
        Err(Error::NotCritical(match cfg.equation {
            Equation::Nls => format!(
                "qR = {} must be an odd multiple of pi/2 (within {:e})",
                cfg.pot.area(),
                nls::CRITICAL_TOL
            ),
            Equation::Kdv => format!(
                "sqrt(q) R = {} must be zero or a multiple of pi (within {:e})",
                cfg.pot.q.sqrt() * cfg.pot.r,
                nls::CRITICAL_TOL
            ),
        }))
    }
}

fn creation_path(cfg: &ExperimentConfig, idx: usize) -> Result<CreationRecord> {
    let w = sample_brownian_stream(path_seed(cfg.base_seed, idx), 0, &cfg.grid);
    let corr = creation_correction(cfg, &w)?;
    let eta = direct_eigenvalue_resolve(cfg.equation, &cfg.pot, &cfg.noise, &w, 0.0)?;
    let s = cfg.noise.intensity();
    let ratio = match eta {
        Some(e) if corr.d_eta != 0.0 => Some(e / (s * corr.d_eta)),
        _ => None,
    };
    Ok(CreationRecord {
        path_id: idx as u64,
        w_terminal: w.terminal(),
        formula_d_eta: corr.d_eta,
        created_formula: corr.d_eta > 0.0,
        created_direct: eta.is_some(),
        eta_direct: eta,
        ratio,
    })
}

/// Soliton creation at a critical configuration (or `q = 0` for KdV).
pub fn run_creation_probability(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    require_critical(cfg)?;
    check_resolution(cfg.equation, &cfg.pot, SpectralPoint { xi: 0.0, eta: 0.0 }, &cfg.grid)?;
    let results: Vec<Result<CreationRecord>> =
        (0..cfg.n_paths).into_par_iter().map(|i| creation_path(cfg, i)).collect();
    let (records, failures) = split_results(results);
    let summary = creation_summary(&records);
    let se3 = 3.0 * summary.binomial_se;
    let checks = vec![
        Check::range("creation_fraction", summary.fraction_direct, Some(0.5 - se3), Some(0.5 + se3)),
        opt_range("conditional_ratio_mean", summary.ratio_mean, Some(0.95), Some(1.05)),
        Check::range("formula_direct_agreement", summary.agreement, Some(0.95), None).advisory(),
    ];
    Ok(ValidationReport {
        config: cfg.clone(),
        data: Records::Creation { records, summary },
        checks,
        failures,
    })
}

/// Rebuilds the summary of a creation run from its records.
pub fn creation_summary(records: &[CreationRecord]) -> CreationSummary {
    let n = records.len().max(1) as f64;
    let created = records.iter().filter(|r| r.created_direct).count();
    let formula = records.iter().filter(|r| r.created_formula).count();
    let agree = records.iter().filter(|r| r.created_direct == r.created_formula).count();
    let mut ratios: Vec<f64> = records.iter().filter_map(|r| r.ratio).collect();
    let ratio_mean = (!ratios.is_empty()).then(|| stats::mean(&ratios)).and_then(finite);
    let ratio_se = (ratios.len() >= 2).then(|| stats::std_error(&ratios)).and_then(finite);
    ratios.sort_by(|a, b| a.total_cmp(b));
    let ratio_median = (!ratios.is_empty()).then(|| ratios[ratios.len() / 2]);
    CreationSummary {
        fraction_direct: created as f64 / n,
        fraction_formula: formula as f64 / n,
        binomial_se: (0.25 / n).sqrt(),
        agreement: agree as f64 / n,
        n_created: created,
        ratio_mean,
        ratio_median,
        ratio_se,
    }
}

/// Exact mean of the limit flow: `e^{−ασ²R}` times the deterministic solution
/// for NLS (the Itô drift), the deterministic solution itself for KdV.
pub fn limit_mean(equation: Equation, pot: &BoxPotential, zeta: SpectralPoint, noise: &NoiseSpec) -> Result<Complex64> {
    Ok(match equation {
        Equation::Nls => {
            let psi = nls::jost_closed_form(pot.q, zeta.as_complex(), pot.r);
            psi.psi1 * (-noise.alpha * noise.sigma * noise.sigma * pot.r).exp()
        }
        Equation::Kdv => {
            let z = zeta.as_complex();
            let c = (pot.q + z * z).sqrt();
            let s = crate::linalg::sinc_scaled(c, pot.r);
            (c * pot.r).cos() - Complex64::i() * z * s
        }
    })
}

fn complex_moments(xs: &[Complex64]) -> (Complex64, f64, f64, f64) {
    let re: Vec<f64> = xs.iter().map(|z| z.re).collect();
    let im: Vec<f64> = xs.iter().map(|z| z.im).collect();
    let n = xs.len() as f64;
    let mean = Complex64::new(stats::mean(&re), stats::mean(&im));
    let se = ((stats::variance(&re) + stats::variance(&im)) / n).sqrt();
    let sq: Vec<f64> = xs.iter().map(|z| z.norm_sqr()).collect();
    (mean, se, stats::mean(&sq), stats::std_error(&sq))
}

fn observable(equation: Equation, state: [Complex64; 2]) -> Complex64 {
    match equation {
        Equation::Nls | Equation::Kdv => state[0],
    }
}

/// Moments of the ε-system against the white-noise limit along an ε ladder.
pub fn run_diffusion_convergence(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    if cfg.epsilon_ladder.is_empty() {
        return Err(Error::InvalidParameter("epsilon_ladder is empty".into()));
    }
    let zeta = cfg.zeta.ok_or_else(|| Error::InvalidParameter("the convergence run needs zeta".into()))?;
    if cfg.equation == Equation::Kdv && zeta.xi != 0.0 {
        return Err(Error::InvalidParameter("the KdV run needs zeta on the imaginary axis".into()));
    }
    check_resolution(cfg.equation, &cfg.pot, zeta, &cfg.grid)?;
    let params = TelegraphParams::for_alpha(cfg.noise.alpha);
    for &eps in &cfg.epsilon_ladder {
        crate::stochastic::check_epsilon(eps)?;
        params.fast_grid(cfg.pot.r, eps)?;
    }
    let limit = limit_mean(cfg.equation, &cfg.pot, zeta, &cfg.noise)?;
    let white = NoiseSpec {
        kind: NoiseKind::RealWhite,
        epsilon: None,
        ..cfg.noise
    };
    let spec = limit_spec(cfg.equation, &cfg.pot, &white, zeta);
    let integ = Integrator::default();
    let limit_states: Vec<Result<Complex64>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let w = sample_brownian_stream(path_seed(cfg.base_seed, i), 0, &cfg.grid);
            Ok(match cfg.equation {
                Equation::Nls => integ.nls_limit(&spec, &w)?.terminal_state.psi1,
                Equation::Kdv => integ.kdv_limit(&spec, &w)?.terminal_state.phi.into(),
            })
        })
        .collect();
    let (limit_states, mut failures) = split_results(limit_states);
    let (lm, lse, l2, l2se) = complex_moments(&limit_states);

    let run_eps = |eps: f64, sigma: f64, k: usize| -> (Vec<Complex64>, Vec<PathFailure>) {
        let noise = NoiseSpec {
            sigma,
            epsilon: Some(eps),
            kind: NoiseKind::Telegraph,
            ..cfg.noise
        };
        let results: Vec<Result<Complex64>> = (0..cfg.n_paths)
            .into_par_iter()
            .map(|i| {
                integrate_eps_streaming(
                    cfg.equation,
                    &cfg.pot,
                    zeta,
                    &noise,
                    &params,
                    path_seed(cfg.base_seed, i),
                    2 + k as u64,
                )
                .map(|s| observable(cfg.equation, s))
            })
            .collect();
        split_results(results)
    };

    let mut records = Vec::with_capacity(cfg.epsilon_ladder.len());
    for (k, &eps) in cfg.epsilon_ladder.iter().enumerate() {
        let (xs, f) = run_eps(eps, cfg.noise.sigma, k);
        failures.extend(f);
        let (m, se, m2, m2se) = complex_moments(&xs);
        records.push(DiffusionRecord {
            epsilon: eps,
            mean_re: m.re,
            mean_im: m.im,
            se,
            discrepancy: (m - limit).norm(),
            second_moment: m2,
            second_moment_se: m2se,
            second_moment_discrepancy: (m2 - l2).abs(),
        });
    }
    // Noise-free control: the ε-system and the limit coincide.
    let control_max = if cfg.noise.sigma > 0.0 {
        let det = limit_mean(cfg.equation, &cfg.pot, zeta, &cfg.noise.with_sigma(0.0))?;
        let mut worst: f64 = 0.0;
        for &eps in &cfg.epsilon_ladder {
            let noise = NoiseSpec {
                sigma: 0.0,
                epsilon: Some(eps),
                kind: NoiseKind::Telegraph,
                ..cfg.noise
            };
            let s = integrate_eps_streaming(cfg.equation, &cfg.pot, zeta, &noise, &params, cfg.base_seed, 0)?;
            worst = worst.max((observable(cfg.equation, s) - det).norm());
        }
        Some(worst)
    } else {
        None
    };
    let summary = DiffusionSummary {
        limit_mean_re: limit.re,
        limit_mean_im: limit.im,
        limit_mc_mean_re: lm.re,
        limit_mc_mean_im: lm.im,
        limit_mc_se: lse,
        limit_mc_second_moment: l2,
        limit_mc_second_moment_se: l2se,
        control_max_discrepancy: control_max,
    };
    let checks = diffusion_checks(&records, &summary);
    Ok(ValidationReport {
        config: cfg.clone(),
        data: Records::Diffusion { records, summary },
        checks,
        failures,
    })
}

/// `d / se`, with `d` within [`CONTROL_TOL`] counted as zero.
fn in_se_units(d: f64, se: f64) -> f64 {
    if d.abs() <= CONTROL_TOL {
        0.0
    } else {
        d / se
    }
}

/// Largest violation of monotone decrease, in units of the combined standard
/// error of consecutive discrepancies.
pub fn monotone_excess(records: &[DiffusionRecord]) -> f64 {
    records
        .windows(2)
        .map(|w| {
            let se = (w[0].se.powi(2) + w[1].se.powi(2)).sqrt();
            in_se_units(w[1].discrepancy - w[0].discrepancy, se)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn diffusion_checks(records: &[DiffusionRecord], s: &DiffusionSummary) -> Vec<Check> {
    let last = records.last().expect("non-empty ladder");
    let mut checks = Vec::new();
    if records.len() >= 2 {
        checks.push(
            Check::range("discrepancy_non_increasing", monotone_excess(records), None, Some(3.0))
                .with_note("max over consecutive pairs of (d_next - d_prev) / combined SE"),
        );
    }
    checks.push(
        Check::range(
            "final_within_3se",
            in_se_units(last.discrepancy, last.se),
            None,
            Some(3.0),
        )
        .with_note("discrepancy at the smallest epsilon over its SE"),
    );
    let lim = Complex64::new(s.limit_mean_re, s.limit_mean_im);
    let mc = Complex64::new(s.limit_mc_mean_re, s.limit_mc_mean_im);
    checks.push(
        Check::range(
            "limit_mc_consistent",
            in_se_units((mc - lim).norm(), s.limit_mc_se),
            None,
            Some(4.0),
        )
        .advisory()
        .with_note("limit-SDE Monte Carlo mean against the exact limit mean, in SE"),
    );
    if let Some(c) = s.control_max_discrepancy {
        checks.push(Check::range("noise_free_control", c, None, Some(CONTROL_TOL)));
    }
    checks
}
