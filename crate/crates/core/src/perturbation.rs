//! First-order corrections of discrete eigenvalues under small white noise.
//!
//! With `F(ξ, η, σ)` the final-condition function of the perturbed flow and
//! `(0, η₀, 0)` a deterministic root, the implicit function theorem gives
//!
//! ```text
//! (∂σξ, ∂ση) = −J⁻¹ (Re ∂σF, Im ∂σF)
//! ```
//!
//! where `J` is the Jacobian of `(Re F, Im F)` in `(ξ, η)`. For NLS on the
//! imaginary axis `J = [[0, α], [−α, 0]]` with `α = ∂ηF` real, so
//! `∂σξ = Im ∂σF / α` and `∂ση = −Re ∂σF / α`. For KdV `F` is real and
//! `∂ση = −∂σF / ∂ηF`.
//!
//! `∂σF` comes from the stochastic convolutions of [`crate::sde`]. All
//! corrections are per unit of noise intensity `√(2α)σ`; with `α = 1/2` that is
//! per unit of `σ`.

use crate::error::{Error, Result};
use crate::kdv::{self, kdv_critical_index};
use crate::linalg::sinc_scaled_re;
use crate::nls::{self, nls_critical_distance, nls_critical_index, BoxPotential};
use crate::sde::{
    integrate_kdv_first_order, integrate_nls_complex_first_order, integrate_nls_first_order,
    nls_first_order_kernels,
};
use crate::stochastic::BrownianPath;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Denominators below this are treated as critical.
pub const DENOMINATOR_FLOOR: f64 = 1e-10;

/// `|F(η₀)|` above this means `η₀` is not a deterministic eigenvalue.
pub const EIGENVALUE_TOL: f64 = 1e-8;

/// Distance to the nearest critical point below which a regular correction
/// carries the `near_critical` flag.
pub const NEAR_CRITICAL_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobianNls {
    pub d_xi_f: Complex64,
    pub d_eta_f: Complex64,
    pub det_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionResult {
    pub d_xi: f64,
    pub d_eta: f64,
    /// Itô-isometry variance of `d_eta`.
    pub variance_eta: f64,
    pub variance_xi: f64,
    /// `∂ηF` at the base point.
    pub denominator: f64,
    pub path_id: u64,
    pub near_critical: bool,
    /// At critical points: whether the correction creates a soliton.
    pub soliton_created: Option<bool>,
}

impl CorrectionResult {
    pub fn with_path_id(self, path_id: u64) -> Self {
        Self { path_id, ..self }
    }
}

/// `i ∂ξψ₁(R) = ∂ηψ₁(R) = [q²/c³ − iRζ/c] sin(cR) + R ζ²/c² cos(cR)`,
/// `c = √(q² + ζ²)`, evaluated at a general `ζ`.
pub fn nls_d_eta_f(pot: &BoxPotential, zeta: Complex64) -> Complex64 {
    let (q, r) = (pot.q, pot.r);
    let c = (q * q + zeta * zeta).sqrt();
    let i = Complex64::i();
    (q * q / (c * c * c) - i * r * zeta / c) * (c * r).sin() + r * zeta * zeta / (c * c) * (c * r).cos()
}

fn check_nls_eta0(pot: &BoxPotential, eta0: f64) -> Result<()> {
    pot.require_positive_q()?;
    if !(eta0 >= 0.0 && eta0 < pot.q) {
        return Err(Error::OutOfDomain {
            name: "eta0",
            value: eta0,
            domain: format!("[0, {})", pot.q),
        });
    }
    Ok(())
}

/// Jacobian quantities of `F = ψ₁(R)` at `ζ = iη₀`.
pub fn nls_jacobian(pot: &BoxPotential, eta0: f64) -> Result<JacobianNls> {
    check_nls_eta0(pot, eta0)?;
    let d_eta_f = nls_d_eta_f(pot, Complex64::new(0.0, eta0));
    let d_xi_f = -Complex64::i() * d_eta_f;
    Ok(JacobianNls {
        d_xi_f,
        d_eta_f,
        det_j: d_xi_f.re * d_xi_f.re + d_xi_f.im * d_xi_f.im,
    })
}

/// `α = ∂ηF(0, η₀, 0) = [q²/c₀³ + Rη₀/c₀] sin(c₀R) − Rη₀²/c₀² cos(c₀R)`.
pub fn nls_eta_denominator(pot: &BoxPotential, eta0: f64) -> Result<f64> {
    Ok(nls_jacobian(pot, eta0)?.d_eta_f.re)
}

fn check_nls_eigenvalue(pot: &BoxPotential, eta0: f64) -> Result<()> {
    let g = nls::axis_condition(pot, eta0);
    if g.abs() > EIGENVALUE_TOL {
        return Err(Error::InvalidParameter(format!(
            "eta0 = {eta0} is not an eigenvalue: |psi1(R)| = {:e}",
            g.abs()
        )));
    }
    Ok(())
}

fn checked_denominator(den: f64) -> Result<f64> {
    if den.is_nan() || den.abs() < DENOMINATOR_FLOOR {
        return Err(Error::DegenerateDenominator(den));
    }
    Ok(den)
}

/// `(∫ Re(k)², ∫ Im(k)²)` of the NLS ψ₁ kernels by midpoint quadrature on
/// `4·n` cells. `complex` includes the second noise.
fn nls_kernel_energies(pot: &BoxPotential, eta0: f64, n: usize, complex: bool) -> (f64, f64) {
    let m = 4 * n;
    let h = pot.r / m as f64;
    let (mut re2, mut im2) = (0.0, 0.0);
    for j in 0..m {
        let y = (j as f64 + 0.5) * h;
        let (k1, k2) = nls_first_order_kernels(pot.q, eta0, pot.r, y);
        re2 += k1[0].re * k1[0].re;
        im2 += k1[0].im * k1[0].im;
        if complex {
            re2 += k2[0].re * k2[0].re;
            im2 += k2[0].im * k2[0].im;
        }
    }
    (re2 * h, im2 * h)
}

fn nls_from_d_sigma_f(
    pot: &BoxPotential,
    eta0: f64,
    d_sigma_f: Complex64,
    den: f64,
    n: usize,
    complex: bool,
) -> CorrectionResult {
    let (re2, im2) = nls_kernel_energies(pot, eta0, n, complex);
    CorrectionResult {
        d_xi: if complex { d_sigma_f.im / den } else { 0.0 },
        d_eta: -d_sigma_f.re / den,
        variance_eta: re2 / (den * den),
        variance_xi: if complex { im2 / (den * den) } else { 0.0 },
        denominator: den,
        path_id: 0,
        near_critical: nls_critical_distance(pot) < NEAR_CRITICAL_DISTANCE,
        soliton_created: None,
    }
}

/// Real-noise correction at a deterministic eigenvalue `η₀ ∈ (0, q)`.
/// `d_xi` is zero: the velocity is unchanged at first order.
pub fn nls_eta_correction(pot: &BoxPotential, eta0: f64, path: &BrownianPath) -> Result<CorrectionResult> {
    check_nls_eta0(pot, eta0)?;
    if eta0 == 0.0 {
        return Err(Error::InvalidParameter(
            "eta0 = 0 is the quiescent case; use nls_quiescent_correction".into(),
        ));
    }
    check_nls_eigenvalue(pot, eta0)?;
    let den = checked_denominator(nls_eta_denominator(pot, eta0)?)?;
    let psi = integrate_nls_first_order(pot, eta0, path)?;
    Ok(nls_from_d_sigma_f(pot, eta0, psi.psi1, den, path.grid().n_steps(), false))
}

/// Complex-noise corrections; `path1` drives `Re U`, `path2` drives `Im U`.
pub fn nls_complex_corrections(
    pot: &BoxPotential,
    eta0: f64,
    path1: &BrownianPath,
    path2: &BrownianPath,
) -> Result<CorrectionResult> {
    check_nls_eta0(pot, eta0)?;
    check_nls_eigenvalue(pot, eta0)?;
    let den = checked_denominator(nls_eta_denominator(pot, eta0)?)?;
    let psi = integrate_nls_complex_first_order(pot, eta0, path1, path2)?;
    Ok(nls_from_d_sigma_f(pot, eta0, psi.psi1, den, path1.grid().n_steps(), true))
}

fn require_nls_critical(pot: &BoxPotential) -> Result<u32> {
    pot.require_positive_q()?;
    nls_critical_index(pot).ok_or_else(|| {
        Error::NotCritical(format!(
            "qR = {} is {:e} away from the nearest odd multiple of pi/2",
            pot.area(),
            nls_critical_distance(pot)
        ))
    })
}

/// Correction of the quiescent eigenvalue `ζ = 0` at `qR = (2n+1)π/2`:
/// `d_eta = q W_R`, `d_xi = 0`.
pub fn nls_quiescent_correction(pot: &BoxPotential, path: &BrownianPath) -> Result<CorrectionResult> {
    require_nls_critical(pot)?;
    let den = nls_eta_denominator(pot, 0.0)?;
    let psi = integrate_nls_first_order(pot, 0.0, path)?;
    let mut out = nls_from_d_sigma_f(pot, 0.0, psi.psi1, den, path.grid().n_steps(), false);
    out.soliton_created = Some(out.d_eta > 0.0);
    Ok(out)
}

/// `q ∫₀ᴿ Q dx` for a process sampled on uniform cells of `[0, R]`.
pub fn nls_quiescent_general(pot: &BoxPotential, process: &[f64]) -> Result<f64> {
    require_nls_critical(pot)?;
    Ok(pot.q * cell_integral(process, pot.r)?)
}

fn cell_integral(process: &[f64], r: f64) -> Result<f64> {
    if process.is_empty() {
        return Err(Error::InvalidParameter("empty process sample".into()));
    }
    Ok(process.iter().sum::<f64>() * r / process.len() as f64)
}

/// The closed-form correction as displayed for real noise, with kernel
/// `q sin(c₀R) + 2(η₀q/c₀) sin(c₀(R−y)) sin(c₀y)` over
/// `2[q²/c₀² + Rη₀] sin(c₀R) − R(η₀²/c₀) cos(c₀R)`. Kept for comparison with
/// [`nls_eta_correction`]; the two differ by a path-independent factor.
pub fn nls_eta_correction_display(pot: &BoxPotential, eta0: f64, path: &BrownianPath) -> Result<f64> {
    check_nls_eta0(pot, eta0)?;
    let (q, r) = (pot.q, pot.r);
    let c0 = (q * q - eta0 * eta0).sqrt();
    let grid = path.grid();
    let num: f64 = path
        .increments()
        .iter()
        .enumerate()
        .map(|(i, dw)| {
            let y = grid.node(i);
            (q * (c0 * r).sin() + 2.0 * eta0 * q / c0 * (c0 * (r - y)).sin() * (c0 * y).sin()) * dw
        })
        .sum();
    let den = 2.0 * (q * q / (c0 * c0) + r * eta0) * (c0 * r).sin() - r * eta0 * eta0 / c0 * (c0 * r).cos();
    Ok(num / den)
}

fn check_kdv_eta0(pot: &BoxPotential, eta0: f64) -> Result<f64> {
    let sq = pot.q.sqrt();
    if !(eta0 >= 0.0 && eta0 < sq) {
        return Err(Error::OutOfDomain {
            name: "eta0",
            value: eta0,
            domain: format!("[0, {sq})"),
        });
    }
    Ok((pot.q - eta0 * eta0).sqrt())
}

/// `∂ηF(η₀, 0) = cos(c₀R)[2 + η₀R − η₀³R/c₀²] + sin(c₀R)[(3η₀ + 2η₀²R)/c₀ + η₀³/c₀³]`.
pub fn kdv_eta_denominator(pot: &BoxPotential, eta0: f64) -> Result<f64> {
    let c0 = check_kdv_eta0(pot, eta0)?;
    Ok(kdv_denominator_unchecked(pot, eta0, c0))
}

fn kdv_denominator_unchecked(pot: &BoxPotential, eta0: f64, c0: f64) -> f64 {
    let r = pot.r;
    let (s, c) = (c0 * r).sin_cos();
    let e3 = eta0.powi(3);
    c * (2.0 + eta0 * r - e3 * r / (c0 * c0))
        + s * ((3.0 * eta0 + 2.0 * eta0 * eta0 * r) / c0 + e3 / c0.powi(3))
}

/// `φ₀(t) = cos(ct) + (η/c) sin(ct)`.
fn kdv_phi0(c: f64, eta0: f64, t: f64) -> f64 {
    (c * t).cos() + eta0 * sinc_scaled_re(c, t)
}

fn kdv_variance(pot: &BoxPotential, c: f64, eta0: f64, den: f64, n: usize) -> f64 {
    let m = 4 * n;
    let h = pot.r / m as f64;
    let s: f64 = (0..m)
        .map(|j| {
            let y = (j as f64 + 0.5) * h;
            let k = kdv_phi0(c, eta0, pot.r - y) * kdv_phi0(c, eta0, y);
            k * k
        })
        .sum();
    s * h / (den * den)
}

fn kdv_from_first_order(pot: &BoxPotential, eta0: f64, den: f64, path: &BrownianPath) -> Result<CorrectionResult> {
    let d = integrate_kdv_first_order(pot, eta0, path)?;
    let d_sigma_f = d.phi_x + eta0 * d.phi;
    let c = (pot.q - eta0 * eta0).sqrt();
    Ok(CorrectionResult {
        d_xi: 0.0,
        d_eta: -d_sigma_f / den,
        variance_eta: kdv_variance(pot, c, eta0, den, path.grid().n_steps()),
        variance_xi: 0.0,
        denominator: den,
        path_id: 0,
        near_critical: false,
        soliton_created: None,
    })
}

/// `d_eta = ∫ φ₀(R−y) φ₀(y) dW / ∂ηF` at a deterministic eigenvalue.
pub fn kdv_eta_correction(pot: &BoxPotential, eta0: f64, path: &BrownianPath) -> Result<CorrectionResult> {
    pot.require_positive_q()?;
    let c0 = check_kdv_eta0(pot, eta0)?;
    let f = kdv::final_condition(pot, eta0);
    if f.abs() > EIGENVALUE_TOL {
        return Err(Error::InvalidParameter(format!(
            "eta0 = {eta0} is not an eigenvalue: |F| = {:e}",
            f.abs()
        )));
    }
    let den = checked_denominator(kdv_denominator_unchecked(pot, eta0, c0))?;
    let mut out = kdv_from_first_order(pot, eta0, den, path)?;
    let k = pot.q.sqrt() * pot.r / std::f64::consts::PI;
    out.near_critical = (k - k.round()).abs() * std::f64::consts::PI < NEAR_CRITICAL_DISTANCE;
    Ok(out)
}

/// New small eigenvalue at `√q R = nπ`: `d_eta = ½ ∫ cos²(√q y) dW`.
pub fn kdv_critical_correction(pot: &BoxPotential, path: &BrownianPath) -> Result<CorrectionResult> {
    pot.require_positive_q()?;
    if kdv_critical_index(pot).is_none() {
        return Err(Error::NotCritical(format!(
            "sqrt(q) R = {} is not a positive multiple of pi",
            pot.q.sqrt() * pot.r
        )));
    }
    let den = kdv_eta_denominator(pot, 0.0)?;
    let mut out = kdv_from_first_order(pot, 0.0, den, path)?;
    out.soliton_created = Some(out.d_eta > 0.0);
    Ok(out)
}

/// Zero background `q = 0`: `∂ηF(0, 0) = 2` and `∂σF = −W_R`, so
/// `d_eta = W_R / 2`.
pub fn kdv_zero_q_correction(path: &BrownianPath) -> Result<CorrectionResult> {
    let pot = BoxPotential::new(0.0, path.grid().x_max())?;
    let mut out = kdv_from_first_order(&pot, 0.0, 2.0, path)?;
    out.soliton_created = Some(out.d_eta > 0.0);
    Ok(out)
}

/// `½ ∫₀ᴿ Q dx` for a process sampled on uniform cells of `[0, R]`.
pub fn kdv_zero_q_general(process: &[f64], r: f64) -> Result<f64> {
    Ok(0.5 * cell_integral(process, r)?)
}
