//! Schrödinger scattering for the KdV box potential.
//!
//! Bound states at `ζ = iη` solve `φ'' + (q − η²) φ = 0` on `[0, R]` with
//! `(φ, φ')(0) = (1, η)`; the decay condition at `x = R` is
//! `F(η) = φ'(R) + η φ(R) = 0`.

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::sinc_scaled_re;
use crate::nls::BoxPotential;
use crate::roots::{bisect, scan_sign_changes};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `(φ, φₓ)` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchrodingerState {
    pub phi: f64,
    pub phi_x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdvEigenvalueReport {
    /// `η` values in `(0, √q)`, increasing.
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub count_formula: usize,
    /// A root sits exactly at `η = 0` (critical configuration).
    pub quiescent: bool,
    pub scan_points: usize,
}

impl KdvEigenvalueReport {
    pub fn count(&self) -> usize {
        self.eigenvalues.len() + usize::from(self.quiescent)
    }
}

fn check_eta(pot: &BoxPotential, eta: f64) -> Result<f64> {
    ensure_finite("eta", eta)?;
    let sq = pot.q.sqrt();
    if eta < 0.0 || eta >= sq {
        return Err(Error::OutOfDomain {
            name: "eta",
            value: eta,
            domain: format!("[0, {sq})"),
        });
    }
    Ok((pot.q - eta * eta).sqrt())
}

/// `φ₀(x) = cos(cx) + (η/c) sin(cx)` and its derivative, `c = √(q − η²)`.
pub fn kdv_bound_solution(pot: &BoxPotential, eta: f64, x: f64) -> Result<SchrodingerState> {
    let c = check_eta(pot, eta)?;
    pot.check_x(x)?;
    Ok(bound_closed_form(c, eta, x.clamp(0.0, pot.r)))
}

pub(crate) fn bound_closed_form(c: f64, eta: f64, x: f64) -> SchrodingerState {
    let (s, co) = (c * x).sin_cos();
    SchrodingerState {
        phi: co + eta * sinc_scaled_re(c, x),
        phi_x: -c * s + eta * co,
    }
}

/// `F(η) = 2η cos(cR) + ((2η² − q)/c) sin(cR)`.
pub fn kdv_final_condition(pot: &BoxPotential, eta: f64) -> Result<f64> {
    check_eta(pot, eta)?;
    Ok(final_condition(pot, eta))
}

/// Same as [`kdv_final_condition`] but continuous up to and including `η = √q`,
/// where it equals `2√q + qR`.
pub(crate) fn final_condition(pot: &BoxPotential, eta: f64) -> f64 {
    let c = (pot.q - eta * eta).max(0.0).sqrt();
    2.0 * eta * (c * pot.r).cos() + (2.0 * eta * eta - pot.q) * sinc_scaled_re(c, pot.r)
}

/// The tangent form `tan(Rc) − 2ηc/(q − 2η²)`. It has poles at `η = √(q/2)` and
/// wherever `cos(cR) = 0`; kept only for cross-checking [`kdv_final_condition`].
pub fn kdv_tan_condition(pot: &BoxPotential, eta: f64) -> Result<f64> {
    let c = check_eta(pot, eta)?;
    Ok((c * pot.r).tan() - 2.0 * eta * c / (pot.q - 2.0 * eta * eta))
}

/// `⌊R√q/π⌋ + 1`.
pub fn kdv_count_formula(pot: &BoxPotential) -> usize {
    (pot.r * pot.q.sqrt() / PI).floor() as usize + 1
}

/// `Some(n)`, `n ≥ 1`, when `√q R = nπ` within `1e-8`.
pub fn kdv_critical_index(pot: &BoxPotential) -> Option<u32> {
    let k = pot.q.sqrt() * pot.r;
    let n = (k / PI).round();
    (n >= 1.0 && (k - n * PI).abs() <= crate::nls::CRITICAL_TOL).then_some(n as u32)
}

/// `Rq/2 − R³q²/12`.
pub fn kdv_small_q_expansion(q: f64, r: f64) -> f64 {
    r * q / 2.0 - r.powi(3) * q * q / 12.0
}

pub fn kdv_soliton_mass(eta: f64) -> f64 {
    4.0 * eta
}

pub fn kdv_soliton_energy(eta: f64) -> f64 {
    16.0 / 3.0 * eta.powi(3)
}

/// `2η² sech²(η(x − x₀))`.
pub fn kdv_soliton_profile(eta: f64, x0: f64, x: f64) -> f64 {
    let s = 1.0 / (eta * (x - x0)).cosh();
    2.0 * eta * eta * s * s
}

const MAX_SCAN_POINTS: usize = 1 << 20;

/// All zeros of [`kdv_final_condition`] on `(0, √q)`.
///
/// The scan starts at `η = tol`; the root at `η = 0` is counted only for an
/// exactly critical configuration.
pub fn kdv_find_eigenvalues(pot: &BoxPotential, tol: f64) -> Result<KdvEigenvalueReport> {
    pot.require_positive_q()?;
    if !(tol > 0.0 && tol < 1e-6) {
        return Err(Error::OutOfDomain {
            name: "tol",
            value: tol,
            domain: "(0, 1e-6)".into(),
        });
    }
    let top = pot.q.sqrt();
    if tol >= top {
        return Err(Error::InvalidParameter(format!(
            "tol = {tol} is not below sqrt(q) = {top}"
        )));
    }
    let expected = kdv_count_formula(pot);
    let quiescent = kdv_critical_index(pot).is_some();
    let f = |eta: f64| final_condition(pot, eta);

    let mut n = 64 * (expected + 2);
    loop {
        let brackets = scan_sign_changes(f, tol, top, n);
        let found = brackets.len() + usize::from(quiescent);
        if found == expected {
            let mut eigenvalues = Vec::with_capacity(brackets.len());
            let mut residuals = Vec::with_capacity(brackets.len());
            for b in brackets {
                let eta = bisect(f, b, tol * 1e-3)?;
                eigenvalues.push(eta);
                residuals.push(f(eta).abs());
            }
            return Ok(KdvEigenvalueReport {
                eigenvalues,
                residuals,
                count_formula: expected,
                quiescent,
                scan_points: n,
            });
        }
        if n >= MAX_SCAN_POINTS {
            return Err(Error::CountMismatch {
                found,
                expected,
                scan_points: n,
            });
        }
        n *= 2;
    }
}
