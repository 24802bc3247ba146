//! Zakharov–Shabat scattering for the box potential `q·1_[0,R]`.
//!
//! On `[0, R]` the Jost solution starting from `Ψ(0) = (1, 0)` is
//!
//! ```text
//! ψ₁(x) = cos(c x) − iζ sin(c x)/c,   ψ₂(x) = i q sin(c x)/c,   c = √(q² + ζ²)
//! ```
//!
//! and `a(ζ) = ψ₁(R) e^{iζR}`. Discrete eigenvalues lie on the imaginary axis
//! `ζ = iη`, `0 < η < q`; there `ψ₁(R, iη)` is real and is used directly as the
//! root function because it has no tangent poles and stays continuous up to
//! `η = q`, where it equals `1 + qR`.

use crate::error::{ensure_finite, Error, Result};
use crate::linalg::sinc_scaled;
use crate::roots::{bisect, scan_sign_changes};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// A point `ζ = ξ + iη` of the closed upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub xi: f64,
    pub eta: f64,
}

impl SpectralPoint {
    pub fn new(xi: f64, eta: f64) -> Result<Self> {
        ensure_finite("xi", xi)?;
        ensure_finite("eta", eta)?;
        if eta < 0.0 {
            return Err(Error::OutOfDomain {
                name: "eta",
                value: eta,
                domain: "[0, inf)".into(),
            });
        }
        Ok(Self { xi, eta })
    }

    pub fn imaginary(eta: f64) -> Result<Self> {
        Self::new(0.0, eta)
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.xi, self.eta)
    }
}

/// The deterministic background `q·1_[0,R]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxPotential {
    pub q: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

impl BoxPotential {
    /// Accepts `q ≥ 0` (the zero background is meaningful for KdV).
    pub fn new(q: f64, r: f64) -> Result<Self> {
        ensure_finite("q", q)?;
        ensure_finite("R", r)?;
        if r <= 0.0 {
            return Err(Error::OutOfDomain {
                name: "R",
                value: r,
                domain: "(0, inf)".into(),
            });
        }
        if q < 0.0 {
            return Err(Error::OutOfDomain {
                name: "q",
                value: q,
                domain: "[0, inf)".into(),
            });
        }
        Ok(Self { q, r })
    }

    pub fn area(&self) -> f64 {
        self.q * self.r
    }

    pub(crate) fn require_positive_q(&self) -> Result<()> {
        if self.q > 0.0 {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                name: "q",
                value: self.q,
                domain: "(0, inf)".into(),
            })
        }
    }

    pub(crate) fn check_x(&self, x: f64) -> Result<()> {
        let slack = 1e-12 * self.r;
        if x.is_finite() && x >= -slack && x <= self.r + slack {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                name: "x",
                value: x,
                domain: format!("[0, {}]", self.r),
            })
        }
    }
}

/// `(ψ₁, ψ₂)` at one point of `[0, R]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JostState {
    pub psi1: Complex64,
    pub psi2: Complex64,
}

impl JostState {
    pub const INITIAL: JostState = JostState {
        psi1: Complex64::new(1.0, 0.0),
        psi2: Complex64::new(0.0, 0.0),
    };

    pub fn norm_sqr(&self) -> f64 {
        self.psi1.norm_sqr() + self.psi2.norm_sqr()
    }
}

/// Closed-form Jost solution on `[0, R]`. At `ζ = iq` (`c = 0`) this is the
/// analytic limit `(1 + qx, iqx)`.
pub fn nls_jost_box(pot: &BoxPotential, zeta: SpectralPoint, x: f64) -> Result<JostState> {
    pot.check_x(x)?;
    Ok(jost_closed_form(pot.q, zeta.as_complex(), x.clamp(0.0, pot.r)))
}

pub(crate) fn jost_closed_form(q: f64, zeta: Complex64, x: f64) -> JostState {
    let c = (q * q + zeta * zeta).sqrt();
    let s = sinc_scaled(c, x);
    let cs = (c * x).cos();
    let i = Complex64::i();
    JostState {
        psi1: cs - i * zeta * s,
        psi2: i * q * s,
    }
}

/// `a(ζ) = ψ₁(R, ζ) e^{iζR}`.
pub fn nls_jost_coefficient_a(pot: &BoxPotential, zeta: SpectralPoint) -> Complex64 {
    jost_a(pot, zeta.as_complex())
}

pub(crate) fn jost_a(pot: &BoxPotential, zeta: Complex64) -> Complex64 {
    let psi = jost_closed_form(pot.q, zeta, pot.r);
    psi.psi1 * (Complex64::i() * zeta * pot.r).exp()
}

/// `g(η) = ψ₁(R, iη) = (η/c₀) sin(c₀R) + cos(c₀R)` with `c₀ = √(q² − η²)`.
pub fn nls_axis_condition(pot: &BoxPotential, eta: f64) -> Result<f64> {
    if !(eta >= 0.0 && eta <= pot.q) {
        return Err(Error::OutOfDomain {
            name: "eta",
            value: eta,
            domain: format!("[0, {}]", pot.q),
        });
    }
    Ok(axis_condition(pot, eta))
}

pub(crate) fn axis_condition(pot: &BoxPotential, eta: f64) -> f64 {
    let c0 = (pot.q * pot.q - eta * eta).max(0.0).sqrt();
    eta * crate::linalg::sinc_scaled_re(c0, pot.r) + (c0 * pot.r).cos()
}

/// `⌊1/2 + qR/π⌋`.
pub fn nls_count_formula(pot: &BoxPotential) -> usize {
    (0.5 + pot.area() / PI).floor() as usize
}

/// Tolerance on `|qR − (2n+1)π/2|` below which a configuration is critical.
pub const CRITICAL_TOL: f64 = 1e-8;

/// `Some(n)` when `qR = (2n+1)π/2` within [`CRITICAL_TOL`].
pub fn nls_critical_index(pot: &BoxPotential) -> Option<u32> {
    let n = ((pot.area() - FRAC_PI_2) / PI).round();
    if n < 0.0 {
        return None;
    }
    let target = (2.0 * n + 1.0) * FRAC_PI_2;
    ((pot.area() - target).abs() <= CRITICAL_TOL).then_some(n as u32)
}

/// Distance of `qR` from the nearest odd multiple of `π/2`.
pub fn nls_critical_distance(pot: &BoxPotential) -> f64 {
    let n = ((pot.area() - FRAC_PI_2) / PI).round().max(0.0);
    (pot.area() - (2.0 * n + 1.0) * FRAC_PI_2).abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueReport {
    /// Imaginary parts `η` of the discrete eigenvalues in `(0, q)`, increasing.
    pub eigenvalues: Vec<f64>,
    /// `|g(η)|` at each reported root.
    pub residuals: Vec<f64>,
    pub count_formula: usize,
    /// `None` when the contour count is not defined (critical configuration).
    pub count_argument_principle: Option<usize>,
    /// A quiescent eigenvalue sits at `ζ = 0`.
    pub quiescent: bool,
    pub scan_points: usize,
}

impl EigenvalueReport {
    /// Eigenvalues found by bisection, the quiescent one included.
    pub fn count_bisection(&self) -> usize {
        self.eigenvalues.len() + usize::from(self.quiescent)
    }

    pub fn counts_agree(&self) -> bool {
        self.count_bisection() == self.count_formula
            && self
                .count_argument_principle
                .is_none_or(|n| n == self.count_formula)
    }
}

const MAX_SCAN_POINTS: usize = 1 << 20;

/// All discrete eigenvalues on `(0, q)` by sign-change scan and bisection.
///
/// The scan starts at `η = tol` and is doubled on a count mismatch against
/// [`nls_count_formula`]. Away from critical points the argument-principle count
/// is filled in as well.
pub fn nls_find_eigenvalues(pot: &BoxPotential, tol: f64) -> Result<EigenvalueReport> {
    pot.require_positive_q()?;
    if !(tol > 0.0 && tol < 1e-6) {
        return Err(Error::OutOfDomain {
            name: "tol",
            value: tol,
            domain: "(0, 1e-6)".into(),
        });
    }
    let expected = nls_count_formula(pot);
    let quiescent = nls_critical_index(pot).is_some();
    let g = |eta: f64| axis_condition(pot, eta);

    let mut n = 64 * ((pot.area() / PI).floor() as usize + 2);
    loop {
        let brackets = scan_sign_changes(g, tol, pot.q, n);
        let found = brackets.len() + usize::from(quiescent);
        if found == expected {
            let mut eigenvalues = Vec::with_capacity(brackets.len());
            let mut residuals = Vec::with_capacity(brackets.len());
            for b in brackets {
                let eta = bisect(g, b, tol * 1e-3)?;
                eigenvalues.push(eta);
                residuals.push(g(eta).abs());
            }
            let count_argument_principle = if quiescent || nls_critical_distance(pot) < 1e-6 {
                None
            } else {
                let radius = 2.0 * pot.q + 1.0;
                Some(nls_count_argument_principle(pot, radius, 8192)?)
            };
            return Ok(EigenvalueReport {
                eigenvalues,
                residuals,
                count_formula: expected,
                count_argument_principle,
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

/// Winding number of `a(ζ)` along `[−r, r]` followed by the upper semicircle of
/// radius `r`, i.e. the number of discrete eigenvalues enclosed.
pub fn nls_count_argument_principle(
    pot: &BoxPotential,
    contour_radius: f64,
    n_contour: usize,
) -> Result<usize> {
    pot.require_positive_q()?;
    if contour_radius.is_nan() || contour_radius <= pot.q {
        return Err(Error::OutOfDomain {
            name: "contour_radius",
            value: contour_radius,
            domain: format!("({}, inf)", pot.q),
        });
    }
    if n_contour < 16 {
        return Err(Error::InvalidParameter(format!(
            "n_contour must be at least 16, got {n_contour}"
        )));
    }
    if nls_critical_distance(pot) < 1e-6 {
        return Err(Error::NearCritical(format!(
            "qR = {} is within 1e-6 of an odd multiple of pi/2, so a(zeta) vanishes on the real axis; \
             shift q or R away from the critical value",
            pot.area()
        )));
    }

    let half = n_contour / 2;
    let r = contour_radius;
    let mut contour: Vec<Complex64> = Vec::with_capacity(2 * half + 1);
    for k in 0..half {
        contour.push(Complex64::new(-r + 2.0 * r * k as f64 / half as f64, 0.0));
    }
    for k in 0..half {
        contour.push(Complex64::from_polar(r, PI * k as f64 / half as f64));
    }
    contour.push(contour[0]);

    let values: Vec<Complex64> = contour.iter().map(|&z| jost_a(pot, z)).collect();
    let mut total = 0.0;
    for k in 0..values.len() - 1 {
        let jump = (values[k + 1] / values[k]).arg();
        if jump.abs() > FRAC_PI_2 {
            return Err(Error::PhaseJump {
                jump,
                index: k,
                next: k + 1,
            });
        }
        total += jump;
    }
    let winding = total / (2.0 * PI);
    let rounded = winding.round();
    if (winding - rounded).abs() > 1e-3 || rounded < 0.0 {
        return Err(Error::NearCritical(format!(
            "accumulated phase {winding} turns is not an integer winding number"
        )));
    }
    Ok(rounded as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pot(q: f64, r: f64) -> BoxPotential {
        BoxPotential::new(q, r).unwrap()
    }

    #[test]
    fn jost_initial_condition() {
        let p = pot(1.3, 2.0);
        let s = nls_jost_box(&p, SpectralPoint::new(0.4, 0.7).unwrap(), 0.0).unwrap();
        assert_eq!(s, JostState::INITIAL);
    }

    #[test]
    fn jost_at_iq_is_linear() {
        let p = pot(1.0, 3.0);
        let s = nls_jost_box(&p, SpectralPoint::imaginary(1.0).unwrap(), 2.0).unwrap();
        assert!((s.psi1 - Complex64::new(3.0, 0.0)).norm() < 1e-12);
        assert!((s.psi2 - Complex64::new(0.0, 2.0)).norm() < 1e-12);
        // general q: (1 + qx, iqx)
        let p = pot(2.0, 3.0);
        let s = nls_jost_box(&p, SpectralPoint::imaginary(2.0).unwrap(), 0.5).unwrap();
        assert!((s.psi1 - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        assert!((s.psi2 - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn jost_at_zero_spectral_parameter() {
        let p = pot(1.0, 2.0);
        let s = nls_jost_box(&p, SpectralPoint::new(0.0, 0.0).unwrap(), FRAC_PI_2).unwrap();
        assert!(s.psi1.norm() < 1e-15);
        assert!((s.psi2 - Complex64::i()).norm() < 1e-15);
    }

    #[test]
    fn jost_rejects_outside_support() {
        let p = pot(1.0, 2.0);
        assert!(nls_jost_box(&p, SpectralPoint::new(0.0, 0.5).unwrap(), 2.5).is_err());
        assert!(nls_jost_box(&p, SpectralPoint::new(0.0, 0.5).unwrap(), -0.1).is_err());
    }

    #[test]
    fn a_vanishes_at_quiescent_threshold() {
        let p = pot(1.0, FRAC_PI_2);
        let a = nls_jost_coefficient_a(&p, SpectralPoint::new(0.0, 0.0).unwrap());
        assert!(a.norm() < 1e-15);
    }

    #[test]
    fn a_tends_to_one_far_up_the_axis() {
        let p = pot(1.0, 1.0);
        let a = nls_jost_coefficient_a(&p, SpectralPoint::imaginary(100.0).unwrap());
        assert!((a - 1.0).norm() < 1e-2);
    }

    #[test]
    fn axis_condition_endpoints() {
        let p = pot(1.0, FRAC_PI_2);
        assert!(nls_axis_condition(&p, 0.0).unwrap().abs() < 1e-15);
        let p = pot(1.7, 0.9);
        assert!((nls_axis_condition(&p, 1.7).unwrap() - (1.0 + 1.7 * 0.9)).abs() < 1e-12);
        assert!(nls_axis_condition(&p, 1.8).is_err());
        assert!(nls_axis_condition(&p, -0.1).is_err());
    }

    #[test]
    fn no_root_below_threshold() {
        let p = pot(1.0, 1.0);
        let min = (0..=1000)
            .map(|i| nls_axis_condition(&p, i as f64 / 1000.0).unwrap().abs())
            .fold(f64::INFINITY, f64::min);
        assert!(min > 0.1);
    }

    #[test]
    fn count_formula_values() {
        assert_eq!(nls_count_formula(&pot(2.0, 5.0)), 3);
        assert_eq!(nls_count_formula(&pot(1.0, FRAC_PI_2)), 1);
        assert_eq!(nls_count_formula(&pot(0.1, 0.1)), 0);
        assert_eq!(nls_count_formula(&pot(1.0, 2.0)), 1);
        assert_eq!(nls_count_formula(&pot(1.0, 1.0)), 0);
    }

    #[test]
    fn find_eigenvalues_small_cases() {
        let r = nls_find_eigenvalues(&pot(1.0, 2.0), 1e-10).unwrap();
        assert_eq!(r.eigenvalues.len(), 1);
        assert_eq!(r.count_argument_principle, Some(1));
        let r = nls_find_eigenvalues(&pot(1.0, 1.0), 1e-10).unwrap();
        assert!(r.eigenvalues.is_empty());
        assert_eq!(r.count_argument_principle, Some(0));
    }

    #[test]
    fn find_eigenvalues_quiescent() {
        let r = nls_find_eigenvalues(&pot(1.0, FRAC_PI_2), 1e-10).unwrap();
        assert!(r.quiescent);
        assert!(r.eigenvalues.is_empty());
        assert_eq!(r.count_bisection(), 1);
        assert_eq!(r.count_argument_principle, None);
        let r = nls_find_eigenvalues(&pot(1.0, 3.0 * FRAC_PI_2), 1e-10).unwrap();
        assert!(r.quiescent);
        assert_eq!(r.eigenvalues.len(), 1);
    }

    #[test]
    fn find_eigenvalues_rejects_bad_tol() {
        assert!(nls_find_eigenvalues(&pot(1.0, 2.0), 1e-3).is_err());
        assert!(nls_find_eigenvalues(&pot(0.0, 2.0), 1e-10).is_err());
    }

    #[test]
    fn argument_principle_counts() {
        assert_eq!(nls_count_argument_principle(&pot(1.0, 2.0), 3.0, 4096).unwrap(), 1);
        assert_eq!(nls_count_argument_principle(&pot(1.0, 1.0), 3.0, 4096).unwrap(), 0);
        assert_eq!(nls_count_argument_principle(&pot(2.0, 5.0), 5.0, 8192).unwrap(), 3);
    }

    #[test]
    fn argument_principle_rejections() {
        assert!(matches!(
            nls_count_argument_principle(&pot(1.0, FRAC_PI_2), 3.0, 4096),
            Err(Error::NearCritical(_))
        ));
        assert!(nls_count_argument_principle(&pot(1.0, 2.0), 0.5, 4096).is_err());
        assert!(matches!(
            nls_count_argument_principle(&pot(2.0, 5.0), 5.0, 16),
            Err(Error::PhaseJump { .. })
        ));
    }

    #[test]
    fn critical_index_detection() {
        assert_eq!(nls_critical_index(&pot(1.0, FRAC_PI_2)), Some(0));
        assert_eq!(nls_critical_index(&pot(2.0, 3.0 * FRAC_PI_2 / 2.0)), Some(1));
        assert_eq!(nls_critical_index(&pot(1.0, FRAC_PI_2 + 1e-6)), None);
        assert_eq!(nls_critical_index(&pot(1.0, 0.2)), None);
    }
}
