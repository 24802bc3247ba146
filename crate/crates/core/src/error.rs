use thiserror::Error;

/// Errors raised by the spectral, stochastic and experiment layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{name} = {value} lies outside {domain}")]
    OutOfDomain {
        name: &'static str,
        value: f64,
        domain: String,
    },

    #[error("under-resolved discretization: {0}")]
    UnderResolved(String),

    #[error("path grid (x_max = {x_max}, n = {n_steps}) does not match {expected}")]
    GridMismatch {
        x_max: f64,
        n_steps: usize,
        expected: String,
    },

    #[error("eigenvalue count mismatch: found {found}, formula gives {expected} (last scan used {scan_points} points)")]
    CountMismatch {
        found: usize,
        expected: usize,
        scan_points: usize,
    },

    #[error("configuration is too close to a critical point: {0}")]
    NearCritical(String),

    #[error("configuration is not critical: {0}")]
    NotCritical(String),

    #[error("phase increment {jump:.3} rad between contour points {index} and {next} exceeds the unwrap limit; increase the contour resolution")]
    PhaseJump {
        jump: f64,
        index: usize,
        next: usize,
    },

    #[error("first-order denominator {0:e} is below the regular-perturbation floor")]
    DegenerateDenominator(f64),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("no deterministic eigenvalue: {0}")]
    NoEigenvalue(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {value}")))
    }
}
