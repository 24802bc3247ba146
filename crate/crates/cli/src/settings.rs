//! Run settings: command-line flags layered over a JSON config file layered
//! over per-command defaults.

use crate::error::CliError;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use soliton_core::experiments::{Equation, ExperimentConfig};
use soliton_core::{BoxPotential, NoiseSpec, SpectralPoint};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EqArg {
    Nls,
    Kdv,
}

impl From<EqArg> for Equation {
    fn from(e: EqArg) -> Self {
        match e {
            EqArg::Nls => Equation::Nls,
            EqArg::Kdv => Equation::Kdv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Validate,
    Creation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NoiseArg {
    Real,
    Complex,
}

/// Every tunable of every command. `None` means "not set at this layer".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eq: Option<EqArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_ladder: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta_re: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta_im: Option<f64>,
}

macro_rules! overlay_fields {
    ($top:ident, $base:ident, $($f:ident),*) => {
        Settings { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Settings {
    /// Fields set in `top` win over `self`.
    pub fn overlay(self, top: Settings) -> Settings {
        let base = self;
        overlay_fields!(
            top, base, eq, q, r, sigma, sigma_ladder, alpha, epsilon, paths, steps, seed, tol, mode,
            noise, zeta_re, zeta_im
        )
    }

    /// Reads a config file. A run manifest, or a JSON summary carrying one, is
    /// accepted as well and contributes its resolved configuration.
    pub fn from_file(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {} is not JSON: {e}", path.display())))?;
        if let Some(m) = value.get_mut("manifest") {
            value = m.take();
        }
        if let Some(c) = value.get_mut("config") {
            value = c.take();
        }
        serde_json::from_value(value)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_SEED: u64 = 1;
/// Default limit-system grid step.
pub const DEFAULT_DX: f64 = 1e-3;

fn default_steps(r: f64) -> usize {
    ((r / DEFAULT_DX) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

fn potential(q: f64, r: f64) -> Result<BoxPotential, CliError> {
    BoxPotential::new(q, r).map_err(CliError::from)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRun {
    pub equation: EqArg,
    pub pot: BoxPotential,
    pub tol: f64,
}

impl SpectrumRun {
    pub fn resolve(s: &Settings) -> Result<(Self, Settings), CliError> {
        let equation = s.eq.unwrap_or(EqArg::Nls);
        let q = s.q.unwrap_or(1.0);
        let r = s.r.unwrap_or(2.0);
        let tol = s.tol.unwrap_or(DEFAULT_TOL);
        let resolved = Settings {
            eq: Some(equation),
            q: Some(q),
            r: Some(r),
            tol: Some(tol),
            ..Settings::default()
        };
        Ok((
            Self {
                equation,
                pot: potential(q, r)?,
                tol,
            },
            resolved,
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbRun {
    pub mode: ModeArg,
    pub config: ExperimentConfig,
}

impl PerturbRun {
    pub fn resolve(s: &Settings) -> Result<(Self, Settings), CliError> {
        let equation = s.eq.unwrap_or(EqArg::Nls);
        let mode = s.mode.unwrap_or(ModeArg::Validate);
        let q = s.q.unwrap_or(1.0);
        let r = s.r.unwrap_or(3.0);
        let sigma = s.sigma.unwrap_or(0.01);
        let alpha = s.alpha.unwrap_or(DEFAULT_ALPHA);
        let noise_kind = s.noise.unwrap_or(NoiseArg::Real);
        let sigma_ladder = match (&s.sigma_ladder, mode) {
            (Some(l), _) => l.clone(),
            (None, ModeArg::Validate) => vec![2.0 * sigma, sigma, 0.5 * sigma],
            (None, ModeArg::Creation) => Vec::new(),
        };
        let paths = s.paths.unwrap_or(match mode {
            ModeArg::Validate => 1000,
            ModeArg::Creation => 2000,
        });
        let steps = s.steps.unwrap_or_else(|| default_steps(r));
        let seed = s.seed.unwrap_or(DEFAULT_SEED);
        let resolved = Settings {
            eq: Some(equation),
            q: Some(q),
            r: Some(r),
            sigma: Some(sigma),
            sigma_ladder: Some(sigma_ladder.clone()),
            alpha: Some(alpha),
            paths: Some(paths),
            steps: Some(steps),
            seed: Some(seed),
            mode: Some(mode),
            noise: Some(noise_kind),
            ..Settings::default()
        };
        let base = match noise_kind {
            NoiseArg::Real => NoiseSpec::white(sigma),
            NoiseArg::Complex => NoiseSpec::complex_white(sigma),
        };
        let noise = NoiseSpec { alpha, ..base };
        let config = ExperimentConfig::new(equation.into(), potential(q, r)?, noise, paths, steps, seed)?
            .with_sigma_ladder(sigma_ladder);
        Ok((Self { mode, config }, resolved))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeRun {
    pub config: ExperimentConfig,
}

impl ConvergeRun {
    pub fn resolve(s: &Settings) -> Result<(Self, Settings), CliError> {
        let equation = s.eq.unwrap_or(EqArg::Nls);
        let q = s.q.unwrap_or(1.0);
        let (r_default, eta_default) = match equation {
            EqArg::Nls => (2.0, 0.5),
            EqArg::Kdv => (1.0, 0.3),
        };
        let r = s.r.unwrap_or(r_default);
        let zeta_re = s.zeta_re.unwrap_or(0.0);
        let zeta_im = s.zeta_im.unwrap_or(eta_default);
        let sigma = s.sigma.unwrap_or(0.3);
        let alpha = s.alpha.unwrap_or(DEFAULT_ALPHA);
        let epsilon = s.epsilon.clone().unwrap_or_else(|| vec![0.4, 0.2, 0.1]);
        let paths = s.paths.unwrap_or(2000);
        let steps = s.steps.unwrap_or_else(|| default_steps(r));
        let seed = s.seed.unwrap_or(DEFAULT_SEED);
        let resolved = Settings {
            eq: Some(equation),
            q: Some(q),
            r: Some(r),
            sigma: Some(sigma),
            alpha: Some(alpha),
            epsilon: Some(epsilon.clone()),
            paths: Some(paths),
            steps: Some(steps),
            seed: Some(seed),
            zeta_re: Some(zeta_re),
            zeta_im: Some(zeta_im),
            ..Settings::default()
        };
        let noise = NoiseSpec {
            alpha,
            ..NoiseSpec::white(sigma)
        };
        let config = ExperimentConfig::new(equation.into(), potential(q, r)?, noise, paths, steps, seed)?
            .with_epsilon_ladder(epsilon)
            .with_zeta(SpectralPoint::new(zeta_re, zeta_im)?);
        Ok((Self { config }, resolved))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_prefers_top_layer() {
        let base = Settings {
            q: Some(1.0),
            r: Some(2.0),
            ..Settings::default()
        };
        let top = Settings {
            q: Some(5.0),
            ..Settings::default()
        };
        let merged = base.overlay(top);
        assert_eq!(merged.q, Some(5.0));
        assert_eq!(merged.r, Some(2.0));
    }

    #[test]
    fn resolved_settings_reproduce_themselves() {
        let (run, resolved) = PerturbRun::resolve(&Settings::default()).unwrap();
        let (again, resolved2) = PerturbRun::resolve(&resolved).unwrap();
        assert_eq!(run, again);
        assert_eq!(resolved, resolved2);
    }

    #[test]
    fn capital_r_in_json() {
        let s: Settings = serde_json::from_str(r#"{"eq":"kdv","q":5,"R":1}"#).unwrap();
        assert_eq!(s.r, Some(1.0));
        assert!(serde_json::from_str::<Settings>(r#"{"bogus":1}"#).is_err());
    }
}
