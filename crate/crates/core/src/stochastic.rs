//! Reproducible realizations of the driving noises.
//!
//! Brownian paths are stored as per-cell increments so that the same
//! realization can drive the limit SDE, the stochastic convolutions of the
//! first-order theory and the direct eigenvalue re-solve without interpolation.
//! The bounded driver is a two-state telegraph process `±a` with flip rate
//! `λ`, whose covariance is `a² e^{-2λ|s|}` and whose integrated covariance is
//! `a² / (2λ)`.
//!
//! Every generator is a [`ChaCha8Rng`] seeded from a `u64`; Monte Carlo runs use
//! `base_seed + path_index` per path and ChaCha stream 1 for a second,
//! independent noise on the same path index.

use crate::error::{ensure_finite, Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Uniform discretization of `[0, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    x_max: f64,
    n_steps: usize,
    dx: f64,
}

impl PathGrid {
    pub fn new(x_max: f64, n_steps: usize) -> Result<Self> {
        ensure_finite("x_max", x_max)?;
        if x_max <= 0.0 {
            return Err(Error::InvalidGrid(format!("x_max must be positive, got {x_max}")));
        }
        if n_steps < 2 {
            return Err(Error::InvalidGrid(format!("n_steps must be at least 2, got {n_steps}")));
        }
        Ok(Self {
            x_max,
            n_steps,
            dx: x_max / n_steps as f64,
        })
    }

    /// Grid on `[0, x_max]` whose step does not exceed `max_dx`.
    pub fn with_max_step(x_max: f64, max_dx: f64) -> Result<Self> {
        ensure_finite("max_dx", max_dx)?;
        if max_dx <= 0.0 {
            return Err(Error::InvalidGrid(format!("max_dx must be positive, got {max_dx}")));
        }
        let n = ((x_max / max_dx) * (1.0 - 1e-12)).ceil().max(2.0) as usize;
        Self::new(x_max, n)
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Left end of cell `i`.
    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.x_max
        } else {
            i as f64 * self.dx
        }
    }

    pub fn same_as(&self, other: &PathGrid) -> bool {
        self.n_steps == other.n_steps
            && (self.x_max - other.x_max).abs() <= 1e-12 * self.x_max.max(other.x_max)
    }
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-path seed used by every Monte Carlo campaign.
pub fn path_seed(base_seed: u64, path_index: usize) -> u64 {
    base_seed.wrapping_add(path_index as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrownianPath {
    grid: PathGrid,
    increments: Vec<f64>,
    terminal: f64,
}

impl BrownianPath {
    pub fn from_increments(grid: PathGrid, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != grid.n_steps() {
            return Err(Error::InvalidGrid(format!(
                "expected {} increments, got {}",
                grid.n_steps(),
                increments.len()
            )));
        }
        let terminal = increments.iter().sum();
        Ok(Self {
            grid,
            increments,
            terminal,
        })
    }

    /// The path `W ≡ 0`.
    pub fn zero(grid: PathGrid) -> Self {
        Self {
            grid,
            increments: vec![0.0; grid.n_steps()],
            terminal: 0.0,
        }
    }

    pub fn grid(&self) -> &PathGrid {
        &self.grid
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `W_R`, the sum of the increments.
    pub fn terminal(&self) -> f64 {
        self.terminal
    }

    /// `W` at every node, starting from `W_0 = 0`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.increments.len() + 1);
        let mut acc = 0.0;
        w.push(acc);
        for dw in &self.increments {
            acc += dw;
            w.push(acc);
        }
        w
    }

    /// The mirrored path `-W`.
    pub fn negated(&self) -> Self {
        Self {
            grid: self.grid,
            increments: self.increments.iter().map(|d| -d).collect(),
            terminal: -self.terminal,
        }
    }
}

/// Standard Brownian increments on `grid`, bit-identical for identical inputs.
pub fn sample_brownian(seed: u64, grid: &PathGrid) -> BrownianPath {
    sample_brownian_stream(seed, 0, grid)
}

/// As [`sample_brownian`], drawing from an independent ChaCha stream.
pub fn sample_brownian_stream(seed: u64, stream: u64, grid: &PathGrid) -> BrownianPath {
    let mut rng = rng_for(seed, stream);
    let scale = grid.dx().sqrt();
    let increments: Vec<f64> = (0..grid.n_steps())
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let terminal = increments.iter().sum();
    BrownianPath {
        grid: *grid,
        increments,
        terminal,
    }
}

/// Grid-sampled telegraph process on `[0, x_max]`; `values[i]` holds on cell `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelegraphPath {
    grid: PathGrid,
    values: Vec<f64>,
    amplitude: f64,
    rate: f64,
}

impl TelegraphPath {
    pub fn grid(&self) -> &PathGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Nearest-cell lookup; `None` outside `[0, x_max]`.
    pub fn value_at(&self, s: f64) -> Option<f64> {
        let slack = 1e-12 * self.grid.x_max();
        if !(s >= -slack && s <= self.grid.x_max() + slack) {
            return None;
        }
        let i = ((s.max(0.0) / self.grid.dx()) as usize).min(self.grid.n_steps() - 1);
        Some(self.values[i])
    }
}

/// Streaming telegraph generator: yields one state per grid cell without
/// materializing the path.
///
/// The first state is uniform on `{-a, +a}`; between cells the state flips with
/// probability `(1 - e^{-2λ dx}) / 2`, the exact transition probability of the
/// continuous-time chain over one cell.
#[derive(Debug, Clone)]
pub struct TelegraphStream {
    rng: ChaCha8Rng,
    amplitude: f64,
    flip_prob: f64,
    state: Option<f64>,
    remaining: usize,
}

impl TelegraphStream {
    pub fn new(seed: u64, stream: u64, grid: &PathGrid, a: f64, lambda: f64) -> Result<Self> {
        check_telegraph_params(grid, a, lambda)?;
        Ok(Self {
            rng: rng_for(seed, stream),
            amplitude: a,
            flip_prob: 0.5 * (1.0 - (-2.0 * lambda * grid.dx()).exp()),
            state: None,
            remaining: grid.n_steps(),
        })
    }
}

impl Iterator for TelegraphStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let next = match self.state {
            None => {
                if self.rng.random::<bool>() {
                    self.amplitude
                } else {
                    -self.amplitude
                }
            }
            Some(s) => {
                if self.rng.random::<f64>() < self.flip_prob {
                    -s
                } else {
                    s
                }
            }
        };
        self.state = Some(next);
        Some(next)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

fn check_telegraph_params(grid: &PathGrid, a: f64, lambda: f64) -> Result<()> {
    ensure_finite("a", a)?;
    ensure_finite("lambda", lambda)?;
    if a <= 0.0 {
        return Err(Error::InvalidParameter(format!("telegraph amplitude must be positive, got {a}")));
    }
    if lambda <= 0.0 {
        return Err(Error::InvalidParameter(format!("telegraph rate must be positive, got {lambda}")));
    }
    if grid.dx() >= 1.0 / (10.0 * lambda) {
        return Err(Error::UnderResolved(format!(
            "telegraph cell {} must be below 1/(10 lambda) = {}",
            grid.dx(),
            1.0 / (10.0 * lambda)
        )));
    }
    Ok(())
}

pub fn sample_telegraph(seed: u64, grid: &PathGrid, a: f64, lambda: f64) -> Result<TelegraphPath> {
    sample_telegraph_stream(seed, 0, grid, a, lambda)
}

pub fn sample_telegraph_stream(
    seed: u64,
    stream: u64,
    grid: &PathGrid,
    a: f64,
    lambda: f64,
) -> Result<TelegraphPath> {
    let values: Vec<f64> = TelegraphStream::new(seed, stream, grid, a, lambda)?.collect();
    Ok(TelegraphPath {
        grid: *grid,
        values,
        amplitude: a,
        rate: lambda,
    })
}

/// `ν(x/ε²) / ε`, the rapidly oscillating rescaling of a telegraph path that
/// lives on the fast domain `[0, R/ε²]`.
pub fn scaled_noise_value(path: &TelegraphPath, epsilon: f64, x: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let s = x / (epsilon * epsilon);
    path.value_at(s)
        .map(|v| v / epsilon)
        .ok_or_else(|| Error::OutOfDomain {
            name: "x/eps^2",
            value: s,
            domain: format!("[0, {}]", path.grid().x_max()),
        })
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::OutOfDomain {
            name: "epsilon",
            value: epsilon,
            domain: "(0, 1]".into(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    RealWhite,
    ComplexWhite,
    Telegraph,
    CustomMean,
}

/// Perturbation amplitude `σ`, integrated covariance `α` and scale `ε`
/// (`None` selects the white-noise limit).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub alpha: f64,
    pub epsilon: Option<f64>,
    pub kind: NoiseKind,
}

impl NoiseSpec {
    pub const DEFAULT_ALPHA: f64 = 0.5;

    pub fn white(sigma: f64) -> Self {
        Self {
            sigma,
            alpha: Self::DEFAULT_ALPHA,
            epsilon: None,
            kind: NoiseKind::RealWhite,
        }
    }

    pub fn complex_white(sigma: f64) -> Self {
        Self {
            kind: NoiseKind::ComplexWhite,
            ..Self::white(sigma)
        }
    }

    pub fn telegraph(sigma: f64, epsilon: f64) -> Self {
        Self {
            epsilon: Some(epsilon),
            kind: NoiseKind::Telegraph,
            ..Self::white(sigma)
        }
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        Self { sigma, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("sigma", self.sigma)?;
        ensure_finite("alpha", self.alpha)?;
        if self.sigma < 0.0 {
            return Err(Error::InvalidParameter(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        if self.alpha <= 0.0 {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        if let Some(eps) = self.epsilon {
            check_epsilon(eps)?;
        }
        Ok(())
    }

    /// White-noise intensity `√(2α) σ` of the limit system.
    pub fn intensity(&self) -> f64 {
        (2.0 * self.alpha).sqrt() * self.sigma
    }
}
