//! Soliton content of box potentials for the NLS and KdV equations, and how it
//! responds to small random perturbations of the initial condition.
//!
//! The crate is organised bottom-up:
//!
//! * [`stochastic`]: Brownian and telegraph driving paths.
//! * [`nls`], [`kdv`]: deterministic scattering for the box `q·1_[0,R]`.
//! * [`sde`]: integrators for the white-noise limit systems, the first-order
//!   stochastic convolutions and the rapidly oscillating ε-systems.
//! * [`perturbation`]: first-order corrections to eigenvalues.
//! * [`experiments`]: Monte Carlo campaigns with a direct re-solve oracle.

pub mod error;
pub mod experiments;
pub mod kdv;
pub mod linalg;
pub mod nls;
pub mod perturbation;
pub mod roots;
pub mod sde;
pub mod stats;
pub mod stochastic;

pub use error::{Error, Result};
pub use kdv::{KdvEigenvalueReport, SchrodingerState};
pub use nls::{BoxPotential, EigenvalueReport, JostState, SpectralPoint};
pub use stochastic::{BrownianPath, NoiseKind, NoiseSpec, PathGrid, TelegraphPath};
