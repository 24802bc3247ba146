//! Integrators for the scattering flows over `[0, R]`.
//!
//! Three families are covered:
//!
//! * the white-noise limit systems (NLS with real or complex noise, KdV),
//! * the first-order stochastic convolutions `∂σΨ`, `∂σΦ` at `σ = 0`,
//! * the ε-scaled ODE systems driven by a telegraph process.
//!
//! All systems are linear, `dX = A X dx + Σ_k B_k X ∘ dW_k`. The default scheme
//! replaces each increment by its piecewise-linear interpolant and advances the
//! resulting constant-coefficient ODE over a cell with one RK4 step, i.e.
//! `X ← T₄(A dx + Σ B_k ΔW_k) X` with `T₄` the degree-4 Taylor polynomial of
//! `exp`. This converges to the Stratonovich solution and is fourth order when
//! the noise vanishes.

use crate::error::{Error, Result};
use crate::kdv::SchrodingerState;
use crate::linalg::{Mat2, Vec2};
use crate::nls::{BoxPotential, JostState, SpectralPoint};
use crate::stochastic::{check_epsilon, BrownianPath, NoiseSpec, PathGrid, TelegraphPath, TelegraphStream};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Wong–Zakai interpolation with an RK4 step per cell.
    #[default]
    WongZakaiRk4,
    /// Stratonovich Heun (midpoint) step.
    Heun,
    /// Euler–Maruyama on the Itô form.
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Nls,
    Kdv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitEquation {
    NlsReal,
    NlsComplex,
    Kdv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSystemSpec {
    pub equation: LimitEquation,
    pub pot: BoxPotential,
    pub zeta: SpectralPoint,
    pub noise: NoiseSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowResult<S> {
    pub terminal_state: S,
    /// States at every grid node, `trajectory[0]` being the initial state.
    pub trajectory: Option<Vec<S>>,
    pub grid: PathGrid,
}

impl<S: Copy> FlowResult<S> {
    fn map<T>(self, f: impl Fn(S) -> T) -> FlowResult<T> {
        FlowResult {
            terminal_state: f(self.terminal_state),
            trajectory: self.trajectory.map(|t| t.into_iter().map(&f).collect()),
            grid: self.grid,
        }
    }
}

/// Scheme choice plus trajectory retention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Integrator {
    pub scheme: Scheme,
    pub keep_trajectory: bool,
}

impl Integrator {
    pub fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            keep_trajectory: false,
        }
    }

    pub fn with_trajectory(self, keep: bool) -> Self {
        Self {
            keep_trajectory: keep,
            ..self
        }
    }

    /// Real-noise NLS limit system from `Ψ(0) = (1, 0)`.
    pub fn nls_limit(&self, spec: &LimitSystemSpec, path: &BrownianPath) -> Result<FlowResult<JostState>> {
        spec.noise.validate()?;
        let a = nls_drift(spec.pot.q, spec.zeta.as_complex());
        let b = Mat2::swap().scale(I * spec.noise.intensity());
        let x0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let flow = drive(a, &[b], &[path], x0, self.scheme, self.keep_trajectory)?;
        Ok(flow.map(to_jost))
    }

    /// NLS with `U = q + σ(Ẇ₁ + iẆ₂)` from `Ψ(0) = (1, 0)`.
    pub fn nls_complex_limit(
        &self,
        spec: &LimitSystemSpec,
        path1: &BrownianPath,
        path2: &BrownianPath,
    ) -> Result<FlowResult<JostState>> {
        spec.noise.validate()?;
        let s = spec.noise.intensity();
        let a = nls_drift(spec.pot.q, spec.zeta.as_complex());
        let b1 = Mat2::swap().scale(I * s);
        let b2 = Mat2::rotation().scale_re(-s);
        let x0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let flow = drive(a, &[b1, b2], &[path1, path2], x0, self.scheme, self.keep_trajectory)?;
        Ok(flow.map(to_jost))
    }

    /// KdV limit system `dφ = φₓ dx`, `dφₓ = −(q − η²) φ dx − √(2α) σ φ dW`
    /// from `(φ, φₓ)(0) = (1, η)`. Requires `ζ = iη`.
    pub fn kdv_limit(&self, spec: &LimitSystemSpec, path: &BrownianPath) -> Result<FlowResult<SchrodingerState>> {
        spec.noise.validate()?;
        if spec.zeta.xi != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "the KdV flow is defined on the imaginary axis, got xi = {}",
                spec.zeta.xi
            )));
        }
        let eta = spec.zeta.eta;
        let a = kdv_drift(spec.pot.q, Complex64::new(0.0, eta));
        let b = Mat2::real(0.0, 0.0, -spec.noise.intensity(), 0.0);
        let x0 = [Complex64::new(1.0, 0.0), Complex64::new(eta, 0.0)];
        let flow = drive(a, &[b], &[path], x0, self.scheme, self.keep_trajectory)?;
        Ok(flow.map(to_schrodinger))
    }
}

pub fn integrate_nls_limit(spec: &LimitSystemSpec, path: &BrownianPath) -> Result<FlowResult<JostState>> {
    Integrator::default().nls_limit(spec, path)
}

pub fn integrate_nls_complex_limit(
    spec: &LimitSystemSpec,
    path1: &BrownianPath,
    path2: &BrownianPath,
) -> Result<FlowResult<JostState>> {
    Integrator::default().nls_complex_limit(spec, path1, path2)
}

pub fn integrate_kdv_limit(spec: &LimitSystemSpec, path: &BrownianPath) -> Result<FlowResult<SchrodingerState>> {
    Integrator::default().kdv_limit(spec, path)
}

fn to_jost(v: Vec2) -> JostState {
    JostState { psi1: v[0], psi2: v[1] }
}

fn to_schrodinger(v: Vec2) -> SchrodingerState {
    SchrodingerState {
        phi: v[0].re,
        phi_x: v[1].re,
    }
}

/// `[[−iζ, iq], [iq, iζ]]`.
pub(crate) fn nls_drift(q: f64, zeta: Complex64) -> Mat2 {
    Mat2::new(-I * zeta, I * q, I * q, I * zeta)
}

/// `[[0, 1], [−(q + ζ²), 0]]`.
pub(crate) fn kdv_drift(q: f64, zeta: Complex64) -> Mat2 {
    let one = Complex64::new(1.0, 0.0);
    Mat2::new(Complex64::new(0.0, 0.0), one, -(q + zeta * zeta), Complex64::new(0.0, 0.0))
}

fn grid_mismatch(got: &PathGrid, want: &PathGrid) -> Error {
    Error::GridMismatch {
        x_max: got.x_max(),
        n_steps: got.n_steps(),
        expected: format!("the grid (x_max = {}, n = {})", want.x_max(), want.n_steps()),
    }
}

fn drive(
    a: Mat2,
    b: &[Mat2],
    paths: &[&BrownianPath],
    x0: Vec2,
    scheme: Scheme,
    keep: bool,
) -> Result<FlowResult<Vec2>> {
    let grid = *paths[0].grid();
    for p in &paths[1..] {
        if !p.grid().same_as(&grid) {
            return Err(grid_mismatch(p.grid(), &grid));
        }
    }
    let dx = grid.dx();
    let ad = a.scale_re(dx);
    let ito = b.iter().fold(a, |acc, bk| acc + (*bk * *bk).scale_re(0.5)).scale_re(dx);
    let mut x = x0;
    let mut traj = keep.then(|| {
        let mut t = Vec::with_capacity(grid.n_steps() + 1);
        t.push(x0);
        t
    });
    for i in 0..grid.n_steps() {
        let noise = b
            .iter()
            .zip(paths)
            .fold(Mat2::zero(), |acc, (bk, p)| acc + bk.scale_re(p.increments()[i]));
        x = match scheme {
            Scheme::WongZakaiRk4 => (ad + noise).taylor4_apply(&x),
            Scheme::Heun => (ad + noise).taylor2_apply(&x),
            Scheme::EulerMaruyama => {
                let g = (ito + noise).apply(&x);
                [x[0] + g[0], x[1] + g[1]]
            }
        };
        if let Some(t) = traj.as_mut() {
            t.push(x);
        }
    }
    Ok(FlowResult {
        terminal_state: x,
        trajectory: traj,
        grid,
    })
}

/// `exp(M t)` for `M = [[η₀, iq], [iq, −η₀]]`, using `M² = −c₀² I`.
pub(crate) fn nls_first_order_propagator(q: f64, eta0: f64, t: f64) -> Mat2 {
    let c0 = (q * q - eta0 * eta0).sqrt();
    let m = Mat2::new(eta0.into(), I * q, I * q, (-eta0).into());
    Mat2::identity().scale_re((c0 * t).cos()) + m.scale_re(crate::linalg::sinc_scaled_re(c0, t))
}

/// Integrands of `Ψ⁽¹⁾(R)` against `dW₁` and `dW₂` at `y`:
/// `exp(M(R−y)) B_k Ψ⁽⁰⁾(y)` with `B₁ = iP`, `B₂ = −J`.
pub(crate) fn nls_first_order_kernels(q: f64, eta0: f64, r: f64, y: f64) -> (Vec2, Vec2) {
    let psi0 = nls_first_order_propagator(q, eta0, y).apply(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
    let prop = nls_first_order_propagator(q, eta0, r - y);
    let k1 = prop.apply(&Mat2::swap().scale(I).apply(&psi0));
    let k2 = prop.apply(&Mat2::rotation().scale_re(-1.0).apply(&psi0));
    (k1, k2)
}

fn check_nls_eta0(pot: &BoxPotential, eta0: f64) -> Result<()> {
    if !(eta0 >= 0.0 && eta0 < pot.q) {
        return Err(Error::OutOfDomain {
            name: "eta0",
            value: eta0,
            domain: format!("[0, {})", pot.q),
        });
    }
    Ok(())
}

fn check_path_width(pot: &BoxPotential, grid: &PathGrid) -> Result<()> {
    if (grid.x_max() - pot.r).abs() > 1e-12 * pot.r {
        return Err(Error::GridMismatch {
            x_max: grid.x_max(),
            n_steps: grid.n_steps(),
            expected: format!("the potential width R = {}", pot.r),
        });
    }
    Ok(())
}

/// `Ψ⁽¹⁾(R) = ∫₀ᴿ exp(M(R−y)) iP Ψ⁽⁰⁾(y) dW_y`, the derivative of the real-noise
/// NLS flow in the noise intensity `√(2α)σ` at zero intensity, by left-point
/// quadrature.
pub fn integrate_nls_first_order(pot: &BoxPotential, eta0: f64, path: &BrownianPath) -> Result<JostState> {
    check_nls_eta0(pot, eta0)?;
    check_path_width(pot, path.grid())?;
    let grid = path.grid();
    let mut acc = [Complex64::new(0.0, 0.0); 2];
    for (i, dw) in path.increments().iter().enumerate() {
        let (k1, _) = nls_first_order_kernels(pot.q, eta0, pot.r, grid.node(i));
        acc[0] += k1[0] * dw;
        acc[1] += k1[1] * dw;
    }
    Ok(to_jost(acc))
}

/// Complex-noise analogue of [`integrate_nls_first_order`]; `path2` drives the
/// imaginary part of the potential.
pub fn integrate_nls_complex_first_order(
    pot: &BoxPotential,
    eta0: f64,
    path1: &BrownianPath,
    path2: &BrownianPath,
) -> Result<JostState> {
    check_nls_eta0(pot, eta0)?;
    check_path_width(pot, path1.grid())?;
    if !path1.grid().same_as(path2.grid()) {
        return Err(grid_mismatch(path2.grid(), path1.grid()));
    }
    let grid = path1.grid();
    let mut acc = [Complex64::new(0.0, 0.0); 2];
    for i in 0..grid.n_steps() {
        let (k1, k2) = nls_first_order_kernels(pot.q, eta0, pot.r, grid.node(i));
        let (d1, d2) = (path1.increments()[i], path2.increments()[i]);
        acc[0] += k1[0] * d1 + k2[0] * d2;
        acc[1] += k1[1] * d1 + k2[1] * d2;
    }
    Ok(to_jost(acc))
}

/// `(∂σφ, ∂σφₓ)(R)` with
/// `∂σφ(R) = −∫ sin(c(R−y))/c φ₀(y) dW`, `∂σφₓ(R) = −∫ cos(c(R−y)) φ₀(y) dW`,
/// per unit intensity `√(2α)σ`.
pub fn integrate_kdv_first_order(pot: &BoxPotential, eta0: f64, path: &BrownianPath) -> Result<SchrodingerState> {
    let sq = pot.q.sqrt();
    if !(eta0 >= 0.0 && (eta0 < sq || (pot.q == 0.0 && eta0 == 0.0))) {
        return Err(Error::OutOfDomain {
            name: "eta0",
            value: eta0,
            domain: format!("[0, {sq})"),
        });
    }
    check_path_width(pot, path.grid())?;
    let c = (pot.q - eta0 * eta0).sqrt();
    let grid = path.grid();
    let mut acc = SchrodingerState { phi: 0.0, phi_x: 0.0 };
    for (i, dw) in path.increments().iter().enumerate() {
        let y = grid.node(i);
        let phi0 = crate::kdv::bound_closed_form(c, eta0, y).phi;
        acc.phi -= crate::linalg::sinc_scaled_re(c, pot.r - y) * phi0 * dw;
        acc.phi_x -= (c * (pot.r - y)).cos() * phi0 * dw;
    }
    Ok(acc)
}

/// Telegraph amplitude `a` and rate `λ` backing an ε-system run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelegraphParams {
    pub amplitude: f64,
    pub rate: f64,
    /// Fast-time cell width.
    pub dt: f64,
}

impl TelegraphParams {
    /// `a = √(2αλ)` so that `a²/(2λ) = α`, with `λ = 1` and `dt = 0.05`.
    pub fn for_alpha(alpha: f64) -> Self {
        Self {
            amplitude: (2.0 * alpha).sqrt(),
            rate: 1.0,
            dt: 0.05,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.amplitude * self.amplitude / (2.0 * self.rate)
    }

    /// Fast-time grid on `[0, R/ε²]`.
    pub fn fast_grid(&self, r: f64, epsilon: f64) -> Result<PathGrid> {
        check_epsilon(epsilon)?;
        PathGrid::with_max_step(r / (epsilon * epsilon), self.dt)
    }
}

/// Coefficient matrix as a function of the noise value.
type Generator = Box<dyn Fn(f64) -> Mat2>;

fn eps_setup(
    equation: Equation,
    pot: &BoxPotential,
    zeta: SpectralPoint,
    noise: &NoiseSpec,
    grid: &PathGrid,
    alpha: f64,
) -> Result<(f64, Generator, Vec2)> {
    noise.validate()?;
    let eps = noise.epsilon.ok_or_else(|| {
        Error::InvalidParameter("the oscillating system needs an epsilon".into())
    })?;
    if (alpha - noise.alpha).abs() > 1e-12 * noise.alpha {
        return Err(Error::InvalidParameter(format!(
            "telegraph covariance a^2/(2 lambda) = {alpha} does not match alpha = {}",
            noise.alpha
        )));
    }
    let expected = pot.r / (eps * eps);
    if (grid.x_max() - expected).abs() > 1e-9 * expected {
        return Err(Error::GridMismatch {
            x_max: grid.x_max(),
            n_steps: grid.n_steps(),
            expected: format!("the fast domain R/eps^2 = {expected}"),
        });
    }
    let h = grid.dx() * eps * eps;
    let (q, z, scale) = (pot.q, zeta.as_complex(), noise.sigma / eps);
    let (gen, x0): (Generator, Vec2) = match equation {
        Equation::Nls => (
            Box::new(move |nu| nls_drift(q + scale * nu, z).scale_re(h)),
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        ),
        Equation::Kdv => (
            Box::new(move |nu| kdv_drift(q + scale * nu, z).scale_re(h)),
            [Complex64::new(1.0, 0.0), -I * z],
        ),
    };
    Ok((h, gen, x0))
}

/// RK4 solution of the ε-system with potential `q + (σ/ε) ν(x/ε²)`, frozen on
/// each telegraph cell. Returns `(ψ₁, ψ₂)` or `(φ, φₓ)` on the fine grid.
pub fn integrate_eps_system(
    equation: Equation,
    pot: &BoxPotential,
    zeta: SpectralPoint,
    noise: &NoiseSpec,
    tpath: &TelegraphPath,
) -> Result<FlowResult<Vec2>> {
    let alpha = tpath.amplitude().powi(2) / (2.0 * tpath.rate());
    if tpath.grid().dx() >= 1.0 / (10.0 * tpath.rate()) {
        return Err(Error::UnderResolved(format!(
            "telegraph cell {} must be below 1/(10 lambda)",
            tpath.grid().dx()
        )));
    }
    let (_, gen, x0) = eps_setup(equation, pot, zeta, noise, tpath.grid(), alpha)?;
    let mut x = x0;
    for &nu in tpath.values() {
        x = gen(nu).taylor4_apply(&x);
    }
    Ok(FlowResult {
        terminal_state: x,
        trajectory: None,
        grid: PathGrid::new(pot.r, tpath.grid().n_steps())?,
    })
}

/// Streaming variant of [`integrate_eps_system`]: the telegraph states are drawn
/// on the fly from `(seed, stream)` and never stored.
pub fn integrate_eps_streaming(
    equation: Equation,
    pot: &BoxPotential,
    zeta: SpectralPoint,
    noise: &NoiseSpec,
    params: &TelegraphParams,
    seed: u64,
    stream: u64,
) -> Result<Vec2> {
    let eps = noise.epsilon.ok_or_else(|| {
        Error::InvalidParameter("the oscillating system needs an epsilon".into())
    })?;
    let grid = params.fast_grid(pot.r, eps)?;
    let telegraph = TelegraphStream::new(seed, stream, &grid, params.amplitude, params.rate)?;
    let (_, gen, x0) = eps_setup(equation, pot, zeta, noise, &grid, params.alpha())?;
    Ok(telegraph.fold(x0, |x, nu| gen(nu).taylor4_apply(&x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kdv::kdv_bound_solution;
    use crate::nls::nls_jost_box;
    use crate::stochastic::{sample_brownian, sample_telegraph};

    fn spec(eq: LimitEquation, q: f64, r: f64, zeta: SpectralPoint, sigma: f64) -> LimitSystemSpec {
        LimitSystemSpec {
            equation: eq,
            pot: BoxPotential::new(q, r).unwrap(),
            zeta,
            noise: NoiseSpec::white(sigma),
        }
    }

    #[test]
    fn nls_deterministic_matches_closed_form() {
        let s = spec(LimitEquation::NlsReal, 1.0, 2.0, SpectralPoint::imaginary(0.5).unwrap(), 0.0);
        let grid = PathGrid::new(2.0, 2000).unwrap();
        let f = integrate_nls_limit(&s, &BrownianPath::zero(grid)).unwrap();
        let exact = nls_jost_box(&s.pot, s.zeta, 2.0).unwrap();
        assert!((f.terminal_state.psi1 - exact.psi1).norm() < 1e-10);
        assert!((f.terminal_state.psi2 - exact.psi2).norm() < 1e-10);
    }

    #[test]
    fn nls_real_spectral_parameter_conserves_norm() {
        let s = spec(LimitEquation::NlsReal, 1.3, 2.0, SpectralPoint::new(0.7, 0.0).unwrap(), 0.0);
        let grid = PathGrid::new(2.0, 400).unwrap();
        let f = Integrator::default()
            .with_trajectory(true)
            .nls_limit(&s, &BrownianPath::zero(grid))
            .unwrap();
        let traj = f.trajectory.unwrap();
        assert_eq!(traj.len(), 401);
        assert_eq!(*traj.last().unwrap(), f.terminal_state);
        for st in &traj {
            assert!((st.norm_sqr() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn complex_limit_reduces_to_real_with_zero_second_path() {
        let grid = PathGrid::new(2.0, 500).unwrap();
        let p1 = sample_brownian(3, &grid);
        let zero = BrownianPath::zero(grid);
        let mut s = spec(LimitEquation::NlsReal, 1.0, 2.0, SpectralPoint::new(0.1, 0.4).unwrap(), 0.2);
        let real = integrate_nls_limit(&s, &p1).unwrap();
        s.equation = LimitEquation::NlsComplex;
        let cplx = integrate_nls_complex_limit(&s, &p1, &zero).unwrap();
        assert_eq!(real.terminal_state, cplx.terminal_state);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let s = spec(LimitEquation::NlsComplex, 1.0, 2.0, SpectralPoint::imaginary(0.5).unwrap(), 0.1);
        let p1 = sample_brownian(1, &PathGrid::new(2.0, 100).unwrap());
        let p2 = sample_brownian(2, &PathGrid::new(2.0, 200).unwrap());
        assert!(matches!(
            integrate_nls_complex_limit(&s, &p1, &p2),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn kdv_deterministic_matches_closed_form() {
        let s = spec(LimitEquation::Kdv, 1.0, 1.0, SpectralPoint::imaginary(0.3).unwrap(), 0.0);
        let grid = PathGrid::new(1.0, 1000).unwrap();
        let f = integrate_kdv_limit(&s, &BrownianPath::zero(grid)).unwrap();
        let exact = kdv_bound_solution(&s.pot, 0.3, 1.0).unwrap();
        assert!((f.terminal_state.phi - exact.phi).abs() < 1e-12);
        assert!((f.terminal_state.phi_x - exact.phi_x).abs() < 1e-12);
    }

    #[test]
    fn kdv_rejects_off_axis() {
        let s = spec(LimitEquation::Kdv, 1.0, 1.0, SpectralPoint::new(0.1, 0.3).unwrap(), 0.0);
        let grid = PathGrid::new(1.0, 10).unwrap();
        assert!(integrate_kdv_limit(&s, &BrownianPath::zero(grid)).is_err());
    }

    #[test]
    fn kdv_zero_potential_leading_order() {
        // q = 0, η = 0: φₓ(R) = −∫φ dW ≈ −W_R for small R.
        let s = spec(LimitEquation::Kdv, 0.0, 0.1, SpectralPoint::imaginary(0.0).unwrap(), 1.0);
        let grid = PathGrid::new(0.1, 1000).unwrap();
        let path = sample_brownian(11, &grid);
        let f = integrate_kdv_limit(&s, &path).unwrap();
        assert!((f.terminal_state.phi_x + path.terminal()).abs() < 0.05);
    }

    #[test]
    fn schemes_agree_without_noise() {
        let s = spec(LimitEquation::NlsReal, 1.0, 2.0, SpectralPoint::imaginary(0.5).unwrap(), 0.0);
        let grid = PathGrid::new(2.0, 4000).unwrap();
        let zero = BrownianPath::zero(grid);
        let exact = nls_jost_box(&s.pot, s.zeta, 2.0).unwrap().psi1;
        for scheme in [Scheme::Heun, Scheme::EulerMaruyama] {
            let f = Integrator::new(scheme).nls_limit(&s, &zero).unwrap();
            assert!((f.terminal_state.psi1 - exact).norm() < 5e-3);
        }
    }

    #[test]
    fn first_order_zero_path() {
        let pot = BoxPotential::new(1.0, 3.0).unwrap();
        let zero = BrownianPath::zero(PathGrid::new(3.0, 100).unwrap());
        let j = integrate_nls_first_order(&pot, 0.6, &zero).unwrap();
        assert_eq!(j.psi1.norm(), 0.0);
        let k = integrate_kdv_first_order(&BoxPotential::new(5.0, 3.0).unwrap(), 0.6, &zero).unwrap();
        assert_eq!(k.phi, 0.0);
        assert!(integrate_nls_first_order(&pot, 1.0, &zero).is_err());
    }

    #[test]
    fn nls_first_order_kernel_matches_scalar_display() {
        let (q, eta0, r) = (1.0f64, 0.65, 3.0);
        let c0 = (q * q - eta0 * eta0).sqrt();
        for y in [0.0, 0.4, 1.7, 2.9] {
            let (k1, _) = nls_first_order_kernels(q, eta0, r, y);
            let display = q / c0 * (c0 * r).sin() + 2.0 * eta0 * q / (c0 * c0) * (c0 * (r - y)).sin() * (c0 * y).sin();
            assert!((k1[0] - Complex64::new(-display, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn quiescent_first_order_is_minus_terminal() {
        let pot = BoxPotential::new(1.0, std::f64::consts::FRAC_PI_2).unwrap();
        let path = sample_brownian(5, &PathGrid::new(pot.r, 200).unwrap());
        let j = integrate_nls_first_order(&pot, 0.0, &path).unwrap();
        assert!((j.psi1 + path.terminal()).norm() < 1e-12);
    }

    #[test]
    fn eps_system_without_noise_matches_closed_forms() {
        let pot = BoxPotential::new(1.0, 1.0).unwrap();
        let params = TelegraphParams::for_alpha(0.5);
        let noise = NoiseSpec::telegraph(0.0, 0.5);
        let grid = params.fast_grid(1.0, 0.5).unwrap();
        let tp = sample_telegraph(1, &grid, params.amplitude, params.rate).unwrap();
        let zeta = SpectralPoint::imaginary(0.5).unwrap();
        let f = integrate_eps_system(Equation::Nls, &pot, zeta, &noise, &tp).unwrap();
        let exact = nls_jost_box(&pot, zeta, 1.0).unwrap();
        assert!((f.terminal_state[0] - exact.psi1).norm() < 1e-6);
        let f = integrate_eps_system(Equation::Kdv, &pot, zeta, &noise, &tp).unwrap();
        let exact = kdv_bound_solution(&pot, 0.5, 1.0).unwrap();
        assert!((f.terminal_state[0].re - exact.phi).abs() < 1e-6);
    }

    #[test]
    fn eps_streaming_equals_materialized() {
        let pot = BoxPotential::new(1.0, 1.0).unwrap();
        let params = TelegraphParams::for_alpha(0.5);
        let noise = NoiseSpec::telegraph(0.3, 0.4);
        let grid = params.fast_grid(1.0, 0.4).unwrap();
        let tp = crate::stochastic::sample_telegraph_stream(9, 2, &grid, params.amplitude, params.rate).unwrap();
        let zeta = SpectralPoint::imaginary(0.5).unwrap();
        let a = integrate_eps_system(Equation::Nls, &pot, zeta, &noise, &tp).unwrap().terminal_state;
        let b = integrate_eps_streaming(Equation::Nls, &pot, zeta, &noise, &params, 9, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn eps_system_rejects_alpha_mismatch_and_missing_epsilon() {
        let pot = BoxPotential::new(1.0, 1.0).unwrap();
        let params = TelegraphParams::for_alpha(0.5);
        let zeta = SpectralPoint::imaginary(0.5).unwrap();
        let mut noise = NoiseSpec::telegraph(0.3, 0.4);
        noise.alpha = 0.25;
        assert!(integrate_eps_streaming(Equation::Nls, &pot, zeta, &noise, &params, 1, 0).is_err());
        let noise = NoiseSpec::white(0.3);
        assert!(integrate_eps_streaming(Equation::Nls, &pot, zeta, &noise, &params, 1, 0).is_err());
        let coarse = TelegraphParams { dt: 0.2, ..params };
        assert!(matches!(
            integrate_eps_streaming(Equation::Nls, &pot, zeta, &NoiseSpec::telegraph(0.3, 0.4), &coarse, 1, 0),
            Err(Error::UnderResolved(_))
        ));
    }
}
