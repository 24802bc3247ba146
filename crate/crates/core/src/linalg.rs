//! Minimal 2x2 complex linear algebra used by the flow integrators.

use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

pub type Vec2 = [Complex64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub m: [[Complex64; 2]; 2],
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

impl Mat2 {
    pub const fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Self { m: [[a, b], [c, d]] }
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self::new(a.into(), b.into(), c.into(), d.into())
    }

    pub const fn zero() -> Self {
        Self::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub const fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    /// The swap matrix `[[0, 1], [1, 0]]`.
    pub const fn swap() -> Self {
        Self::new(ZERO, ONE, ONE, ZERO)
    }

    /// The rotation generator `[[0, 1], [-1, 0]]`.
    pub const fn rotation() -> Self {
        Self::new(ZERO, ONE, Complex64::new(-1.0, 0.0), ZERO)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let m = &self.m;
        Self::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn apply(&self, v: &Vec2) -> Vec2 {
        let m = &self.m;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    /// `(I + G + G²/2 + G³/6 + G⁴/24) v`, evaluated in Horner form.
    ///
    /// This is one classical RK4 step for `v' = (G/h) v` over a step `h`.
    pub fn taylor4_apply(&self, v: &Vec2) -> Vec2 {
        let mut acc = *v;
        for k in [4.0, 3.0, 2.0, 1.0] {
            let g = self.apply(&acc);
            acc = [v[0] + g[0] / k, v[1] + g[1] / k];
        }
        acc
    }

    /// `(I + G + G²/2) v`, the Heun step for `v' = (G/h) v`.
    pub fn taylor2_apply(&self, v: &Vec2) -> Vec2 {
        let g = self.apply(v);
        let half = [v[0] + g[0] / 2.0, v[1] + g[1] / 2.0];
        let g2 = self.apply(&half);
        [v[0] + g2[0], v[1] + g2[1]]
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.m;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.m, &o.m);
        Mat2::new(
            a[0][0] + b[0][0],
            a[0][1] + b[0][1],
            a[1][0] + b[1][0],
            a[1][1] + b[1][1],
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + o.scale_re(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (&self.m, &o.m);
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

/// `sin(c x) / c` with the removable singularity at `c = 0` filled in.
pub fn sinc_scaled(c: Complex64, x: f64) -> Complex64 {
    let cx = c * x;
    if cx.norm() < 1e-4 {
        let z2 = cx * cx;
        x * (1.0 - z2 / 6.0 + z2 * z2 / 120.0)
    } else {
        cx.sin() / c
    }
}

/// Real version of [`sinc_scaled`].
pub fn sinc_scaled_re(c: f64, x: f64) -> f64 {
    let cx = c * x;
    if cx.abs() < 1e-4 {
        let z2 = cx * cx;
        x * (1.0 - z2 / 6.0 + z2 * z2 / 120.0)
    } else {
        cx.sin() / c
    }
}
