//! Bracketing root finders on real functions.

use crate::error::{Error, Result};

/// A sign-change bracket `[lo, hi]` found by a scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

/// Evaluates `f` on `n + 1` equispaced points of `[lo, hi]` and returns every
/// cell over which the sign flips. An exact zero at an interior grid point closes
/// the bracket on its left; a zero at `lo` itself is not reported.
pub fn scan_sign_changes<F>(f: F, lo: f64, hi: f64, n: usize) -> Vec<Bracket>
where
    F: Fn(f64) -> f64,
{
    let h = (hi - lo) / n as f64;
    let mut out = Vec::new();
    let mut x0 = lo;
    let mut f0 = f(lo);
    for i in 1..=n {
        let x1 = if i == n { hi } else { lo + h * i as f64 };
        let f1 = f(x1);
        if f1 == 0.0 || (f0 != 0.0 && (f0 < 0.0) != (f1 < 0.0)) {
            out.push(Bracket {
                lo: x0,
                hi: x1,
                f_lo: f0,
                f_hi: f1,
            });
        }
        x0 = x1;
        f0 = f1;
    }
    out
}

/// Plain bisection. Stops when the bracket is narrower than `xtol` or an exact
/// zero is hit.
pub fn bisect<F>(f: F, bracket: Bracket, xtol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let Bracket {
        mut lo,
        mut hi,
        mut f_lo,
        f_hi,
    } = bracket;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if (f_lo < 0.0) == (f_hi < 0.0) {
        return Err(Error::RootFinding(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= xtol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Brent's method (inverse quadratic interpolation with bisection fallback).
pub fn brent<F>(f: F, a: f64, b: f64, xtol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if (fa < 0.0) == (fb < 0.0) {
        return Err(Error::RootFinding(format!("no sign change on [{a}, {b}]")));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if (fb < 0.0) == (fc < 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Err(Error::RootFinding("Brent iteration did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scan_finds_all_sign_changes_of_sine() {
        let b = scan_sign_changes(f64::sin, 0.5, 10.0, 200);
        assert_eq!(b.len(), 3);
    }

    #[test]
    fn bisect_and_brent_agree_on_cos() {
        let br = Bracket {
            lo: 1.0,
            hi: 2.0,
            f_lo: 1f64.cos(),
            f_hi: 2f64.cos(),
        };
        let x = bisect(f64::cos, br, 1e-14).unwrap();
        let y = brent(f64::cos, 1.0, 2.0, 1e-14).unwrap();
        assert!((x - std::f64::consts::FRAC_PI_2).abs() < 1e-13);
        assert!((y - std::f64::consts::FRAC_PI_2).abs() < 1e-13);
    }

    #[test]
    fn brent_rejects_same_sign() {
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }
}
