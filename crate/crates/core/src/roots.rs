//! Bracketed scalar root finding and one-dimensional maximization.

use crate::error::{Error, Result};

const MAX_ITER: usize = 400;

/// Splits `[lo, hi]` into `samples` equal cells and returns every cell whose
/// endpoints have opposite signs (or a zero at the right endpoint), in
/// increasing order.
pub fn sign_changes<F>(f: F, lo: f64, hi: f64, samples: usize) -> Vec<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    assert!(samples >= 1 && hi > lo);
    let step = (hi - lo) / samples as f64;
    let mut out = Vec::new();
    let mut x_prev = lo;
    let mut f_prev = f(lo);
    for i in 1..=samples {
        let x = if i == samples {
            hi
        } else {
            lo + step * i as f64
        };
        let fx = f(x);
        if f_prev.is_finite()
            && fx.is_finite()
            && (f_prev * fx < 0.0 || (fx == 0.0 && f_prev != 0.0))
        {
            out.push((x_prev, x));
        }
        x_prev = x;
        f_prev = fx;
    }
    out
}

/// Root of `f` in `[lo, hi]` by bisection with secant acceleration.
///
/// Secant steps are accepted only while they land strictly inside the
/// bracket and halve it at least every other iteration; otherwise the
/// midpoint is taken. Stops once the bracket is narrower than `tol_x`
/// (plus a few ulps of the iterate) or an exact zero is hit.
pub fn bisect_secant<F>(f: F, lo: f64, hi: f64, tol_x: f64, what: &str) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let no_root = || Error::NoRoot {
        what: what.to_string(),
        lo,
        hi,
    };
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(no_root());
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(no_root());
    }

    let mut use_secant = true;
    for _ in 0..MAX_ITER {
        let width = b - a;
        let mid = 0.5 * (a + b);
        if width <= tol_x + 4.0 * f64::EPSILON * mid.abs() {
            break;
        }
        let mut x = mid;
        if use_secant {
            let s = b - fb * (b - a) / (fb - fa);
            if s.is_finite() && s > a && s < b {
                x = s;
            }
        }
        let fx = f(x);
        if !fx.is_finite() {
            return Err(no_root());
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        // force a bisection whenever the secant step failed to halve the bracket
        use_secant = (b - a) <= 0.5 * width;
    }
    Ok(if fa.abs() <= fb.abs() { a } else { b })
}

/// Golden-section search for a maximum of a unimodal `f` on `[lo, hi]`.
/// Returns `(x, f(x))`.
pub fn golden_section_max<F>(f: F, lo: f64, hi: f64, tol_x: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..MAX_ITER {
        if (b - a).abs() <= tol_x {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
