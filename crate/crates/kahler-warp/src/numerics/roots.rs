//! Scalar bracketing.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Bisection on a bracket with `f(lo)` and `f(hi)` of opposite sign.
pub fn bisect<T: Real, F: FnMut(T) -> Result<T>>(what: &'static str, mut f: F, lo: T, hi: T, tol: T) -> Result<T> {
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == T::zero() {
        return Ok(lo);
    }
    if fhi == T::zero() {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::BracketNotFound { what, lo: lo.as_f64(), hi: hi.as_f64() });
    }
    for _ in 0..400 {
        let mid = T::lit(0.5) * (lo + hi);
        if (hi - lo).abs() <= tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid)?;
        if fm == T::zero() {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence { what, iters: 400 })
}

/// Scans `f` on `grid` and bisects the first sign change.
pub fn scan_then_bisect<T: Real, F: FnMut(T) -> Result<T>>(what: &'static str, mut f: F, grid: &[T], tol: T) -> Result<T> {
    let mut prev: Option<(T, T)> = None;
    for &x in grid {
        let v = f(x)?;
        if let Some((xp, vp)) = prev {
            if v.is_finite() && vp.is_finite() && (v == T::zero() || v.signum() != vp.signum()) {
                return bisect(what, &mut f, xp, x, tol);
            }
        }
        prev = Some((x, v));
    }
    Err(Error::BracketNotFound {
        what,
        lo: grid.first().map_or(f64::NAN, |v| v.as_f64()),
        hi: grid.last().map_or(f64::NAN, |v| v.as_f64()),
    })
}
