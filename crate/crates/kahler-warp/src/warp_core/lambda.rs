//! Pointwise lower bound for the curvature operator on real (1,1)-forms and its certificate.

use serde::Serialize;

use crate::error::{End, Error, Result};
use crate::scalar::Real;
use crate::warp_core::frame::CurvatureFrameData;
use crate::warp_core::measure::{check_kahler, closure_residuals};
use crate::warp_core::profile::{Jet, WarpProfile};

/// The four strict inequalities at level `lambda`, as signed margins (`> 0` means satisfied).
///
/// For `n = 2` only the second one is meaningful; the others are reported as `+∞`.
pub fn condition_margins<T: Real>(j: &Jet<T>, n: usize, lambda: T) -> [T; 4] {
    let (a, a2) = (j.a[0], j.a[2]);
    let (b, b1, b2) = (j.b[0], j.b[1], j.b[2]);
    let c2 = -a2 - T::lit(4.0) * lambda * a;
    if n < 3 {
        return [T::infinity(), c2, T::infinity(), T::infinity()];
    }
    let c1 = T::one() - lambda * b * b - b1 * b1;
    let c3 = -b2 - lambda * b;
    let f = CurvatureFrameData::from_jet(j);
    let nn = T::from_usize_lossy(n);
    let two = T::lit(2.0);
    let lhs = two * (nn - T::one()) * c1 / ((nn - two) * b * b) * (f.ha - lambda);
    let d = f.hb - lambda;
    [c1, c2, c3, lhs - d * d]
}

pub fn conditions_hold<T: Real>(j: &Jet<T>, n: usize, lambda: T) -> bool {
    condition_margins(j, n, lambda).iter().all(|&c| c > T::zero())
}

/// Best `lambda` at one point by bisection on the four conditions.
pub fn lambda_from_jet<T: Real>(j: &Jet<T>, n: usize, tol: T) -> Result<T> {
    let f = CurvatureFrameData::from_jet(j);
    let cap = if n < 3 { f.ha } else { f.ha.min(f.hb).min(f.p) };
    if !cap.is_finite() {
        return Err(Error::NonConvergence { what: "lambda bracket (non-finite curvature)", iters: 0 });
    }
    let mut hi = cap + T::lit(1e-12) * (T::one() + cap.abs());
    let mut grow = 0;
    while conditions_hold(j, n, hi) {
        hi = hi + T::lit(1e-9) * (T::one() + hi.abs()) * T::lit(4.0).powi(grow);
        grow += 1;
        if grow > 40 {
            return Err(Error::NonConvergence { what: "lambda upper bracket", iters: grow as usize });
        }
    }
    let mut step = T::one().max(cap.abs());
    let mut lo = hi - step;
    let mut tries = 0;
    while !conditions_hold(j, n, lo) {
        step = step * T::lit(2.0);
        lo = hi - step;
        tries += 1;
        if tries > 80 {
            return Err(Error::NonConvergence { what: "lambda lower bracket", iters: tries });
        }
    }
    for _ in 0..1200 {
        // absolute for O(1) values, relative once lambda is small
        if hi - lo <= tol * T::one().min(lo.abs().max(hi.abs())) {
            break;
        }
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if conditions_hold(j, n, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(T::lit(0.5) * (lo + hi))
}

/// Default bisection tolerance for `lambda`.
pub const LAMBDA_TOL: f64 = 1e-9;

/// `lambda(s)` for a profile; negative values are returned as-is.
pub fn lambda_at<T: Real, P: WarpProfile<T>>(profile: &P, s: T) -> Result<T> {
    lambda_from_jet(&profile.jet(s)?, profile.n(), T::lit(LAMBDA_TOL))
}

/// `tol_kahler` appropriate for the profile representation.
pub fn default_kahler_tol<T: Real, P: WarpProfile<T>>(p: &P) -> T {
    if p.is_sampled() {
        T::lit(1e-5)
    } else {
        T::lit(1e-8)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions<T> {
    pub samples: usize,
    pub tol_kahler: Option<T>,
    pub tol_closure: T,
    pub tol_lambda: T,
}

impl<T: Real> Default for CertifyOptions<T> {
    fn default() -> Self {
        CertifyOptions { samples: 2001, tol_kahler: None, tol_closure: T::lit(1e-6), tol_lambda: T::lit(LAMBDA_TOL) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaCertificate {
    pub n: usize,
    pub length: f64,
    pub min_lambda: f64,
    pub argmin: f64,
    pub kahler_residual: f64,
    pub tip_closure_residual: f64,
    pub far_closure_residual: f64,
    pub positive: bool,
    pub samples: Vec<(f64, f64)>,
}

impl LambdaCertificate {
    /// Minimum of `lambda` over samples with `lo <= s <= hi`.
    pub fn min_on(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        self.samples
            .iter()
            .filter(|(s, _)| *s >= lo && *s <= hi)
            .fold(None, |acc: Option<(f64, f64)>, &(s, l)| match acc {
                Some((_, m)) if m <= l => acc,
                _ => Some((s, l)),
            })
    }
}

/// `lambda` on sample points, without Kähler or closure gating.
pub fn lambda_samples<T: Real, P: WarpProfile<T>>(p: &P, points: &[T], tol: T) -> Result<Vec<(T, T)>> {
    points.iter().map(|&s| Ok((s, lambda_from_jet(&p.jet(s)?, p.n(), tol)?))).collect()
}

/// Certifies `lambda > 0` across the profile after checking it is Kähler and closes smoothly.
pub fn certify<T: Real, P: WarpProfile<T>>(p: &P, opts: &CertifyOptions<T>) -> Result<LambdaCertificate> {
    let points = p.sample_points(opts.samples);
    let tol_k = opts.tol_kahler.unwrap_or_else(|| default_kahler_tol(p));
    let kahler = check_kahler(p, &points)?;
    if kahler > tol_k {
        return Err(Error::NotKahler { residual: kahler.as_f64(), tol: tol_k.as_f64() });
    }
    let (tip, far) = closure_residuals(p)?;
    if tip > opts.tol_closure {
        return Err(Error::NotSmoothClosure { end: End::Tip, residual: tip.as_f64(), tol: opts.tol_closure.as_f64() });
    }
    if far > opts.tol_closure {
        return Err(Error::NotSmoothClosure { end: End::Far, residual: far.as_f64(), tol: opts.tol_closure.as_f64() });
    }
    let samples = lambda_samples(p, &points, opts.tol_lambda)?;
    let (argmin, min_lambda) = samples
        .iter()
        .fold((T::nan(), T::infinity()), |acc, &(s, l)| if l < acc.1 { (s, l) } else { acc });
    Ok(LambdaCertificate {
        n: p.n(),
        length: p.length().as_f64(),
        min_lambda: min_lambda.as_f64(),
        argmin: argmin.as_f64(),
        kahler_residual: kahler.as_f64(),
        tip_closure_residual: tip.as_f64(),
        far_closure_residual: far.as_f64(),
        positive: min_lambda > T::zero(),
        samples: samples.into_iter().map(|(s, l)| (s.as_f64(), l.as_f64())).collect(),
    })
}
