//! Closure, Kähler, volume, distance and curvature read-outs of a profile.

use serde::Serialize;

use crate::error::{End, Error, Result};
use crate::numerics::quad::Quad;
use crate::scalar::Real;
use crate::warp_core::frame::CurvatureFrameData;
use crate::warp_core::profile::{HalfFubiniStudy, WarpProfile};
use crate::warp_core::tensor::CurvatureTensor;

/// Largest `|a - b b'|` over the points.
pub fn check_kahler<T: Real, P: WarpProfile<T>>(p: &P, points: &[T]) -> Result<T> {
    let mut worst = T::zero();
    for &s in points {
        worst = worst.max(p.jet(s)?.kahler_residual());
    }
    Ok(worst)
}

/// Closure residuals `(tip, far)`.
///
/// Tip: `a = 0, a' = 1, a'' = 0, b = 0, b' = 1, b'' = 0`. Far end: `a = 0, a' = -1, a'' = 0, b' = 0`.
/// A non-positive `b(L)` makes the far residual infinite.
pub fn closure_residuals<T: Real, P: WarpProfile<T>>(p: &P) -> Result<(T, T)> {
    let j0 = p.jet(T::zero())?;
    let jl = p.jet(p.length())?;
    let one = T::one();
    let tip = [j0.a[0], j0.a[1] - one, j0.a[2], j0.b[0], j0.b[1] - one, j0.b[2]]
        .iter()
        .fold(T::zero(), |m, v| m.max(v.abs()));
    let mut far = [jl.a[0], jl.a[1] + one, jl.a[2], jl.b[1]].iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if !(jl.b[0] > T::zero()) {
        far = T::infinity();
    }
    Ok((tip, far))
}

/// Fails with [`Error::NotSmoothClosure`] when either end misses the closure conditions.
pub fn check_smooth_closure<T: Real, P: WarpProfile<T>>(p: &P, tol: T) -> Result<(T, T)> {
    let (tip, far) = closure_residuals(p)?;
    if tip > tol {
        return Err(Error::NotSmoothClosure { end: End::Tip, residual: tip.as_f64(), tol: tol.as_f64() });
    }
    if far > tol {
        return Err(Error::NotSmoothClosure { end: End::Far, residual: far.as_f64(), tol: tol.as_f64() });
    }
    Ok((tip, far))
}

/// Volume of the unit sphere `S^{2m+1}`.
pub fn unit_sphere_volume<T: Real>(m: usize) -> T {
    let mut fact = T::one();
    for j in 2..=m {
        fact = fact * T::from_usize_lossy(j);
    }
    T::lit(2.0) * T::PI().powi(m as i32 + 1) / fact
}

/// Riemannian volume of the half Fubini–Study profile, by quadrature.
pub fn fubini_study_volume<T: Real>(n: usize) -> Result<T> {
    let p = HalfFubiniStudy { n };
    volume_by_quadrature(&p)
}

/// Normalising constant `c(n)` with `vol = c(n) b(L)^{2n-2} / (2n-2)`.
pub fn volume_constant<T: Real>(n: usize) -> Result<T> {
    Ok(T::from_usize_lossy(2 * n - 2) * fubini_study_volume(n)?)
}

/// Closed-form volume of a Kähler profile, depending only on `b(L)`.
pub fn volume<T: Real, P: WarpProfile<T>>(p: &P) -> Result<T> {
    let n = p.n();
    let bl = p.jet(p.length())?.b[0];
    Ok(volume_constant::<T>(n)? * bl.powi(2 * n as i32 - 2) / T::from_usize_lossy(2 * n - 2))
}

/// Volume from the Riemannian volume form `a b^{2n-4} ds` times the unit link volume.
pub fn volume_by_quadrature<T: Real, P: WarpProfile<T>>(p: &P) -> Result<T> {
    let m = p.n() - 2;
    let mut err = None;
    let v = Quad::default().value(
        |s| match p.jet(s) {
            Ok(j) => j.a[0] * j.b[0].powi(2 * m as i32),
            Err(e) => {
                err.get_or_insert(e);
                T::zero()
            }
        },
        T::zero(),
        p.length(),
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(unit_sphere_volume::<T>(m) * v)
}

/// Gromov–Hausdorff distance upper bound to a point: `½ sup (π a + (π/2) b)`.
pub fn gh_upper_bound<T: Real, P: WarpProfile<T>>(p: &P, samples: usize) -> Result<T> {
    let mut pts = p.sample_points(samples);
    pts.push(T::zero());
    pts.push(p.length());
    let mut best = T::zero();
    for s in pts {
        let j = p.jet(s)?;
        best = best.max(T::PI() * j.a[0] + T::FRAC_PI_2() * j.b[0]);
    }
    Ok(T::lit(0.5) * best)
}

/// Hessian of a radial function with derivatives `f1 = f'`, `f2 = f''`, in the frame `(ds, η, gᵀ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hessian<T> {
    pub rr: T,
    pub eta: T,
    pub transverse: T,
}

pub fn hessian<T: Real, P: WarpProfile<T>>(p: &P, s: T, f1: T, f2: T) -> Result<Hessian<T>> {
    let j = p.jet(s)?;
    Ok(Hessian { rr: f2, eta: f1 * j.a[1] / j.a[0], transverse: f1 * j.b[1] / j.b[0] })
}

/// Ricci eigenvalues on unit vectors along `ds`, the fibre, and the horizontal block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RicciComponents<T> {
    pub rr: T,
    pub eta: T,
    pub transverse: T,
}

pub fn ricci_components<T: Real, P: WarpProfile<T>>(p: &P, s: T) -> Result<RicciComponents<T>> {
    let f = CurvatureFrameData::from_jet(&p.jet(s)?);
    let (radial, transverse) = f.ricci(p.n() - 2);
    Ok(RicciComponents { rr: radial, eta: radial, transverse })
}

/// Sectional curvature of the real 2-plane spanned by `x`, `y` in the adapted orthonormal frame
/// `(e_1, J e_1, …, e_{n-1}, J e_{n-1})`, the last pair being `(∂_s, J ∂_s)`.
pub fn sectional<P: WarpProfile<f64>>(p: &P, s: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    let t = CurvatureTensor::at(p, s)?;
    Ok(t.sectional(x, y))
}
