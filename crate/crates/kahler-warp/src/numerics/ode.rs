//! Explicit Runge–Kutta integrators: adaptive Dormand–Prince 5(4) and fixed-step RK4.

use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::scalar::Real;

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Accepted point of a trajectory: time, state and right-hand side.
#[derive(Debug, Clone, Copy)]
pub struct Point<T, const D: usize> {
    pub t: T,
    pub y: [T; D],
    pub dy: [T; D],
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5<T> {
    pub rtol: T,
    pub atol: T,
    pub h_init: T,
    pub h_max: T,
    pub h_min: T,
    pub max_steps: usize,
}

impl<T: Real> Default for Dopri5<T> {
    fn default() -> Self {
        Dopri5 {
            rtol: T::lit(1e-11),
            atol: T::lit(1e-13),
            h_init: T::lit(1e-6),
            h_max: T::infinity(),
            h_min: T::lit(1e-14),
            max_steps: 2_000_000,
        }
    }
}

fn axpy<T: Real, const D: usize>(y: &[T; D], h: T, ks: &[[T; D]], w: &[f64]) -> [T; D] {
    let mut out = *y;
    for (k, &wi) in ks.iter().zip(w) {
        if wi != 0.0 {
            let c = h * T::lit(wi);
            for i in 0..D {
                out[i] = out[i] + c * k[i];
            }
        }
    }
    out
}

/// One Dormand–Prince step. Returns the fifth-order state, its derivative and the error vector.
pub fn dp_step<T: Real, const D: usize, F: FnMut(T, &[T; D]) -> [T; D]>(
    f: &mut F,
    t: T,
    y: &[T; D],
    k1: &[T; D],
    h: T,
) -> ([T; D], [T; D], [T; D]) {
    let mut k = [[T::zero(); D]; 7];
    k[0] = *k1;
    for s in 1..7 {
        let ys = axpy(y, h, &k[..s], &A[s][..s]);
        k[s] = f(t + T::lit(C[s]) * h, &ys);
    }
    let y_new = axpy(y, h, &k[..6], &A[6][..6]);
    let mut err = [T::zero(); D];
    for i in 0..D {
        let mut e = T::zero();
        for s in 0..7 {
            e = e + T::lit(E[s]) * k[s][i];
        }
        err[i] = h * e;
    }
    (y_new, k[6], err)
}

impl<T: Real> Dopri5<T> {
    pub fn with_tol(rtol: T, atol: T) -> Self {
        Dopri5 { rtol, atol, ..Self::default() }
    }

    fn err_norm<const D: usize>(&self, y0: &[T; D], y1: &[T; D], e: &[T; D]) -> T {
        let mut acc = T::zero();
        for i in 0..D {
            let sc = self.atol + self.rtol * y0[i].abs().max(y1[i].abs());
            let r = e[i] / sc;
            acc = acc + r * r;
        }
        (acc / T::from_usize_lossy(D)).sqrt()
    }

    /// Integrates from `t0` to `t1` (either direction). `obs` sees every accepted point,
    /// including the initial one, and may stop the integration early.
    pub fn solve<const D: usize, F, O>(&self, mut f: F, t0: T, y0: [T; D], t1: T, mut obs: O) -> Result<Point<T, D>>
    where
        F: FnMut(T, &[T; D]) -> [T; D],
        O: FnMut(&Point<T, D>) -> ControlFlow<()>,
    {
        let dir = if t1 >= t0 { T::one() } else { -T::one() };
        let span = (t1 - t0).abs();
        let mut cur = Point { t: t0, y: y0, dy: f(t0, &y0) };
        if obs(&cur).is_break() || span == T::zero() {
            return Ok(cur);
        }
        let mut h = self.h_init.min(span).min(self.h_max);
        let safety = T::lit(0.9);
        let mut steps = 0usize;
        loop {
            let remaining = (t1 - cur.t) * dir;
            if remaining <= T::zero() {
                return Ok(cur);
            }
            let last = h >= remaining;
            let hh = if last { remaining } else { h };
            let (y1, k7, e) = dp_step(&mut f, cur.t, &cur.y, &cur.dy, hh * dir);
            let en = self.err_norm(&cur.y, &y1, &e);
            if en <= T::one() && y1.iter().all(|v| v.is_finite()) {
                let t_new = if last { t1 } else { cur.t + hh * dir };
                cur = Point { t: t_new, y: y1, dy: k7 };
                steps += 1;
                if obs(&cur).is_break() {
                    return Ok(cur);
                }
                if steps >= self.max_steps {
                    return Err(Error::NonConvergence { what: "Dormand-Prince integration", iters: steps });
                }
                let fac = if en == T::zero() { T::lit(5.0) } else { (safety * en.powf(T::lit(-0.2))).min(T::lit(5.0)) };
                h = (hh * fac.max(T::lit(0.2))).min(self.h_max);
            } else {
                let fac = if en.is_finite() { (safety * en.powf(T::lit(-0.2))).max(T::lit(0.1)) } else { T::lit(0.1) };
                h = hh * fac;
                if h < self.h_min {
                    return Err(Error::StepRejected { t: cur.t.as_f64(), h: h.as_f64() });
                }
            }
        }
    }

    /// Like [`solve`](Self::solve) but collects every accepted point.
    pub fn trajectory<const D: usize, F>(&self, f: F, t0: T, y0: [T; D], t1: T) -> Result<Vec<Point<T, D>>>
    where
        F: FnMut(T, &[T; D]) -> [T; D],
    {
        let mut pts = Vec::new();
        self.solve(f, t0, y0, t1, |p| {
            pts.push(*p);
            ControlFlow::Continue(())
        })?;
        Ok(pts)
    }

    /// Integrates until `event(t, y)` first changes sign, then bisects the last step so the
    /// returned point sits on the root to within `t_tol`. Returns the trajectory up to and
    /// including the root, or `None` for the root if `t1` is reached first.
    pub fn solve_to_event<const D: usize, F, G>(
        &self,
        mut f: F,
        t0: T,
        y0: [T; D],
        t1: T,
        mut event: G,
        t_tol: T,
    ) -> Result<(Vec<Point<T, D>>, Option<Point<T, D>>)>
    where
        F: FnMut(T, &[T; D]) -> [T; D],
        G: FnMut(T, &[T; D]) -> T,
    {
        let mut pts: Vec<Point<T, D>> = Vec::new();
        let mut crossed = false;
        let g0 = event(t0, &y0);
        self.solve(&mut f, t0, y0, t1, |p| {
            let g = event(p.t, &p.y);
            if !pts.is_empty() && (g == T::zero() || g.signum() != g0.signum()) {
                crossed = true;
                pts.push(*p);
                return ControlFlow::Break(());
            }
            pts.push(*p);
            ControlFlow::Continue(())
        })?;
        if !crossed {
            return Ok((pts, None));
        }
        let hit = pts.pop().expect("crossing point");
        let base = *pts.last().expect("point before crossing");
        let mut lo = T::zero();
        let mut hi = hit.t - base.t;
        let mut best = hit;
        for _ in 0..200 {
            if (hi - lo).abs() <= t_tol {
                break;
            }
            let mid = T::lit(0.5) * (lo + hi);
            let (ym, _, _) = dp_step(&mut f, base.t, &base.y, &base.dy, mid);
            let gm = event(base.t + mid, &ym);
            if gm == T::zero() || gm.signum() != g0.signum() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let (yh, _, _) = dp_step(&mut f, base.t, &base.y, &base.dy, hi);
        let th = base.t + hi;
        best.t = th;
        best.y = yh;
        best.dy = f(th, &yh);
        pts.push(best);
        Ok((pts, Some(best)))
    }
}

/// Classical fixed-step RK4; used for convergence-order studies.
pub fn rk4_fixed<T: Real, const D: usize, F: FnMut(T, &[T; D]) -> [T; D]>(
    mut f: F,
    t0: T,
    y0: [T; D],
    t1: T,
    steps: usize,
) -> [T; D] {
    let h = (t1 - t0) / T::from_usize_lossy(steps);
    let half = T::lit(0.5);
    let mut y = y0;
    let mut t = t0;
    for _ in 0..steps {
        let k1 = f(t, &y);
        let k2 = f(t + half * h, &axpy(&y, h, &[k1], &[0.5]));
        let k3 = f(t + half * h, &axpy(&y, h, &[k2], &[0.5]));
        let k4 = f(t + h, &axpy(&y, h, &[k3], &[1.0]));
        y = axpy(&y, h, &[k1, k2, k3, k4], &[1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0]);
        t = t + h;
    }
    y
}
