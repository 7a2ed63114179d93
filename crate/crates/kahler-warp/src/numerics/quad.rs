//! Adaptive 21-point Gauss–Kronrod quadrature.

use crate::error::{Error, Result};
use crate::scalar::Real;

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208980286820,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights on the odd Kronrod nodes.
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: T,
    pub intervals: usize,
}

/// One Gauss–Kronrod panel; returns (Kronrod value, |K - G|).
pub fn gk21<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let c = half * (a + b);
    let h = half * (b - a);
    let fc = f(c);
    let mut k = fc * T::lit(WGK[10]);
    let mut g = T::zero();
    for j in 0..10 {
        let dx = h * T::lit(XGK[j]);
        let s = f(c - dx) + f(c + dx);
        k = k + T::lit(WGK[j]) * s;
        if j % 2 == 1 {
            g = g + T::lit(WG[j / 2]) * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Settings for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Quad<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_intervals: usize,
}

impl<T: Real> Default for Quad<T> {
    fn default() -> Self {
        Quad { rel_tol: T::lit(1e-12), abs_tol: T::lit(1e-15), max_intervals: 2000 }
    }
}

impl<T: Real> Quad<T> {
    pub fn with_tol(rel_tol: T, abs_tol: T) -> Self {
        Quad { rel_tol, abs_tol, ..Self::default() }
    }

    /// Globally adaptive bisection: always split the panel with the largest error.
    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F, a: T, b: T) -> Result<QuadResult<T>> {
        if a == b {
            return Ok(QuadResult { value: T::zero(), error: T::zero(), intervals: 0 });
        }
        let (v, e) = gk21(&mut f, a, b);
        let mut panels = vec![(a, b, v, e)];
        let mut total = v;
        let mut err = e;
        while err > self.abs_tol.max(self.rel_tol * total.abs()) {
            if panels.len() >= self.max_intervals {
                if !err.is_finite() || err > T::lit(1e3) * self.abs_tol.max(self.rel_tol * total.abs()) {
                    return Err(Error::NonConvergence { what: "adaptive quadrature", iters: panels.len() });
                }
                break;
            }
            let (worst, _) = panels
                .iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
            let (lo, hi, v0, e0) = panels.swap_remove(worst);
            let mid = T::lit(0.5) * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let (v1, e1) = gk21(&mut f, lo, mid);
            let (v2, e2) = gk21(&mut f, mid, hi);
            total = total - v0 + v1 + v2;
            err = err - e0 + e1 + e2;
            panels.push((lo, mid, v1, e1));
            panels.push((mid, hi, v2, e2));
        }
        // re-sum to shed accumulated cancellation in the running totals
        let value = panels.iter().fold(T::zero(), |s, p| s + p.2);
        let error = panels.iter().fold(T::zero(), |s, p| s + p.3);
        if !value.is_finite() {
            return Err(Error::NonConvergence { what: "adaptive quadrature", iters: panels.len() });
        }
        Ok(QuadResult { value, error, intervals: panels.len() })
    }

    pub fn value<F: FnMut(T) -> T>(&self, f: F, a: T, b: T) -> Result<T> {
        self.integrate(f, a, b).map(|r| r.value)
    }
}

/// Convenience wrapper with the default tolerances.
pub fn integrate<T: Real, F: FnMut(T) -> T>(f: F, a: T, b: T) -> Result<T> {
    Quad::default().value(f, a, b)
}

/// Cumulative integral of `f` from `xs[0]` to every node of `xs`.
pub fn cumulative<T: Real, F: FnMut(T) -> T>(quad: &Quad<T>, mut f: F, xs: &[T]) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = T::zero();
    out.push(acc);
    for w in xs.windows(2) {
        acc = acc + quad.value(&mut f, w[0], w[1])?;
        out.push(acc);
    }
    Ok(out)
}
