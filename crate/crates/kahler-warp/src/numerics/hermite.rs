//! Two-point septic Hermite interpolation (C³ piecewise).

use crate::scalar::Real;

/// Value and first three derivatives.
pub type Jet4<T> = [T; 4];

// inverse of the 4x4 system matching t^4..t^7 to derivatives 0..3 at t = 1
const MINV: [[f64; 4]; 4] = [
    [35.0, -15.0, 2.5, -1.0 / 6.0],
    [-84.0, 39.0, -7.0, 0.5],
    [70.0, -34.0, 6.5, -0.5],
    [-20.0, 10.0, -2.0, 1.0 / 6.0],
];

/// Interpolates between jets `l` at `x0` and `r` at `x1`, returning the jet at `x`.
pub fn septic<T: Real>(x0: T, x1: T, l: &Jet4<T>, r: &Jet4<T>, x: T) -> Jet4<T> {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let six = T::lit(6.0);
    let two = T::lit(2.0);
    let y = [l[0], l[1] * h, l[2] * h * h, l[3] * h * h * h];
    let z = [r[0], r[1] * h, r[2] * h * h, r[3] * h * h * h];
    let res = [
        z[0] - (y[0] + y[1] + y[2] / two + y[3] / six),
        z[1] - (y[1] + y[2] + y[3] / two),
        z[2] - (y[2] + y[3]),
        z[3] - y[3],
    ];
    let mut c = [T::zero(); 8];
    c[0] = y[0];
    c[1] = y[1];
    c[2] = y[2] / two;
    c[3] = y[3] / six;
    for (i, row) in MINV.iter().enumerate() {
        c[4 + i] = row.iter().zip(res.iter()).fold(T::zero(), |acc, (&m, &v)| acc + T::lit(m) * v);
    }
    // Horner for p, p', p'', p'''
    let mut out = [T::zero(); 4];
    for d in 0..4 {
        let mut acc = T::zero();
        for k in (d..8).rev() {
            let mut coef = c[k];
            for j in 0..d {
                coef = coef * T::from_usize_lossy(k - j);
            }
            acc = acc * t + coef;
        }
        out[d] = acc / h.powi(d as i32);
    }
    out
}
