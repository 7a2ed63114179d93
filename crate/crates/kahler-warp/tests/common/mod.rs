#![allow(dead_code)]

use kahler_warp::warp_core::{CurvatureFrameData, Jet};

/// Kähler jet from `b` and its first three derivatives.
pub fn kahler_jet(b: [f64; 4]) -> Jet<f64> {
    let (b0, b1, b2, b3) = (b[0], b[1], b[2], b[3]);
    Jet { a: [b0 * b1, b1 * b1 + b0 * b2, 3.0 * b1 * b2 + b0 * b3, f64::NAN], b }
}

/// Optimal lambda by splitting hermitian forms into invariant blocks.
pub fn lambda_closed_form(j: &Jet<f64>, n: usize) -> f64 {
    let f = CurvatureFrameData::from_jet(j);
    if n == 2 {
        return f.ha;
    }
    let m = (n - 2) as f64;
    let w = 0.5 * (1.0 + 1.0 / m);
    // pencil in (trace, radial): Q = [[P w, Hb/2], [Hb/2, Ha]], N = [[w, 1/2], [1/2, 1]]
    let (q11, q12, q22) = (f.p * w, 0.5 * f.hb, f.ha);
    let (n11, n12, n22) = (w, 0.5, 1.0);
    let qa = n11 * n22 - n12 * n12;
    let qb = -(q11 * n22 + q22 * n11 - 2.0 * q12 * n12);
    let qc = q11 * q22 - q12 * q12;
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
    let pencil = (-qb - disc.sqrt()) / (2.0 * qa);
    let mut best = pencil.min(f.hb);
    if n >= 4 {
        best = best.min(f.p);
    }
    best
}

/// Ricci components of `ds² + a²η² + b²gᵀ` from the Riemannian formulas (no Kähler assumption).
pub fn riemannian_ricci(j: &Jet<f64>, n: usize) -> (f64, f64, f64) {
    let m = (n - 2) as f64;
    let (a, a1, a2) = (j.a[0], j.a[1], j.a[2]);
    let (b, b1, b2) = (j.b[0], j.b[1], j.b[2]);
    let rr = -a2 / a - 2.0 * m * b2 / b;
    let eta = -a2 / a - 2.0 * m * a1 * b1 / (a * b) + 2.0 * m * a * a / b.powi(4);
    let tt = -b2 / b - a1 * b1 / (a * b) - (2.0 * m - 1.0) * b1 * b1 / (b * b) + 2.0 * (m + 1.0) / (b * b)
        - 2.0 * a * a / b.powi(4);
    (rr, eta, tt)
}
