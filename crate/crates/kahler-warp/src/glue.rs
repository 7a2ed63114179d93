//! Smoothing the two cone points of the model `h_k` by gluing a rescaled expander at the tip and a
//! trigonometric cap at the far end.
//!
//! Coordinates follow the construction: the expander occupies `[0, s_i]`, the shifted model
//! `b₂ = sin(r - s_i + r_i)/√k` takes over after a third-derivative blend of width `t`, and past
//! `π/2 - r_i` the fibre function solves `a'' = -α² a` until it closes with slope `-1`.

use std::f64::consts::FRAC_PI_2;
use std::ops::ControlFlow;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::ode::{Dopri5, Point};
use crate::numerics::roots::bisect;
use crate::soliton_ode::{MomentSoliton, SolitonProfile};
use crate::warp_core::lambda::{certify, condition_margins, CertifyOptions, LambdaCertificate, LAMBDA_TOL};
use crate::warp_core::measure::{closure_residuals, gh_upper_bound};
use crate::warp_core::profile::{Jet, ModelHk, Scaled, WarpProfile};
use crate::warp_core::CurvatureFrameData;

/// Configuration of one gluing run.
#[derive(Debug, Clone, Serialize)]
pub struct GlueParams {
    /// Profile index: the result lives on `ℂP^{n-1}`.
    pub n: usize,
    pub k: f64,
    pub i: usize,
    /// Fixed blend width; `None` applies the halving policy.
    pub t_cut: Option<f64>,
    pub k_min: f64,
    pub max_halvings: usize,
    /// `λ` below `1 - cert_tol` marks a node as part of the excluded margin.
    pub cert_tol: f64,
    pub tol_closure: f64,
    /// Largest accepted excluded margin `δ_i`.
    pub delta_max: f64,
    /// Interval `[ε, π/2 - ε]` of the `C²` comparison with `h_k`.
    pub compare_margin: f64,
    pub samples: usize,
}

impl GlueParams {
    /// Defaults with the `i = 4k` policy.
    pub fn new(n: usize, k: f64) -> Self {
        GlueParams {
            n,
            k,
            i: default_i(k),
            t_cut: None,
            k_min: 100.0,
            max_halvings: 5,
            cert_tol: 1e-3,
            tol_closure: 1e-5,
            delta_max: 0.05,
            compare_margin: 0.1,
            samples: 2000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::BadConfig(format!("gluing needs n >= 3, got {}", self.n)));
        }
        if !(self.k >= self.k_min) || self.k.fract() != 0.0 {
            return Err(Error::BadConfig(format!("k must be an integer >= {}, got {}", self.k_min, self.k)));
        }
        if (self.i as f64) <= self.k {
            return Err(Error::BadConfig(format!("closeness index i = {} must exceed k = {}", self.i, self.k)));
        }
        Ok(())
    }
}

/// `i = 4k`.
pub fn default_i(k: f64) -> usize {
    (4.0 * k).round().max(1.0) as usize
}

/// Smooth non-decreasing step: `0` on `(-∞, 0]`, `1` on `[t, ∞)`. Returns `(φ, φ')`.
pub fn cutoff(x: f64, t: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0);
    }
    if x >= t {
        return (1.0, 0.0);
    }
    let u = x / t;
    let f = (-1.0 / u).exp();
    let g = (-1.0 / (1.0 - u)).exp();
    let s = f + g;
    let du = f * g * (1.0 / (u * u) + 1.0 / ((1.0 - u) * (1.0 - u))) / (s * s);
    (f / s, du / t)
}

/// The matched, rescaled expander.
#[derive(Debug, Clone)]
pub struct ExpanderMatch {
    pub alpha: f64,
    /// Radius on the expander where closeness to the cone is reached.
    pub big_r: f64,
    /// `λ_{i,α} = -b''(R_i)/b(R_i)`; the expander metric is multiplied by it.
    pub lambda_scale: f64,
    pub s_i: f64,
    pub r_i: f64,
    pub cone_distance: f64,
    /// `|b̄^{(m)}(s_i) - sin^{(m)}(r_i)/√k|` for `m = 0, 1, 2`.
    pub match_residuals: [f64; 3],
    pub expander: SolitonProfile,
}

struct MatchEval {
    lambda: f64,
    s: f64,
    r: f64,
    mismatch: f64,
    jets: [f64; 3],
}

fn match_at(dim: usize, k: f64, alpha: f64, big_r: f64) -> Result<MatchEval> {
    let m = MomentSoliton::asymptotic_expander(dim, alpha);
    let b = m.b_at_arclength(big_r)?;
    let (j, _) = m.jets_at_b(b);
    let lambda = -j.b[2] / j.b[0];
    if !(lambda > 0.0) {
        return Err(Error::CertificationFailed(format!("expander is not concave at R = {big_r}")));
    }
    let sl = lambda.sqrt();
    let bbar = sl * j.b[0];
    let arg = k.sqrt() * bbar;
    if !(arg < 1.0) {
        return Err(Error::BadConfig(format!("matching radius too small: √k b̄(s_i) = {arg}")));
    }
    let r = arg.asin();
    Ok(MatchEval { lambda, s: sl * big_r, r, mismatch: j.b[1] - r.cos() / k.sqrt(), jets: [bbar, j.b[1], j.b[2] / sl] })
}

/// `b̄'(s_{i,α}) - cos(r_{i,α})/√k` for the expander of angle `α` cut at radius `R`.
pub fn match_mismatch(n: usize, k: f64, alpha: f64, big_r: f64) -> Result<f64> {
    Ok(match_at(n - 1, k, alpha, big_r)?.mismatch)
}

/// Finds `R_i`, rescales the expander family and bisects `α ∈ [k-1, k+1]` so that the expander
/// matches `sin(r)/√k` to second order at `s_i`.
pub fn match_expander(n: usize, k: f64, i: usize) -> Result<ExpanderMatch> {
    let dim = n - 1;
    let target = 1.0 / (100.0 * (i * i) as f64);
    let alphas = [k - 1.0, k, k + 1.0];
    let mut big_r = 16.0;
    let mut distance;
    loop {
        let t = 1.0 / (big_r * big_r);
        distance = alphas
            .iter()
            .map(|&a| MomentSoliton::asymptotic_expander(dim, a).cone_distance(a, t, (0.5, 2.0)))
            .fold(0.0, f64::max);
        if distance <= target {
            break;
        }
        big_r *= std::f64::consts::SQRT_2;
        if big_r > 1e12 {
            return Err(Error::NonConvergence { what: "cone closeness radius", iters: 0 });
        }
    }
    let f_lo = match_at(dim, k, k - 1.0, big_r)?.mismatch;
    let f_hi = match_at(dim, k, k + 1.0, big_r)?.mismatch;
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::BracketNotFound { what: "expander matching in alpha", lo: k - 1.0, hi: k + 1.0 });
    }
    let alpha = bisect("expander matching in alpha", |a| Ok(match_at(dim, k, a, big_r)?.mismatch), k - 1.0, k + 1.0, 1e-13 * k)?;
    let e = match_at(dim, k, alpha, big_r)?;
    let sk = k.sqrt();
    let res = [
        (e.jets[0] - e.r.sin() / sk).abs(),
        (e.jets[1] - e.r.cos() / sk).abs(),
        (e.jets[2] + e.r.sin() / sk).abs(),
    ];
    let tol = 1e-9 / sk;
    if res.iter().any(|&v| !(v <= tol)) {
        return Err(Error::CertificationFailed(format!("second-order match residuals {res:?} exceed {tol:e}")));
    }
    let bounds = [
        (e.r <= 2.0 * sk / i as f64, "r_i <= 2√k/i"),
        (e.s <= 1.0 / i as f64, "s_i <= 1/i"),
        (e.lambda <= 1.0 / (big_r * big_r * (i * i) as f64), "λ_i <= 1/(R_i² i²)"),
    ];
    if let Some((_, what)) = bounds.iter().find(|b| !b.0) {
        return Err(Error::CertificationFailed(format!("a-priori bound {what} fails")));
    }
    let expander = SolitonProfile::build(MomentSoliton::asymptotic_expander(dim, alpha), big_r)?;
    Ok(ExpanderMatch {
        alpha,
        big_r,
        lambda_scale: e.lambda,
        s_i: e.s,
        r_i: e.r,
        cone_distance: distance,
        match_residuals: res,
        expander,
    })
}

const WINDOW_NODES: usize = 65;

fn window_solver(width: f64) -> Dopri5<f64> {
    Dopri5 { h_init: width / 64.0, h_min: width * 1e-12, ..Dopri5::with_tol(1e-12, 1e-22) }
}

/// The assembled profile `(a₄, b₄)` before the final rescale.
#[derive(Debug, Clone)]
pub struct GluedProfile {
    pub n: usize,
    pub k: f64,
    pub s_i: f64,
    pub r_i: f64,
    pub t_cut: f64,
    /// Width of the second blend; the cap frequency forces it below `1/α₀`.
    pub t_cap: f64,
    pub alpha_sharp: f64,
    pub v_i: f64,
    /// Slope `-a₄'` at the far zero.
    pub end_slope: f64,
    expander: SolitonProfile,
    sqrt_lambda: f64,
    /// `(b, b', b'')` across `[s_i - t, s_i]`.
    blend_b: Vec<Point<f64, 3>>,
    /// `b₃ - b₂ = e₀ + e₁ u + e₂ u²/2` with `u = r - s_i`.
    drift: [f64; 3],
    /// `(a, a', b²)` across `[π/2 - r_i - t, π/2 - r_i]`.
    blend_a: Vec<Point<f64, 3>>,
    length: f64,
}

impl GluedProfile {
    fn p0(&self) -> f64 {
        self.p1() - self.t_cap
    }

    fn p1(&self) -> f64 {
        FRAC_PI_2 - self.r_i
    }

    /// Derivatives 0..=4 of `b₂`.
    fn b2(&self, r: f64) -> [f64; 5] {
        let (sn, cs) = (r - self.s_i + self.r_i).sin_cos();
        let w = 1.0 / self.k.sqrt();
        [w * sn, w * cs, -w * sn, -w * cs, w * sn]
    }

    /// Rescaled expander: derivatives 0..=3 of `ā`, 0..=4 of `b̄`.
    fn b1(&self, s: f64) -> Result<([f64; 4], [f64; 5])> {
        let sl = self.sqrt_lambda;
        let sigma = (s / sl).min(self.expander.length());
        let (j, b4) = self.expander.jet_with_b4(sigma)?;
        let mut a = [0.0; 4];
        let mut b = [0.0; 5];
        let mut f = sl;
        for d in 0..4 {
            a[d] = j.a[d] * f;
            b[d] = j.b[d] * f;
            f /= sl;
        }
        b[4] = b4 * f;
        Ok((a, b))
    }

    /// `B(r)` and `B'(r)`.
    fn blend_third(&self, r: f64) -> Result<(f64, f64)> {
        let (phi, dphi) = cutoff(self.s_i - r, self.t_cut);
        let (_, b1) = self.b1(r)?;
        let b2 = self.b2(r);
        Ok((phi * b1[3] + (1.0 - phi) * b2[3], -dphi * (b1[3] - b2[3]) + phi * b1[4] + (1.0 - phi) * b2[4]))
    }

    /// `b₃` with four derivatives on `[s_i, π/2 + s_i - r_i]`.
    fn b3_outer(&self, r: f64) -> [f64; 5] {
        let mut b = self.b2(r);
        let u = r - self.s_i;
        let [e0, e1, e2] = self.drift;
        b[0] += e0 + e1 * u + 0.5 * e2 * u * u;
        b[1] += e1 + e2 * u;
        b[2] += e2;
        b
    }

    /// `b''' = B(r)` in the first blend window, with `B'(r)`.
    pub fn third_derivative_blend(&self, r: f64) -> Result<(f64, f64)> {
        self.blend_third(r)
    }

    /// Coefficients `(e₀, e₁, e₂)` of `b₃ - b₂` past the first window.
    pub fn drift(&self) -> [f64; 3] {
        self.drift
    }

    /// `A(r)` and `A'(r)` inside the second blend.
    fn cap_coefficient(&self, r: f64, alpha: f64) -> (f64, f64) {
        let a3 = a_from_b(&self.b3_outer(r));
        let q = -a3[2] / a3[0];
        let dq = (-a3[3] * a3[0] + a3[2] * a3[1]) / (a3[0] * a3[0]);
        let (phi, dphi) = cutoff(self.p1() - r, self.t_cap);
        let a2 = alpha * alpha;
        (phi * q + (1.0 - phi) * a2, -dphi * (q - a2) + phi * dq)
    }

    fn jet_from_a(&self, a: f64, a1: f64, y: f64, a2: f64, a3: f64) -> Jet<f64> {
        let b = y.sqrt();
        let b1 = a / b;
        let b2 = (a1 - b1 * b1) / b;
        let b3 = (a2 - 3.0 * b1 * b2) / b;
        Jet { a: [a, a1, a2, a3], b: [b, b1, b2, b3] }
    }

    fn cap_state(&self) -> [f64; 3] {
        self.blend_a.last().expect("nodes").y
    }

    /// Region boundaries `[s_i - t, s_i, π/2 - r_i - t, π/2 - r_i, L]`.
    pub fn breaks(&self) -> [f64; 5] {
        [self.s_i - self.t_cut, self.s_i, self.p0(), self.p1(), self.length]
    }
}

/// Jets of `a = b b'` from five derivatives of `b`.
fn a_from_b(b: &[f64; 5]) -> [f64; 4] {
    [
        b[0] * b[1],
        b[1] * b[1] + b[0] * b[2],
        3.0 * b[1] * b[2] + b[0] * b[3],
        3.0 * b[2] * b[2] + 4.0 * b[1] * b[3] + b[0] * b[4],
    ]
}

fn from_window<F: FnMut(f64, &[f64; 3]) -> [f64; 3]>(nodes: &[Point<f64, 3>], f: F, s: f64) -> Result<[f64; 3]> {
    let i = nodes.partition_point(|p| p.t <= s).clamp(1, nodes.len()) - 1;
    let base = nodes[i];
    if base.t == s {
        return Ok(base.y);
    }
    let w = nodes.last().expect("nodes").t - nodes[0].t;
    window_solver(w).solve(f, base.t, base.y, s, |_| ControlFlow::Continue(())).map(|p| p.y)
}

fn integrate_window<F: FnMut(f64, &[f64; 3]) -> [f64; 3]>(mut f: F, lo: f64, hi: f64, y0: [f64; 3]) -> Result<Vec<Point<f64, 3>>> {
    let solver = window_solver(hi - lo);
    let mut out = Vec::with_capacity(WINDOW_NODES);
    let mut cur = Point { t: lo, y: y0, dy: f(lo, &y0) };
    out.push(cur);
    for j in 1..WINDOW_NODES {
        let t1 = if j == WINDOW_NODES - 1 { hi } else { lo + (hi - lo) * j as f64 / (WINDOW_NODES - 1) as f64 };
        cur = solver.solve(&mut f, cur.t, cur.y, t1, |_| ControlFlow::Continue(()))?;
        out.push(cur);
    }
    Ok(out)
}

impl WarpProfile<f64> for GluedProfile {
    fn n(&self) -> usize {
        self.n
    }
    fn length(&self) -> f64 {
        self.length
    }
    fn jet(&self, s: f64) -> Result<Jet<f64>> {
        self.check_domain(s)?;
        let s = s.clamp(0.0, self.length);
        let [q0, q1, q2, q3, _] = self.breaks();
        if s <= q0 {
            let (a, b) = self.b1(s)?;
            return Ok(Jet { a, b: [b[0], b[1], b[2], b[3]] });
        }
        if s < q1 {
            let rhs = |r: f64, y: &[f64; 3]| [y[1], y[2], self.blend_third(r).map(|v| v.0).unwrap_or(f64::NAN)];
            let y = from_window(&self.blend_b, rhs, s)?;
            let (b3, b4) = self.blend_third(s)?;
            let b = [y[0], y[1], y[2], b3, b4];
            return Ok(Jet { a: a_from_b(&b), b: [b[0], b[1], b[2], b[3]] });
        }
        if s <= q2 {
            let b = self.b3_outer(s);
            return Ok(Jet { a: a_from_b(&b), b: [b[0], b[1], b[2], b[3]] });
        }
        let alpha = self.alpha_sharp;
        if s < q3 {
            let rhs = |r: f64, y: &[f64; 3]| [y[1], -y[0] * self.cap_coefficient(r, alpha).0, 2.0 * y[0]];
            let y = from_window(&self.blend_a, rhs, s)?;
            let (big_a, d_a) = self.cap_coefficient(s, alpha);
            return Ok(self.jet_from_a(y[0], y[1], y[2], -y[0] * big_a, -y[1] * big_a - y[0] * d_a));
        }
        let [a1, d1, y1] = self.cap_state();
        // `L - p1` loses the last bits of `v_i`, which `α²` would amplify
        let u = if s >= self.length { self.v_i } else { s - q3 };
        let (sn, cs) = (alpha * u).sin_cos();
        let a = a1 * cs + d1 / alpha * sn;
        let da = -a1 * alpha * sn + d1 * cs;
        let y = y1 + 2.0 * (a1 * sn / alpha + d1 / (alpha * alpha) * (1.0 - cs));
        let a2 = -alpha * alpha * a;
        Ok(self.jet_from_a(a, da, y, a2, -alpha * alpha * da))
    }
    fn sample_points(&self, count: usize) -> Vec<f64> {
        let [q0, q1, q2, q3, l] = self.breaks();
        let mut pts = Vec::with_capacity(count + 600);
        // expander: log-spaced in the unscaled radius
        let sigma_end = q0 / self.sqrt_lambda;
        let lo = (1e-3f64).min(0.5 * sigma_end);
        for j in 0..240 {
            pts.push(self.sqrt_lambda * lo * (sigma_end / lo).powf(j as f64 / 240.0));
        }
        let uniform = |a: f64, b: f64, m: usize, pts: &mut Vec<f64>| {
            for j in 0..m {
                pts.push(a + (b - a) * j as f64 / m as f64);
            }
        };
        uniform(q0, q1, 64, &mut pts);
        uniform(q1, q2, count.max(16), &mut pts);
        // the structure next to both windows lives on the scale of t, far below the uniform spacing
        for j in 0..160 {
            let u = self.t_cut * 1e-2 * (0.1 / (self.t_cut * 1e-2)).powf(j as f64 / 160.0);
            pts.push(q1 + u);
            pts.push(q2 - u * self.t_cap / self.t_cut);
        }
        uniform(q2, q3, 64, &mut pts);
        uniform(q3, l, 128, &mut pts);
        pts.retain(|&s| s > 0.0 && s < l);
        pts
    }
}

/// Builds `b₃` for a given blend width: the first window integrated from the expander data.
fn glue_b(m: &ExpanderMatch, n: usize, k: f64, t: f64) -> Result<GluedProfile> {
    let mut g = GluedProfile {
        n,
        k,
        s_i: m.s_i,
        r_i: m.r_i,
        t_cut: t,
        t_cap: t.min(1.0 / (16.0 * model_cap(k, m.s_i).0)),
        alpha_sharp: f64::NAN,
        v_i: f64::NAN,
        end_slope: f64::NAN,
        expander: m.expander.clone(),
        sqrt_lambda: m.lambda_scale.sqrt(),
        blend_b: Vec::new(),
        drift: [0.0; 3],
        blend_a: Vec::new(),
        length: f64::NAN,
    };
    let lo = m.s_i - t;
    let (_, b) = g.b1(lo)?;
    let nodes = {
        let gr = &g;
        integrate_window(|r, y| [y[1], y[2], gr.blend_third(r).map(|v| v.0).unwrap_or(f64::NAN)], lo, m.s_i, [b[0], b[1], b[2]])?
    };
    let end = nodes.last().expect("nodes").y;
    let b2 = g.b2(m.s_i);
    g.drift = [end[0] - b2[0], end[1] - b2[1], end[2] - b2[2]];
    g.blend_b = nodes;
    Ok(g)
}

/// Closes the far end for a trial `α`: returns the cap window and `(c_i(α), v_i(α))`.
fn cap_for(g: &GluedProfile, alpha: f64) -> Result<(Vec<Point<f64, 3>>, f64, f64)> {
    let (p0, p1) = (g.p0(), g.p1());
    let b = g.b3_outer(p0);
    let a = a_from_b(&b);
    // starting further left at π/2 - 2r_i changes nothing: A = -a₃''/a₃ reproduces a₃ there
    let nodes = integrate_window(|r, y| [y[1], -y[0] * g.cap_coefficient(r, alpha).0, 2.0 * y[0]], p0, p1, [a[0], a[1], b[0] * b[0]])?;
    let [a1, d1, _] = nodes.last().expect("nodes").y;
    if !(a1 > 0.0) {
        return Err(Error::CertificationFailed(format!("cap: a vanishes before π/2 - r_i (t = {:e} too large)", g.t_cap)));
    }
    let c = (d1 * d1 + alpha * alpha * a1 * a1).sqrt();
    let v = (alpha * a1).atan2(-d1) / alpha;
    Ok((nodes, c, v))
}

/// `(c_i(α), v_i(α))`: slope and overshoot of the cap closed with frequency `α`.
pub fn cap_slope(g: &GluedProfile, alpha: f64) -> Result<(f64, f64)> {
    cap_for(g, alpha).map(|(_, c, v)| (c, v))
}

/// `α₀` and `v₀` of the pure sine cap attached to `h_k`.
pub fn model_cap(k: f64, s_i: f64) -> (f64, f64) {
    let c2 = (2.0 * s_i).cos();
    let alpha0 = (4.0 * k * k * (1.0 - c2 * c2 / (k * k)) / (2.0 * s_i).sin().powi(2)).sqrt();
    (alpha0, (c2 / k).acos() / alpha0)
}

/// Slope `c_{0,i}(α)` at the first zero of the sine cap `w'' = -α² w` started from `h_k`'s data at `π/2 - r_i`.
pub fn model_cap_slope(k: f64, s_i: f64, alpha: f64) -> f64 {
    let w = (2.0 * s_i).sin() / (2.0 * k);
    let dw = -(2.0 * s_i).cos() / k;
    (dw * dw + alpha * alpha * w * w).sqrt()
}

/// Result of [`close_cap`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CapReport {
    pub alpha_0: f64,
    pub alpha_sharp: f64,
    pub v_i: f64,
    pub end_slope: f64,
    /// Whether `(α₀ - 1, α₀ + 1)` had to be widened to bracket `c_i = 1`.
    pub bracket_widened: bool,
}

/// Bisects the cap frequency so that `a₄` reaches zero with slope `-1`.
pub fn close_cap(g: &mut GluedProfile) -> Result<CapReport> {
    let (alpha0, _) = model_cap(g.k, g.s_i);
    let h = |alpha: f64| -> Result<f64> { Ok(cap_for(g, alpha)?.1 - 1.0) };
    let (mut lo, mut hi) = (alpha0 - 1.0, alpha0 + 1.0);
    let mut widened = false;
    let (mut flo, mut fhi) = (h(lo)?, h(hi)?);
    let mut grow = 1.0;
    while !(flo < 0.0 && fhi > 0.0) {
        widened = true;
        grow *= 2.0;
        if grow > 1e6 {
            return Err(Error::BracketNotFound { what: "cap slope c_i(α) = 1", lo, hi });
        }
        if flo >= 0.0 {
            lo = alpha0 / grow;
            flo = h(lo)?;
        }
        if fhi <= 0.0 {
            hi = alpha0 * grow;
            fhi = h(hi)?;
        }
    }
    let alpha = bisect("cap slope c_i(α) = 1", h, lo, hi, 1e-15 * alpha0)?;
    let (nodes, c, v) = cap_for(g, alpha)?;
    g.alpha_sharp = alpha;
    g.v_i = v;
    g.end_slope = c;
    g.blend_a = nodes;
    g.length = g.p1() + v;
    Ok(CapReport { alpha_0: alpha0, alpha_sharp: alpha, v_i: v, end_slope: c, bracket_widened: widened })
}

/// The four spot-checked bounds on the cap region.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CapBounds {
    pub min_radial: f64,
    pub radial_bound: f64,
    pub min_transverse: f64,
    pub max_hb: f64,
    pub min_product_margin: f64,
    pub radial_ok: bool,
    pub transverse_ok: bool,
    pub hb_ok: bool,
    pub product_ok: bool,
}

/// Everything certified about one glued profile.
#[derive(Debug, Clone, Serialize)]
pub struct CertReport {
    pub min_lambda: f64,
    pub argmin: f64,
    /// Excluded margin at each end containing every node with `λ < 1 - cert_tol`.
    pub delta_i: f64,
    pub min_lambda_interior: f64,
    /// `2 ×` the interior deficit below 1.
    pub epsilon_i: f64,
    pub min_lambda_interior_rescaled: f64,
    pub tip_closure: f64,
    pub far_closure: f64,
    pub kahler_residual: f64,
    pub c2_distance_to_hk: f64,
    pub gh_upper_bound: f64,
    pub cap: CapBounds,
    pub passed: bool,
    pub failure: Option<String>,
}

/// `‖a - a_k‖_{C²} + ‖b - b_k‖_{C²}` on `[lo, hi]`.
pub fn c2_distance_to_hk<P: WarpProfile<f64>>(p: &P, k: f64, lo: f64, hi: f64, samples: usize) -> Result<f64> {
    let hk = ModelHk { n: p.n(), k };
    let mut a = [0.0f64; 3];
    let mut b = [0.0f64; 3];
    for j in 0..=samples {
        let s = lo + (hi - lo) * j as f64 / samples as f64;
        let (x, y) = (p.jet(s)?, hk.jet(s)?);
        for d in 0..3 {
            a[d] = a[d].max((x.a[d] - y.a[d]).abs());
            b[d] = b[d].max((x.b[d] - y.b[d]).abs());
        }
    }
    Ok(a.iter().sum::<f64>() + b.iter().sum::<f64>())
}

fn cap_bounds(g: &GluedProfile) -> Result<CapBounds> {
    let [_, _, _, q3, l] = g.breaks();
    let k = g.k;
    let radial_bound = k * k / (16.0 * g.r_i * g.r_i);
    let (mut min_radial, mut min_tr, mut max_hb, mut min_prod) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    for j in 1..128 {
        let s = q3 + (l - q3) * j as f64 / 128.0;
        let jet = g.jet(s)?;
        let f = CurvatureFrameData::from_jet(&jet);
        min_radial = min_radial.min(f.ha);
        min_tr = min_tr.min(f.p);
        max_hb = max_hb.max(f.hb);
        min_prod = min_prod.min(condition_margins(&jet, g.n, 1.0)[3]);
    }
    Ok(CapBounds {
        min_radial,
        radial_bound,
        min_transverse: min_tr,
        max_hb,
        min_product_margin: min_prod,
        radial_ok: min_radial >= radial_bound,
        transverse_ok: min_tr >= k - 1.0,
        hb_ok: max_hb <= k + 1.0,
        product_ok: min_prod >= 0.0,
    })
}

/// Final output of the pipeline.
#[derive(Debug, Clone)]
pub struct GlueResult {
    pub params: GlueParams,
    pub matched: ExpanderMatch,
    pub cap: CapReport,
    pub halvings: usize,
    pub raw: GluedProfile,
    /// `(1 - ε_i) g_i`.
    pub profile: Scaled<GluedProfile, f64>,
    pub certificate: LambdaCertificate,
    pub report: CertReport,
}

/// Numbers written to `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct GlueSummary {
    pub n: usize,
    pub k: f64,
    pub i: usize,
    pub alpha_match: f64,
    pub big_r: f64,
    pub lambda_scale: f64,
    pub s_i: f64,
    pub r_i: f64,
    pub t_cut: f64,
    pub t_cap: f64,
    pub halvings: usize,
    pub cap: CapReport,
    pub length: f64,
    pub b_end: f64,
    pub report: CertReport,
}

impl GlueResult {
    pub fn summary(&self) -> Result<GlueSummary> {
        let b_end = self.profile.jet(self.profile.length())?.b[0];
        Ok(GlueSummary {
            n: self.params.n,
            k: self.params.k,
            i: self.params.i,
            alpha_match: self.matched.alpha,
            big_r: self.matched.big_r,
            lambda_scale: self.matched.lambda_scale,
            s_i: self.matched.s_i,
            r_i: self.matched.r_i,
            t_cut: self.raw.t_cut,
            t_cap: self.raw.t_cap,
            halvings: self.halvings,
            cap: self.cap,
            length: self.profile.length(),
            b_end,
            report: self.report.clone(),
        })
    }
}

/// Certifies an assembled profile: positivity, the excluded margin, the rescale and the cap bounds.
pub fn certify_glued(g: &GluedProfile, params: &GlueParams) -> Result<(LambdaCertificate, CertReport)> {
    let opts = CertifyOptions { samples: params.samples, tol_kahler: Some(1e-10), tol_closure: params.tol_closure, tol_lambda: LAMBDA_TOL };
    let cert = certify(g, &opts)?;
    let l = g.length;
    let threshold = 1.0 - params.cert_tol;
    let delta = cert.samples.iter().filter(|(_, v)| *v < threshold).map(|(s, _)| s.min(l - s)).fold(0.0, f64::max);
    let interior = cert.samples.iter().filter(|(s, _)| *s > delta && *s < l - delta).map(|x| x.1).fold(f64::INFINITY, f64::min);
    let eps = 2.0 * (1.0 - interior).max(0.0);
    let (tip, far) = closure_residuals(g)?;
    let c2 = c2_distance_to_hk(g, params.k, params.compare_margin, FRAC_PI_2 - params.compare_margin, 2000)?;
    let gh = gh_upper_bound(g, params.samples)?;
    let cap = cap_bounds(g)?;
    let failure = if !(cert.min_lambda > 0.0) {
        Some(format!("lambda = {:.3e} <= 0 at s = {:.6e}", cert.min_lambda, cert.argmin))
    } else if !(delta <= params.delta_max) {
        Some(format!("excluded margin {delta:.3e} exceeds {:.3e}", params.delta_max))
    } else if !(eps < 0.5) {
        Some(format!("interior deficit {:.3e} too large to rescale", 1.0 - interior))
    } else {
        None
    };
    let report = CertReport {
        min_lambda: cert.min_lambda,
        argmin: cert.argmin,
        delta_i: delta,
        min_lambda_interior: interior,
        epsilon_i: eps,
        min_lambda_interior_rescaled: interior / (1.0 - eps),
        tip_closure: tip,
        far_closure: far,
        kahler_residual: cert.kahler_residual,
        c2_distance_to_hk: c2,
        gh_upper_bound: gh,
        cap,
        passed: failure.is_none(),
        failure,
    };
    Ok((cert, report))
}

/// Assembles with a fixed blend width.
pub fn assemble(m: &ExpanderMatch, n: usize, k: f64, t: f64) -> Result<(GluedProfile, CapReport)> {
    if !(t > 0.0 && t < m.s_i.min(m.r_i)) {
        return Err(Error::BadConfig(format!("cutoff width {t:e} must lie in (0, min(s_i, r_i) = {:e})", m.s_i.min(m.r_i))));
    }
    let mut g = glue_b(m, n, k, t)?;
    let cap = close_cap(&mut g)?;
    Ok((g, cap))
}

/// The full pipeline: match, blend, cap, certify, halving `t` until certification passes.
pub fn glue(params: &GlueParams) -> Result<GlueResult> {
    params.validate()?;
    let matched = match_expander(params.n, params.k, params.i)?;
    let mut t = params.t_cut.unwrap_or(matched.s_i.min(matched.r_i) / 8.0);
    let mut halvings = 0;
    loop {
        let (raw, cap) = assemble(&matched, params.n, params.k, t)?;
        let (certificate, report) = certify_glued(&raw, params)?;
        let last = params.t_cut.is_some() || halvings >= params.max_halvings;
        if report.passed || last {
            if !report.passed {
                return Err(Error::CertificationFailed(report.failure.unwrap_or_default()));
            }
            let profile = Scaled { inner: raw.clone(), c: (1.0 - report.epsilon_i).sqrt() };
            return Ok(GlueResult { params: params.clone(), matched, cap, halvings, raw, profile, certificate, report });
        }
        t *= 0.5;
        halvings += 1;
    }
}
