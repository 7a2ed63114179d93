//! `U(n)`-invariant Kähler gradient Ricci solitons `Ric + ∇²f = μ g` on `ℂⁿ`.
//!
//! Holomorphy of `∇f` forces `f' = c a` with `c = f''(0)`. In the moment coordinate `x = b²`
//! the transverse equation becomes linear and first order in `q = b'²`:
//!
//! `q_x = n (1 - q)/x + (c q - μ)/2`, with `q(0) = 1`,
//!
//! whose solution is `q = 1 - K x E_n(κ x)` where `κ = -c/2`, `K = (μ - c)/2` and
//! `E_p(z) = ∫₀¹ (1 - v)^p e^{-z v} dv`. Arclength is recovered from `ds = db / √q`.
//! The arclength form of the same equation is also integrated directly from the tip series
//! by [`integrate_tip_ode`]; it is stiff at large radius, so it serves as a cross-check.

use std::ops::ControlFlow;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::ode::{Dopri5, Point};
use crate::numerics::quad::Quad;
use crate::numerics::roots::scan_then_bisect;
use crate::warp_core::measure::{hessian, ricci_components};
use crate::warp_core::profile::{Jet, SampledProfile, WarpProfile};
use crate::warp_core::tensor::CurvatureTensor;

/// Closed-form reduction of the soliton equation for given `(dim, μ, c)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MomentSoliton {
    /// Complex dimension of the soliton.
    pub dim: usize,
    /// Soliton constant `μ`: `0` steady, `-½` expanding.
    pub mu: f64,
    /// `f''(0)`.
    pub c: f64,
}

/// `q` and its first three `x`-derivatives.
#[derive(Debug, Clone, Copy)]
pub struct QJet {
    pub x: f64,
    pub q: [f64; 4],
}

/// Jets of a Kähler profile given in moment form `b'² = q(b²)`, from `q` and its first three
/// derivatives at `x = b²`. The second value is `b''''`.
pub fn moment_jets(b: f64, q: [f64; 4]) -> (Jet<f64>, f64) {
    let x = b * b;
    let [q, q1, q2, q3] = q;
    let rq = q.sqrt();
    let a = b * rq;
    let a1 = q + x * q1;
    let a2 = 2.0 * a * (2.0 * q1 + x * q2);
    let a3 = 2.0 * (q + x * q1) * (2.0 * q1 + x * q2) + 4.0 * x * q * (3.0 * q2 + x * q3);
    let y = q1 + 2.0 * x * q2;
    let b1 = rq;
    let b2 = b * q1;
    let b3 = rq * y;
    let b4 = b * (q1 * y + 2.0 * q * (3.0 * q2 + 2.0 * x * q3));
    (Jet { a: [a, a1, a2, a3], b: [b, b1, b2, b3] }, b4)
}

impl MomentSoliton {
    fn p(&self) -> i32 {
        self.dim as i32
    }

    fn kappa(&self) -> f64 {
        -0.5 * self.c
    }

    fn big_k(&self) -> f64 {
        0.5 * (self.mu - self.c)
    }

    /// `∫₀¹ v^j (1-v)^r e^{-z v} dv`.
    fn moment(j: i32, r: i32, z: f64) -> f64 {
        let quad = Quad::with_tol(1e-14, 0.0);
        let f = |v: f64| v.powi(j) * (1.0 - v).powi(r) * (-z * v).exp();
        let upper = if z > 40.0 { (80.0 / z).min(1.0) } else { 1.0 };
        if upper < 1.0 {
            // split where the mass sits
            let mut acc = 0.0;
            let mut lo = 0.0;
            for &w in &[1.0, 4.0, 16.0, 80.0] {
                let hi = (w / z).min(1.0);
                if hi > lo {
                    acc += quad.value(f, lo, hi).unwrap_or(f64::NAN);
                }
                lo = hi;
            }
            acc
        } else {
            quad.value(f, 0.0, 1.0).unwrap_or(f64::NAN)
        }
    }

    /// `q` alone.
    pub fn q_value(&self, x: f64) -> f64 {
        let p = self.p();
        let kappa = self.kappa();
        let big_k = self.big_k();
        let z = kappa * x;
        if z.abs() > 1.0 {
            let r = big_k / kappa;
            1.0 - r + r * p as f64 * Self::moment(0, p - 1, z)
        } else {
            1.0 - big_k * x * Self::moment(0, p, z)
        }
    }

    pub fn q_jet(&self, x: f64) -> QJet {
        let p = self.p();
        let kappa = self.kappa();
        let big_k = self.big_k();
        let z = kappa * x;
        let pf = p as f64;
        let q = self.q_value(x);
        let q1 = -big_k * pf * Self::moment(1, p - 1, z);
        let q2 = big_k * kappa * pf * Self::moment(2, p - 1, z);
        let q3 = -big_k * kappa * kappa * pf * Self::moment(3, p - 1, z);
        QJet { x, q: [q, q1, q2, q3] }
    }

    /// Jets of `a` (to third order) and `b` (to fourth order) at the point where `b` takes the given value.
    pub fn jets_at_b(&self, b: f64) -> (Jet<f64>, f64) {
        moment_jets(b, self.q_jet(b * b).q)
    }

    /// `ds/db = 1/√q(b²)`.
    pub fn dsdb(&self, b: f64) -> f64 {
        1.0 / self.q_value(b * b).sqrt()
    }

    /// Arclength `s(b1) - s(b0)`.
    pub fn arclength(&self, b0: f64, b1: f64) -> Result<f64> {
        Quad::with_tol(1e-13, 1e-15).value(|b| self.dsdb(b), b0, b1)
    }

    /// Value of `b` at arclength `s`.
    pub fn b_at_arclength(&self, s: f64) -> Result<f64> {
        // Newton on s(b) = s, started from the smaller of the two asymptotic slopes.
        let mut b = s * self.q_value(0.0).sqrt().min(1.0);
        let mut s_b = self.arclength(0.0, b)?;
        for _ in 0..60 {
            let step = (s - s_b) / self.dsdb(b);
            let next = (b + step).max(0.5 * b);
            s_b += self.arclength(b, next)?;
            b = next;
            if step.abs() <= 1e-14 * (1.0 + b) {
                return Ok(b);
            }
        }
        Err(Error::NonConvergence { what: "arclength inversion", iters: 60 })
    }

    /// Residual of `b'' = n(1 - b'²)/b + (c b'² - μ) b / 2` on a jet.
    pub fn ode_residual(&self, j: &Jet<f64>) -> f64 {
        let nn = self.dim as f64;
        let (b, b1, b2) = (j.b[0], j.b[1], j.b[2]);
        if self.dim == 1 {
            let (a, a1, a2) = (j.a[0], j.a[1], j.a[2]);
            return (a2 - a * (self.c * a1 - self.mu)).abs();
        }
        (b2 - (nn * (1.0 - b1 * b1) / b + 0.5 * (self.c * b1 * b1 - self.mu) * b)).abs()
    }
}

/// A soliton profile stored on a node grid, with exact jets recomputed from the moment form.
#[derive(Debug, Clone, Serialize)]
pub struct SolitonProfile {
    pub model: MomentSoliton,
    /// Stored jets; `interp.n = dim + 1`.
    pub interp: SampledProfile<f64>,
    /// Fourth derivative of `b` at the nodes.
    pub b4: Vec<f64>,
}

/// Soliton solve summary as written to `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct SolitonSummary {
    pub dim: usize,
    pub mu: f64,
    pub f2_tip: f64,
    pub r_max: f64,
    pub b_at_r_max: f64,
    pub b1_at_r_max: f64,
    pub a_over_r_at_r_max: f64,
    pub max_ode_residual: f64,
}

impl SolitonProfile {
    /// Builds the profile on `[0, r_max]`.
    pub fn build(model: MomentSoliton, r_max: f64) -> Result<Self> {
        if !(r_max > 0.0) {
            return Err(Error::BadConfig(format!("r_max must be positive, got {r_max}")));
        }
        let b_max = model.b_at_arclength(r_max)?;
        let ell = 1.0 / model.c.abs().max(model.mu.abs()).max(1.0).sqrt();
        let mut bs: Vec<f64> = Vec::new();
        let head = ell.min(b_max);
        for j in 0..=64 {
            bs.push(head * j as f64 / 64.0);
        }
        let mut b = head;
        while b < b_max {
            b = (b * 1.02).min(b_max);
            bs.push(b);
        }
        bs.dedup();
        let mut s = Vec::with_capacity(bs.len());
        let mut acc = 0.0;
        s.push(0.0);
        for w in bs.windows(2) {
            acc += model.arclength(w[0], w[1])?;
            s.push(acc);
        }
        // pin the last node to r_max
        let last = s.len() - 1;
        s[last] = r_max.max(s[last - 1] * (1.0 + 1e-15));
        let mut aj = Vec::with_capacity(bs.len());
        let mut bj = Vec::with_capacity(bs.len());
        let mut b4 = Vec::with_capacity(bs.len());
        for &b in &bs {
            let (j, d4) = model.jets_at_b(b);
            aj.push(j.a);
            bj.push(j.b);
            b4.push(d4);
        }
        let interp = SampledProfile::new(model.dim + 1, s, aj, bj)?;
        Ok(SolitonProfile { model, interp, b4 })
    }

    pub fn dim(&self) -> usize {
        self.model.dim
    }

    /// Jet at `s` together with `b''''`.
    pub fn jet_with_b4(&self, s: f64) -> Result<(Jet<f64>, f64)> {
        let rough = self.interp.jet(s)?;
        Ok(self.model.jets_at_b(rough.b[0].max(0.0)))
    }

    /// `(f', f'')` at `s`.
    pub fn potential_derivatives(&self, s: f64) -> Result<(f64, f64)> {
        let j = self.jet(s)?;
        Ok((self.model.c * j.a[0], self.model.c * j.a[1]))
    }

    /// Largest soliton-equation residual over the nodes, relative to the local scale of `b''`.
    pub fn max_residual(&self) -> f64 {
        (1..self.interp.len_nodes())
            .map(|i| {
                let j = self.interp.node_jet(i);
                let scale = 1.0 + j.b[2].abs() + j.a[2].abs() + j.b[1].abs() / j.b[0].max(1e-300);
                self.model.ode_residual(&j) / scale
            })
            .fold(0.0, f64::max)
    }

    /// Max-norm of `Ric + ∇²f - μ g` in the adapted frame at `s`, assembled from the traced
    /// curvature and the radial Hessian.
    pub fn tensor_residual(&self, s: f64) -> Result<f64> {
        let ric = ricci_components(self, s)?;
        let (f1, f2) = self.potential_derivatives(s)?;
        let h = hessian(self, s, f1, f2)?;
        let mu = self.model.mu;
        Ok((ric.rr + h.rr - mu).abs().max((ric.eta + h.eta - mu).abs()).max((ric.transverse + h.transverse - mu).abs()))
    }

    pub fn check_residual(&self, tol: f64) -> Result<f64> {
        let r = self.max_residual();
        if !(r <= tol) {
            return Err(Error::SolitonResidualTooLarge { residual: r, tol });
        }
        Ok(r)
    }

    pub fn summary(&self) -> Result<SolitonSummary> {
        let r = self.length();
        let j = self.jet(r)?;
        Ok(SolitonSummary {
            dim: self.dim(),
            mu: self.model.mu,
            f2_tip: self.model.c,
            r_max: r,
            b_at_r_max: j.b[0],
            b1_at_r_max: j.b[1],
            a_over_r_at_r_max: j.a[0] / r,
            max_ode_residual: self.max_residual(),
        })
    }
}

impl WarpProfile<f64> for SolitonProfile {
    fn n(&self) -> usize {
        self.model.dim + 1
    }
    fn length(&self) -> f64 {
        self.interp.length()
    }
    fn jet(&self, s: f64) -> Result<Jet<f64>> {
        Ok(self.jet_with_b4(s)?.0)
    }
    fn sample_points(&self, count: usize) -> Vec<f64> {
        self.interp.sample_points(count)
    }
}

/// Default tolerance for [`SolitonProfile::check_residual`].
pub const SOLITON_RESIDUAL_TOL: f64 = 1e-8;

/// Cao's steady soliton on `ℂⁿ`, normalised so the complex-trace scalar curvature at the tip is 1.
///
/// For `n = 1` this is the cigar.
pub fn solve_cao_steady(n: usize, r_max: f64) -> Result<SolitonProfile> {
    if n == 0 {
        return Err(Error::BadConfig("complex dimension must be at least 1".into()));
    }
    let model = MomentSoliton { dim: n, mu: 0.0, c: -1.0 / n as f64 };
    let p = SolitonProfile::build(model, r_max)?;
    p.check_residual(SOLITON_RESIDUAL_TOL)?;
    Ok(p)
}

/// Smallest sectional curvature over the coordinate planes of the unitary frame at `s`.
pub fn min_coordinate_sectional<P: WarpProfile<f64>>(p: &P, s: f64) -> Result<f64> {
    let t = CurvatureTensor::at(p, s)?;
    let d = 2 * t.dim;
    let mut best = f64::INFINITY;
    for i in 0..d {
        for j in i + 1..d {
            let mut x = vec![0.0; d];
            let mut y = vec![0.0; d];
            x[i] = 1.0;
            y[j] = 1.0;
            best = best.min(t.sectional(&x, &y));
        }
    }
    Ok(best)
}

/// Tip value of [`min_coordinate_sectional`] over the tip scalar curvature, by Richardson
/// extrapolation from `s = h` and `2h`; the tip expansion is even in `s`.
pub fn tip_min_sectional_over_scalar(p: &SolitonProfile, h: f64) -> Result<f64> {
    let k = (4.0 * min_coordinate_sectional(p, h)? - min_coordinate_sectional(p, 2.0 * h)?) / 3.0;
    Ok(k / p.model.tip_scalar())
}

/// Steady soliton with an explicit tip value `f''(0) = c < 0`.
pub fn solve_steady(n: usize, c: f64, r_max: f64) -> Result<SolitonProfile> {
    if !(c < 0.0) {
        return Err(Error::BadConfig(format!("steady solitons need f''(0) < 0, got {c}")));
    }
    let p = SolitonProfile::build(MomentSoliton { dim: n, mu: 0.0, c }, r_max)?;
    p.check_residual(SOLITON_RESIDUAL_TOL)?;
    Ok(p)
}

/// Tip data of the product of the cigar with a steady soliton of one dimension less.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProductSolitonDescriptor {
    /// Complex dimension of the product.
    pub dim: usize,
    /// Homothety applied to both factors so that the tip scalar curvature is 1.
    pub scale: f64,
    pub tip_scalar: f64,
    pub min_sectional_at_tip: f64,
}

impl ProductSolitonDescriptor {
    /// Rescales so that the tip scalar curvature is 1; a no-op once normalised.
    pub fn normalized(self) -> Self {
        let f = self.tip_scalar;
        ProductSolitonDescriptor { scale: self.scale * f, tip_scalar: 1.0, min_sectional_at_tip: self.min_sectional_at_tip / f, ..self }
    }
}

impl MomentSoliton {
    /// Scalar curvature (complex trace) at the tip: `ρ = μ - c` in each of the `dim` directions.
    pub fn tip_scalar(&self) -> f64 {
        self.dim as f64 * (self.mu - self.c)
    }
}

/// `cigar × steady`: mixed planes are flat, so the tip minimum sectional curvature is 0.
pub fn product_with_cigar(steady: &SolitonProfile) -> ProductSolitonDescriptor {
    let cigar = MomentSoliton { dim: 1, mu: 0.0, c: -1.0 };
    let r = cigar.tip_scalar() + steady.model.tip_scalar();
    ProductSolitonDescriptor { dim: steady.dim() + 1, scale: 1.0, tip_scalar: r, min_sectional_at_tip: 0.0 }.normalized()
}

/// Shooting target for an expander.
#[derive(Debug, Clone, Copy)]
pub struct ExpanderTarget {
    /// Cone angle: the asymptotic cone is `dr² + r²/α² η² + (r²/α) gᵀ`.
    pub alpha: f64,
    /// Matching radius; `None` selects `100 max(1, α)`.
    pub r_max: Option<f64>,
}

impl ExpanderTarget {
    pub fn new(alpha: f64) -> Self {
        ExpanderTarget { alpha, r_max: None }
    }

    pub fn radius(&self) -> f64 {
        self.r_max.unwrap_or(100.0 * self.alpha.max(1.0))
    }
}

/// Shooting residual `√α b'(R) - 1` for a given `f''(0)`.
pub fn expander_mismatch(dim: usize, c: f64, target: &ExpanderTarget) -> Result<f64> {
    let m = MomentSoliton { dim, mu: -0.5, c };
    let b = m.b_at_arclength(target.radius())?;
    Ok((target.alpha * m.q_jet(b * b).q[0]).sqrt() - 1.0)
}

/// Shoots `f''(0)` so that `b'(R_max) = 1/√α`. Cone angles below 1 have no positively curved expander.
pub fn shoot_expander(dim: usize, target: &ExpanderTarget) -> Result<f64> {
    let alpha = target.alpha;
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(Error::BadConfig(format!("expander cone angle must be >= 1, got {alpha}")));
    }
    if alpha == 1.0 {
        return Ok(-0.5);
    }
    // scan -f''(0) geometrically from the flat value 1/2
    let top = 10.0 * alpha.max(1.0);
    let count = 48;
    let grid: Vec<f64> = (0..=count).map(|j| 0.5 * (2.0 * top).powf(j as f64 / count as f64)).collect();
    let sigma = scan_then_bisect("expander shooting", |sg| expander_mismatch(dim, -sg, target), &grid, 1e-13)?;
    Ok(-sigma)
}

/// Expanding soliton on `ℂ^dim` asymptotic to the cone of angle `α`, built on `[0, R_max]`.
pub fn solve_expander(dim: usize, target: &ExpanderTarget) -> Result<SolitonProfile> {
    let c = shoot_expander(dim, target)?;
    let p = SolitonProfile::build(MomentSoliton { dim, mu: -0.5, c }, target.radius())?;
    p.check_residual(SOLITON_RESIDUAL_TOL)?;
    Ok(p)
}

/// Distance on the annulus `ρ ∈ [lo, hi]` between the canonical flow `g(t)` of an expander and its cone.
///
/// `g(t)` is the `t`-rescaled soliton; points are identified by the cone radius `ρ = √(tα) b`.
/// The value is the largest of `|α b'² - 1|`, `|1/(α b'²) - 1|` and the scale-free first
/// derivative `2α |b b''|`.
pub fn canonical_flow_distance(p: &SolitonProfile, alpha: f64, t: f64, annulus: (f64, f64)) -> Result<f64> {
    let (lo, hi) = annulus;
    if !(t > 0.0 && lo > 0.0 && hi > lo) {
        return Err(Error::BadConfig("canonical flow distance needs t > 0 and 0 < lo < hi".into()));
    }
    let b_hi = hi / (t * alpha).sqrt();
    let b_end = p.interp.b.last().expect("nodes")[0];
    if b_hi > b_end * (1.0 + 1e-12) {
        return Err(Error::OutOfDomain { s: b_hi, len: b_end });
    }
    Ok(p.model.cone_distance(alpha, t, annulus))
}

impl MomentSoliton {
    /// [`canonical_flow_distance`] without the range check: the moment form is valid for all `b`.
    pub fn cone_distance(&self, alpha: f64, t: f64, annulus: (f64, f64)) -> f64 {
        let (lo, hi) = annulus;
        let scale = 1.0 / (t * alpha).sqrt();
        let mut worst: f64 = 0.0;
        for j in 0..=64 {
            let rho = lo * (hi / lo).powf(j as f64 / 64.0);
            let (jet, _) = self.jets_at_b(rho * scale);
            let aq = alpha * jet.b[1] * jet.b[1];
            worst = worst.max((aq - 1.0).abs()).max((1.0 / aq - 1.0).abs()).max(2.0 * alpha * (jet.b[0] * jet.b[2]).abs());
        }
        worst
    }

    /// Expander whose asymptotic cone has angle exactly `α`: `b'² → μ/c` forces `c = -α/2`.
    pub fn asymptotic_expander(dim: usize, alpha: f64) -> Self {
        MomentSoliton { dim, mu: -0.5, c: -0.5 * alpha }
    }
}

/// Integrates the arclength form from the tip series at `s = eps` with adaptive Dormand–Prince.
///
/// State is `(b, b')` for `dim >= 2` and `(a, a')` for `dim = 1`. Returns every accepted point.
pub fn integrate_tip_ode(model: &MomentSoliton, r_max: f64, eps: f64, solver: &Dopri5<f64>) -> Result<Vec<Point<f64, 2>>> {
    let (mu, c) = (model.mu, model.c);
    if model.dim == 1 {
        // a = s + β s³, a'' = a (c a' - μ) gives β = (c - μ)/6
        let beta = (c - mu) / 6.0;
        let y0 = [eps + beta * eps.powi(3), 1.0 + 3.0 * beta * eps * eps];
        return solver.trajectory(|_, y: &[f64; 2]| [y[1], y[0] * (c * y[1] - mu)], eps, y0, r_max);
    }
    let nn = model.dim as f64;
    let beta = (c - mu) / (12.0 * (nn + 1.0));
    let y0 = [eps + beta * eps.powi(3), 1.0 + 3.0 * beta * eps * eps];
    solver.trajectory(
        |_, y: &[f64; 2]| [y[1], nn * (1.0 - y[1] * y[1]) / y[0] + 0.5 * (c * y[1] * y[1] - mu) * y[0]],
        eps,
        y0,
        r_max,
    )
}

/// Value at `s` by stepping from the nearest earlier accepted point.
pub fn ode_value_at<F: FnMut(f64, &[f64; 2]) -> [f64; 2]>(points: &[Point<f64, 2>], f: F, s: f64) -> Result<[f64; 2]> {
    let i = points.partition_point(|p| p.t <= s);
    if i == 0 {
        return Err(Error::OutOfDomain { s, len: points.last().map_or(0.0, |p| p.t) });
    }
    let base = points[i - 1];
    if base.t == s {
        return Ok(base.y);
    }
    Dopri5::<f64>::with_tol(1e-13, 1e-15).solve(f, base.t, base.y, s, |_| ControlFlow::Continue(())).map(|p| p.y)
}

/// Result of the integration-by-parts identity check `I = 2a J`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AcIntegralCheck {
    pub a: f64,
    pub n: usize,
    pub i: f64,
    pub j: f64,
    pub residual: f64,
    /// Sign of the integrand of `J` on `(0, 1)`: `(-1)^{n-1}`.
    pub j_sign: i32,
    pub j_sign_definite: bool,
}

/// `I = ∫₀¹ e^{2ax}(1 - n x)(x - 1)^{n-2} dx` against `2a J`, `J = ∫₀¹ x (x-1)^{n-1} e^{2ax} dx`.
pub fn ac_integral_check(a: f64, n: usize) -> Result<AcIntegralCheck> {
    if n < 2 {
        return Err(Error::BadConfig(format!("integral identity needs n >= 2, got {n}")));
    }
    let quad = Quad::with_tol(1e-13, 1e-16);
    let nf = n as f64;
    let e = n as i32 - 2;
    let i = quad.value(|x| (2.0 * a * x).exp() * (1.0 - nf * x) * (x - 1.0).powi(e), 0.0, 1.0)?;
    let j = quad.value(|x| x * (x - 1.0).powi(e + 1) * (2.0 * a * x).exp(), 0.0, 1.0)?;
    let j_sign = if (n - 1) % 2 == 0 { 1 } else { -1 };
    // the integrand of J never changes sign on (0,1); check on a grid as well
    let definite = (1..200).all(|k| {
        let x = k as f64 / 200.0;
        let v = x * (x - 1.0).powi(e + 1) * (2.0 * a * x).exp();
        v * j_sign as f64 > 0.0
    });
    Ok(AcIntegralCheck { a, n, i, j, residual: (i - 2.0 * a * j).abs(), j_sign, j_sign_definite: definite && j * j_sign as f64 > 0.0 })
}

/// The Euler-field compatibility predicate `q₁ = -n q₀`.
pub fn euler_field_predicate(q0: f64, q1: f64, n: usize, tol: f64) -> bool {
    (q1 + n as f64 * q0).abs() <= tol * (1.0 + q0.abs())
}
