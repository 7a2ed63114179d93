//! Kähler–Ricci flow of closed warped profiles, with `λ` monitoring and a mollified `h_k` to start from.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::quad::{gk21, Quad};
use crate::soliton_ode::{moment_jets, MomentSoliton};
use crate::warp_core::frame::CurvatureFrameData;
use crate::warp_core::lambda::{lambda_from_jet, LAMBDA_TOL};
use crate::warp_core::measure::unit_sphere_volume;
use crate::warp_core::profile::{Jet, WarpProfile};

/// `∫_0^1 t^j e^{-tu} dt` for `j = 0..=3`, `u ≥ 0`.
fn damped_moments(u: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    if u < 2.0 {
        for (j, o) in out.iter_mut().enumerate() {
            let mut term = 1.0;
            let mut acc = 0.0;
            for i in 0..60 {
                acc += term / (i + j + 1) as f64;
                term *= -u / (i + 1) as f64;
            }
            *o = acc;
        }
    } else {
        let e = (-u).exp();
        out[0] = -(-u).exp_m1() / u;
        for j in 1..4 {
            out[j] = (j as f64 * out[j - 1] - e) / u;
        }
    }
    out
}

/// `h_k` with both cone points rounded off on arclength scale `w`, in moment form.
///
/// With `x = b²` and `σ² = w²/k`, the potential `Θ = a²` is
/// `Θ = x (q_α(x/σ²) - 1/k) + x/k - x² - B σ² e^{-(x_L - x)/σ²}`,
/// where `q_α` is the moment function of the `α = k` expander asymptotic to the tip cone of `h_k`,
/// and `B`, `x_L` close the far end with `a'(L) = -1`. Away from the ends this is `h_k`
/// (`Θ = x(1/k - x)`) up to the expander's `O(σ²/x)` tail.
#[derive(Debug, Clone)]
pub struct MollifiedHk {
    pub n: usize,
    pub k: f64,
    pub w: f64,
    expander: MomentSoliton,
    sigma2: f64,
    x_l: f64,
    big_b: f64,
    // P and its first three derivatives at x_L
    p_l: [f64; 4],
    s_mid: f64,
    length: f64,
    // (b, s) on the tip half, (z, L - s) on the far half with x_L - b² = z²
    left: Vec<[f64; 3]>,
    right: Vec<[f64; 3]>,
}

const TABLE: usize = 1024;

impl MollifiedHk {
    pub fn new(n: usize, k: f64, w: f64) -> Result<Self> {
        if n < 3 || !(k > 1.0) || !(w > 0.0) {
            return Err(Error::BadConfig(format!("mollified h_k needs n ≥ 3, k > 1, w > 0 (n = {n}, k = {k}, w = {w})")));
        }
        // the far correction is below e^{-40} on the tip half
        if w * w > 1.0 / 80.0 {
            return Err(Error::BadConfig(format!("w = {w} is too wide: need w² ≤ 1/80")));
        }
        let mut p = MollifiedHk {
            n,
            k,
            w,
            expander: MomentSoliton::asymptotic_expander(n - 1, k),
            sigma2: w * w / k,
            x_l: 0.0,
            big_b: 0.0,
            p_l: [0.0; 4],
            s_mid: 0.0,
            length: 0.0,
            left: vec![],
            right: vec![],
        };
        // Θ(x_L) = 0 and Θ'(x_L) = -1 read P(x_L) = B σ², B = 1 + P'(x_L)
        let g = |x: f64| {
            let pj = p.p_jet(x);
            pj[0] - (1.0 + pj[1]) * p.sigma2
        };
        let (mut lo, mut hi) = (0.5 / k, 1.0 / k);
        if !(g(lo) > 0.0 && g(hi) < 0.0) {
            return Err(Error::BracketNotFound { what: "mollified h_k far end", lo, hi });
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        p.x_l = 0.5 * (lo + hi);
        let pj = p.p_jet(p.x_l);
        p.big_b = pj[0] / p.sigma2;
        p.p_l = pj;
        let quad = Quad::with_tol(1e-15, 1e-14);
        let mid = (0.5 * p.x_l).sqrt();
        p.left = Self::table(&quad, |b| 1.0 / p.tip_q_value(b * b).sqrt(), mid)?;
        p.right = Self::table(&quad, |z| 1.0 / p.far_ratio(z * z).sqrt(), mid)?;
        p.s_mid = p.left.last().expect("table")[1];
        p.length = p.s_mid + p.right.last().expect("table")[1];
        Ok(p)
    }

    /// Rows `[p, ∫_0^p rate, rate(p)]` on a uniform grid in `p`.
    fn table<F: Fn(f64) -> f64>(quad: &Quad<f64>, rate: F, top: f64) -> Result<Vec<[f64; 3]>> {
        let mut out = vec![[0.0, 0.0, rate(0.0)]];
        let mut acc = 0.0;
        for j in 1..=TABLE {
            let lo = top * (j - 1) as f64 / TABLE as f64;
            let hi = top * j as f64 / TABLE as f64;
            acc += quad.value(&rate, lo, hi)?;
            out.push([hi, acc, rate(hi)]);
        }
        Ok(out)
    }

    /// `b(L)²`.
    pub fn x_l(&self) -> f64 {
        self.x_l
    }

    /// `q_α(x/σ²) - 1/k` and its `x`-derivatives.
    fn delta(&self, x: f64) -> [f64; 4] {
        let s2 = self.sigma2;
        let q = self.expander.q_jet(x / s2).q;
        [q[0] - 1.0 / self.k, q[1] / s2, q[2] / (s2 * s2), q[3] / (s2 * s2 * s2)]
    }

    /// `P = x (δ + 1/k) - x²` and its derivatives.
    fn p_jet(&self, x: f64) -> [f64; 4] {
        let d = self.delta(x);
        let c = d[0] + 1.0 / self.k;
        [x * (c - x), c + x * d[1] - 2.0 * x, 2.0 * d[1] + x * d[2] - 2.0, 3.0 * d[2] + x * d[3]]
    }

    fn tip_q_value(&self, x: f64) -> f64 {
        self.expander.q_value(x / self.sigma2) - x
    }

    /// `q = Θ/x` and its `x`-derivatives on the tip half.
    fn tip_q(&self, x: f64) -> [f64; 4] {
        let d = self.delta(x);
        [d[0] + 1.0 / self.k - x, d[1] - 1.0, d[2], d[3]]
    }

    /// `Θ/y` with `y = x_L - x`, on the far half.
    fn far_ratio(&self, y: f64) -> f64 {
        let b = self.big_b;
        let e0 = damped_moments(y / self.sigma2)[0];
        // D(y)/y with D = P(x_L - y) - P(x_L) + y P'(x_L)
        let d = if y < 1e-3 * self.x_l {
            y * self.p_l[2] / 2.0 - y * y * self.p_l[3] / 6.0
        } else {
            let x = self.x_l - y;
            (x * self.tip_q_value(x) - self.p_l[0] + y * self.p_l[1]) / y
        };
        d - (b - 1.0) + b * e0
    }

    /// `q` and its `x`-derivatives on the far half.
    fn far_q(&self, y: f64) -> [f64; 4] {
        let x = self.x_l - y;
        let pj = self.p_jet(x);
        let e = self.big_b * (-y / self.sigma2).exp();
        let th = y * self.far_ratio(y);
        let th1 = pj[1] - e;
        let th2 = pj[2] - e / self.sigma2;
        let th3 = pj[3] - e / (self.sigma2 * self.sigma2);
        let q = th / x;
        let q1 = (th1 - q) / x;
        let q2 = (th2 - 2.0 * q1) / x;
        let q3 = (th3 - 3.0 * q2) / x;
        [q, q1, q2, q3]
    }

    /// `Θ = a²` as a function of `x = b²`.
    pub fn big_theta(&self, x: f64) -> f64 {
        if x <= 0.5 * self.x_l {
            x * self.tip_q_value(x)
        } else {
            let y = self.x_l - x;
            y * self.far_ratio(y)
        }
    }

    /// Parameter `p` with `∫_0^p rate = target`, on a monotone table.
    fn invert<F: Fn(f64) -> f64>(table: &[[f64; 3]], mut rate: F, target: f64) -> Result<f64> {
        let j = table.partition_point(|r| r[1] <= target).clamp(1, table.len() - 1);
        let [p0, s0, r0] = table[j - 1];
        let [p1, s1, r1] = table[j];
        // cubic Hermite guess for the inverse map, whose slopes are 1/rate
        let h = s1 - s0;
        let u = ((target - s0) / h).clamp(0.0, 1.0);
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u),
            u * (1.0 - u) * (1.0 - u),
            u * u * (3.0 - 2.0 * u),
            u * u * (u - 1.0),
        );
        let mut p = (h00 * p0 + h10 * h / r0 + h01 * p1 + h11 * h / r1).clamp(p0, p1);
        // table cells are far below the scale of the rate, so one Kronrod pass is exact
        let mut s = s0 + gk21(&mut rate, p0, p).0;
        for _ in 0..20 {
            let step = (target - s) / rate(p);
            if step.abs() <= 1e-15 * p1 {
                return Ok(p);
            }
            let next = (p + step).clamp(p0, p1);
            s += gk21(&mut rate, p, next).0;
            p = next;
        }
        Err(Error::NonConvergence { what: "mollified h_k arclength inversion", iters: 20 })
    }
}

impl WarpProfile<f64> for MollifiedHk {
    fn n(&self) -> usize {
        self.n
    }

    fn length(&self) -> f64 {
        self.length
    }

    fn jet(&self, s: f64) -> Result<Jet<f64>> {
        self.check_domain(s)?;
        if s <= self.s_mid {
            let b = Self::invert(&self.left, |b| 1.0 / self.tip_q_value(b * b).sqrt(), s)?;
            Ok(moment_jets(b, self.tip_q(b * b)).0)
        } else {
            let z = Self::invert(&self.right, |z| 1.0 / self.far_ratio(z * z).sqrt(), self.length - s)?;
            let y = z * z;
            Ok(moment_jets((self.x_l - y).sqrt(), self.far_q(y)).0)
        }
    }

    fn sample_points(&self, count: usize) -> Vec<f64> {
        // half uniform, half clustered within 8w of either end
        let l = self.length;
        let half = count / 2;
        let mut pts: Vec<f64> = (1..=half).map(|j| l * j as f64 / (half + 1) as f64).collect();
        let near = count - half;
        let span = (8.0 * self.w).min(0.25 * l);
        for j in 1..=near / 2 {
            let d = span * (j as f64 / (near / 2) as f64).powi(2);
            pts.push(d);
            pts.push(l - d);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

/// Boundary treatment at the far end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FarEnd {
    /// Smooth closure onto `ℂP^{n-2}`; the moment interval shrinks at rate `4n`.
    Closed,
    /// The interval and the last two nodes are held fixed; for fragments that do not close.
    Frozen,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlowParams {
    pub c_stab: f64,
    pub tol_closure: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams { c_stab: 0.1, tol_closure: 1e-3 }
    }
}

fn d1(f: &[f64], j: usize, h: f64) -> f64 {
    (f[j - 2] - 8.0 * f[j - 1] + 8.0 * f[j + 1] - f[j + 2]) / (12.0 * h)
}

fn d2(f: &[f64], j: usize, h: f64) -> f64 {
    (-f[j - 2] + 16.0 * f[j - 1] - 30.0 * f[j] + 16.0 * f[j + 1] - f[j + 2]) / (12.0 * h * h)
}

/// `ξ(η) = sin²(πη/2)` and its first two derivatives.
fn xi_map(eta: f64) -> [f64; 3] {
    let half = std::f64::consts::FRAC_PI_2;
    let s = (half * eta).sin();
    [s * s, half * (2.0 * half * eta).sin(), 2.0 * half * half * (2.0 * half * eta).cos()]
}

/// Moment data at one node: `ξ`, `g`, `θ`, `θ_ξ`, `θ_ξξ`.
#[derive(Debug, Clone, Copy)]
struct MomentNode {
    xi: f64,
    g: f64,
    th: f64,
    th1: f64,
    th2: f64,
}

/// A Kähler profile evolving by `∂_t g = -2 Ric`.
///
/// In the moment coordinate `x = b²` the metric is fixed by `Θ(x) = a²`, and the flow becomes
/// `Θ_t = 4 (Θ Θ_xx - Θ_x² + N Θ_x - (N-1) Θ²/x²)` with `N = n - 1`, on `[0, x_L(t)]`.
/// With `θ(ξ) = Θ(x_L ξ)/x_L` the state is `u = θ/(ξ(1-ξ))` (closed far end) or `u = θ/ξ`
/// (frozen far end) on the nodes `η_j = j/M` of `ξ = sin²(πη/2)`. `u` is even in `η` at both
/// ends. Smooth closure means `u = 1` at a closed end. The equation preserves that value, so
/// closed ends are pinned. A frozen end keeps its initial value and the node before it.
/// Arclength, `a` and `b` are derived: `b = √x`, `a = √Θ`, `ds/dη = x_L ξ_η/(2a)`.
#[derive(Debug, Clone, Serialize)]
pub struct FlowState {
    pub n: usize,
    pub t: f64,
    pub steps: usize,
    pub far: FarEnd,
    /// Nodes `η_0 = 0, ..., η_M = 1`.
    pub eta: Vec<f64>,
    pub u: Vec<f64>,
    pub x_l: f64,
    pub initial_kahler: f64,
}

impl FlowState {
    fn grid(cells: usize) -> Vec<f64> {
        (0..=cells).map(|j| j as f64 / cells as f64).collect()
    }

    fn weight(far: FarEnd, xi: f64) -> f64 {
        match far {
            FarEnd::Closed => xi * (1.0 - xi),
            FarEnd::Frozen => xi,
        }
    }

    /// `θ` sampled at the interior nodes; the end values of `u` follow from `far`.
    fn from_theta(n: usize, x_l: f64, theta: &[f64], far_u: f64, far: FarEnd) -> Result<Self> {
        if n < 3 {
            return Err(Error::BadConfig(format!("the flow needs n ≥ 3, got {n}")));
        }
        let cells = theta.len() + 1;
        if cells < 16 || !(x_l > 0.0) {
            return Err(Error::BadConfig(format!("need at least 16 cells and x_L > 0 (cells = {cells}, x_L = {x_l})")));
        }
        let eta = Self::grid(cells);
        let mut u = vec![1.0; cells + 1];
        for (j, th) in theta.iter().enumerate() {
            u[j + 1] = th / Self::weight(far, xi_map(eta[j + 1])[0]);
        }
        if far == FarEnd::Frozen {
            u[cells] = far_u;
        }
        if let Some(j) = u.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::DegenerateProfile(format!("Θ ≤ 0 near η = {}", eta[j])));
        }
        let mut st = FlowState { n, t: 0.0, steps: 0, far, eta, u, x_l, initial_kahler: 0.0 };
        st.initial_kahler = st.kahler_residual();
        Ok(st)
    }

    /// Samples `Θ` on `(0, x_L)`. A frozen far end takes `Θ(x_L)/x_L`.
    pub fn from_moment<F: Fn(f64) -> f64>(n: usize, x_l: f64, big_theta: F, cells: usize, far: FarEnd) -> Result<Self> {
        let eta = Self::grid(cells.max(1));
        let theta: Vec<f64> = eta[1..cells.max(1)].iter().map(|&e| big_theta(x_l * xi_map(e)[0]) / x_l).collect();
        Self::from_theta(n, x_l, &theta, big_theta(x_l) / x_l, far)
    }

    /// Samples a Kähler profile, locating each node's `s` by bisection on `b(s)² = x`.
    pub fn from_profile<P: WarpProfile<f64>>(p: &P, cells: usize, far: FarEnd) -> Result<Self> {
        let l = p.length();
        let end = p.jet(l)?;
        let x_l = end.b[0].powi(2);
        let eta = Self::grid(cells.max(1));
        let mut theta = Vec::with_capacity(cells);
        for &e in &eta[1..cells.max(1)] {
            let x = x_l * xi_map(e)[0];
            let (mut lo, mut hi) = (0.0, l);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if p.jet(mid)?.b[0].powi(2) < x {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            theta.push(p.jet(0.5 * (lo + hi))?.a[0].powi(2) / x_l);
        }
        Self::from_theta(p.n(), x_l, &theta, end.a[0].powi(2) / x_l, far)
    }

    pub fn cells(&self) -> usize {
        self.eta.len() - 1
    }

    fn h(&self) -> f64 {
        1.0 / self.cells() as f64
    }

    /// Nodes the evolution acts on.
    fn active(&self) -> std::ops::Range<usize> {
        match self.far {
            FarEnd::Closed => 1..self.cells(),
            FarEnd::Frozen => 1..self.cells() - 1,
        }
    }

    fn padded(&self, u: &[f64]) -> Vec<f64> {
        let m = u.len() - 1;
        let mut pad = Vec::with_capacity(m + 5);
        pad.extend_from_slice(&[u[2], u[1]]);
        pad.extend_from_slice(u);
        match self.far {
            FarEnd::Closed => pad.extend_from_slice(&[u[m - 1], u[m - 2]]),
            // only reached by stencils of held nodes
            FarEnd::Frozen => pad.extend_from_slice(&[u[m], u[m]]),
        }
        pad
    }

    /// `u`, `u_ξ`, `u_ξξ` at node `j` from the padded array.
    fn u_jet(&self, pad: &[f64], j: usize) -> [f64; 3] {
        let h = self.h();
        let [_, xe, xee] = xi_map(self.eta[j]);
        let u1 = d1(pad, j + 2, h) / xe;
        [pad[j + 2], u1, (d2(pad, j + 2, h) - xee * u1) / (xe * xe)]
    }

    fn nodes(&self, u: &[f64]) -> Vec<MomentNode> {
        let pad = self.padded(u);
        self.active()
            .map(|j| {
                let xi = xi_map(self.eta[j])[0];
                let [v, v1, v2] = self.u_jet(&pad, j);
                let (g, g1, g2) = match self.far {
                    FarEnd::Closed => (xi * (1.0 - xi), 1.0 - 2.0 * xi, -2.0),
                    FarEnd::Frozen => (xi, 1.0, 0.0),
                };
                MomentNode { xi, g, th: g * v, th1: g1 * v + g * v1, th2: g2 * v + 2.0 * g1 * v1 + g * v2 }
            })
            .collect()
    }

    fn dx_l(&self) -> f64 {
        match self.far {
            FarEnd::Closed => -4.0 * self.n as f64,
            FarEnd::Frozen => 0.0,
        }
    }

    /// `du/dt` at the active nodes.
    fn rhs(&self, u: &[f64], x_l: f64) -> Vec<f64> {
        let nn = (self.n - 1) as f64;
        let dx_l = self.dx_l();
        self.nodes(u)
            .iter()
            .map(|m| {
                let q = m.th / m.xi;
                let flow = 4.0 * (m.th * m.th2 - m.th1 * m.th1 + nn * m.th1 - (nn - 1.0) * q * q);
                (flow - dx_l * (m.th - m.xi * m.th1)) / (x_l * m.g)
            })
            .collect()
    }

    /// Jets in arclength at the active nodes, from `q = θ/ξ`, which is even in `η` at the tip.
    pub fn jets(&self) -> Vec<Jet<f64>> {
        let x_l = self.x_l;
        let pad = self.padded(&self.u);
        self.active()
            .map(|j| {
                let xi = xi_map(self.eta[j])[0];
                let [v, v1, v2] = self.u_jet(&pad, j);
                let (q, r1, r2) = match self.far {
                    FarEnd::Closed => ((1.0 - xi) * v, (1.0 - xi) * v1 - v, (1.0 - xi) * v2 - 2.0 * v1),
                    FarEnd::Frozen => (v, v1, v2),
                };
                let b = (x_l * xi).sqrt();
                let a = b * q.sqrt();
                // Θ_x = q + ξ q_ξ, Θ_xx = (2 q_ξ + ξ q_ξξ)/x_L, q_x = q_ξ/x_L
                let a2 = 2.0 * a * (2.0 * r1 + xi * r2) / x_l;
                Jet { a: [a, q + xi * r1, a2, 0.0], b: [b, q.sqrt(), b * r1 / x_l, 0.0] }
            })
            .collect()
    }

    /// `θ` at every node.
    pub fn theta(&self) -> Vec<f64> {
        self.eta.iter().zip(&self.u).map(|(&e, v)| Self::weight(self.far, xi_map(e)[0]) * v).collect()
    }

    pub fn a(&self) -> Vec<f64> {
        self.theta().iter().map(|t| (self.x_l * t).sqrt()).collect()
    }

    pub fn b(&self) -> Vec<f64> {
        self.eta.iter().map(|&e| (self.x_l * xi_map(e)[0]).sqrt()).collect()
    }

    /// Arclength density `ds/dη`, which is `(π/2) √(x_L/u)` times `cos(πη/2)` for a frozen end.
    pub fn phi_len(&self) -> Vec<f64> {
        let half = std::f64::consts::FRAC_PI_2;
        self.eta
            .iter()
            .zip(&self.u)
            .map(|(&e, v)| {
                let c = if self.far == FarEnd::Frozen { (half * e).cos() } else { 1.0 };
                half * (self.x_l / v).sqrt() * c
            })
            .collect()
    }

    /// Arclength of each node, by the trapezoidal rule.
    pub fn arclength_nodes(&self) -> Vec<f64> {
        let h = self.h();
        let phi = self.phi_len();
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for w in phi.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }

    pub fn length(&self) -> f64 {
        *self.arclength_nodes().last().expect("nodes")
    }

    pub fn min_spacing(&self) -> f64 {
        self.arclength_nodes().windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// `max(|P|, |H_b|, |H_a|, |ρ|)` over the active nodes, a proxy for `sup |Rm|` that leaves out
    /// the frame-rotation terms, which grow like `1/s²` at the tip even on flat space.
    pub fn sup_rm(&self) -> f64 {
        let m = self.n - 2;
        self.jets()
            .iter()
            .map(|j| {
                let f = CurvatureFrameData::from_jet(j);
                let (r, t) = f.ricci(m);
                f.p.abs().max(f.hb.abs()).max(f.ha.abs()).max(r.abs()).max(t.abs())
            })
            .fold(0.0, f64::max)
    }

    /// `c_stab · min(Δs², b₁²/(n-1), 1/sup|Rm|)`, with `Δs` the smallest arclength spacing and `b₁`
    /// the first node's distance to the tip, where the `Θ²/x²` term relaxes at rate `∼ 8(n-2)/b₁²`.
    pub fn stable_dt(&self, params: &FlowParams) -> f64 {
        let ds = self.min_spacing();
        let b1 = self.x_l * xi_map(self.eta[1])[0];
        params.c_stab * (ds * ds).min(b1 / (self.n - 1) as f64).min(1.0 / self.sup_rm())
    }

    /// `sup |a - b b_s|` with `b_s` by finite differences in `η`, over the active nodes.
    pub fn kahler_residual(&self) -> f64 {
        let h = self.h();
        let a = self.a();
        let b = self.b();
        let phi = self.phi_len();
        let m = b.len() - 1;
        let mut pad = Vec::with_capacity(m + 5);
        pad.extend_from_slice(&[-b[2], -b[1]]);
        pad.extend_from_slice(&b);
        pad.extend_from_slice(&[b[m - 1], b[m - 2]]);
        self.active().map(|j| (a[j] - b[j] * d1(&pad, j + 2, h) / phi[j]).abs()).fold(0.0, f64::max)
    }

    /// `|a'(0) - 1|` and, for a closed far end, `|a'(L) + 1|`, read off the first three interior
    /// nodes at each end by even extrapolation. The ends themselves are pinned, so this measures
    /// how smoothly the interior still meets them.
    pub fn closure_residual(&self) -> f64 {
        let m = self.cells();
        let end = |v1: f64, v2: f64, v3: f64| 1.5 * v1 - 0.6 * v2 + 0.1 * v3;
        let u = &self.u;
        let xi = |j: usize| xi_map(self.eta[j])[0];
        let tip = match self.far {
            FarEnd::Closed => end((1.0 - xi(1)) * u[1], (1.0 - xi(2)) * u[2], (1.0 - xi(3)) * u[3]),
            FarEnd::Frozen => end(u[1], u[2], u[3]),
        };
        let mut r = (tip - 1.0).abs();
        if self.far == FarEnd::Closed {
            let far = end(xi(m - 1) * u[m - 1], xi(m - 2) * u[m - 2], xi(m - 3) * u[m - 3]);
            r = r.max((far - 1.0).abs());
        }
        r
    }

    pub fn lambda_nodes(&self) -> Result<Vec<f64>> {
        self.jets().iter().map(|j| lambda_from_jet(j, self.n, LAMBDA_TOL)).collect()
    }

    pub fn min_lambda(&self) -> Result<f64> {
        Ok(self.lambda_nodes()?.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Volume `vol(S^{2n-5}) ∫ x^{n-2} dx/2`, in closed form.
    pub fn volume(&self) -> f64 {
        let m = self.n - 2;
        unit_sphere_volume::<f64>(m) * self.x_l.powi(m as i32 + 1) / (2.0 * (m + 1) as f64)
    }

    /// `∫ R dvol` by the trapezoidal rule in `η`, using `a ds = dx/2`; the integrand vanishes at
    /// both ends with `ξ_η`.
    pub fn total_scalar(&self) -> f64 {
        let m = self.n - 2;
        let h = self.h();
        let mut acc = 0.0;
        for (j, jet) in self.active().zip(self.jets()) {
            let (r, t) = CurvatureFrameData::from_jet(&jet).ricci(m);
            let [xi, xe, _] = xi_map(self.eta[j]);
            let x = self.x_l * xi;
            acc += (2.0 * r + 2.0 * m as f64 * t) * x.powi(m as i32) * 0.5 * self.x_l * xe * h;
        }
        unit_sphere_volume::<f64>(m) * acc
    }

    /// One Heun step of size `dt`.
    pub fn step(&mut self, dt: f64, params: &FlowParams) -> Result<()> {
        let bound = self.stable_dt(params);
        if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
            return Err(Error::StabilityViolation { dt, bound });
        }
        let v = self.dx_l();
        let active = self.active();
        let k1 = self.rhs(&self.u, self.x_l);
        let mut u1 = self.u.clone();
        for (j, k) in active.clone().zip(&k1) {
            u1[j] += dt * k;
        }
        let k2 = self.rhs(&u1, self.x_l + dt * v);
        let mut next = self.u.clone();
        for (j, (a, b)) in active.zip(k1.iter().zip(&k2)) {
            next[j] += 0.5 * dt * (a + b);
        }
        let x_l = self.x_l + dt * v;
        if let Some(j) = next.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::DegenerateProfile(format!("Θ ≤ 0 at η = {} after flow step {}", self.eta[j], self.steps + 1)));
        }
        if !(x_l > 0.0) {
            return Err(Error::DegenerateProfile(format!("the moment interval collapsed after flow step {}", self.steps + 1)));
        }
        self.u = next;
        self.x_l = x_l;
        self.t += dt;
        self.steps += 1;
        let residual = self.closure_residual();
        if !(residual <= params.tol_closure) {
            return Err(Error::ClosureLost { step: self.steps, residual });
        }
        Ok(())
    }

    /// Steps at the stability bound, shortened to land on `t_end`.
    pub fn advance_to(&mut self, t_end: f64, params: &FlowParams) -> Result<usize> {
        let mut taken = 0;
        while self.t < t_end {
            let dt = self.stable_dt(params).min(t_end - self.t);
            self.step(dt, params)?;
            taken += 1;
        }
        Ok(taken)
    }

    pub fn record(&self) -> Result<TraceRow> {
        let sup_rm = self.sup_rm();
        Ok(TraceRow {
            t: self.t,
            steps: self.steps,
            length: self.length(),
            min_lambda: self.min_lambda()?,
            sup_rm,
            sup_rm_t: sup_rm * self.t,
            vol: self.volume(),
            kahler: self.kahler_residual(),
            closure: self.closure_residual(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: f64,
    pub steps: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub min_lambda: f64,
    pub sup_rm: f64,
    pub sup_rm_t: f64,
    pub vol: f64,
    pub kahler: f64,
    pub closure: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct FlowTrace {
    pub rows: Vec<TraceRow>,
}

impl FlowTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,L,min_lambda,sup_rm_t,vol\n");
        for r in &self.rows {
            out.push_str(&format!("{:e},{:e},{:e},{:e},{:e}\n", r.t, r.length, r.min_lambda, r.sup_rm_t, r.vol));
        }
        out
    }

    /// Largest drop `max_{i<j} (λ_i - λ_j)` of the min-λ column.
    pub fn max_lambda_drop(&self) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut drop: f64 = 0.0;
        for r in &self.rows {
            best = best.max(r.min_lambda);
            drop = drop.max(best - r.min_lambda);
        }
        drop
    }

    pub fn max_kahler(&self) -> f64 {
        self.rows.iter().map(|r| r.kahler).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SmoothingParams {
    pub n: usize,
    pub k: f64,
    pub w: f64,
    pub t_end: f64,
    pub cells: usize,
    /// Trace rows are written every this many steps, and at `t_end`.
    pub record_every: usize,
    /// Start of the window where `min λ ≥ 1 - late_tol` is judged, in units of `w²`.
    pub t_min_over_w2: f64,
    pub late_tol: f64,
    /// Allowed drop of the min-λ trace.
    pub flow_tol: f64,
    /// Cap on `sup|Rm|·t` for the boundedness report.
    pub rm_t_cap: f64,
    pub flow: FlowParams,
}

impl SmoothingParams {
    pub fn new(k: f64, w: f64, t_end: f64) -> Self {
        SmoothingParams {
            n: 3,
            k,
            w,
            t_end,
            cells: 200,
            record_every: 100,
            t_min_over_w2: 10.0,
            late_tol: 1e-2,
            flow_tol: 1e-3,
            rm_t_cap: 10.0,
            flow: FlowParams::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothingReport {
    pub params: SmoothingParams,
    pub initial_length: f64,
    pub length_gap: f64,
    pub t_min: f64,
    /// Smallest `min λ` over trace rows with `t ≥ t_min`; `None` if the run ends before `t_min`.
    pub min_lambda_late: Option<f64>,
    /// Vacuously true when there are no late rows.
    pub lambda_ok: bool,
    pub max_lambda_drop: f64,
    pub monotone: bool,
    pub sup_rm_t_max: f64,
    pub rm_t_bounded: bool,
    pub kahler_ratio: f64,
    pub steps: usize,
    pub trace: FlowTrace,
    #[serde(skip)]
    pub state: FlowState,
}

/// Flows the mollified `h_k` to `t_end`, recording the trace.
pub fn run_smoothing(params: &SmoothingParams) -> Result<SmoothingReport> {
    if !(params.t_end > 0.0) || params.record_every == 0 {
        return Err(Error::BadConfig("t_end must be positive and record_every at least 1".into()));
    }
    let p = MollifiedHk::new(params.n, params.k, params.w)?;
    let mut st = FlowState::from_moment(params.n, p.x_l(), |x| p.big_theta(x), params.cells, FarEnd::Closed)?;
    let mut trace = FlowTrace::default();
    trace.rows.push(st.record()?);
    while st.t < params.t_end {
        let dt = st.stable_dt(&params.flow).min(params.t_end - st.t);
        st.step(dt, &params.flow)?;
        if st.steps % params.record_every == 0 || st.t >= params.t_end {
            trace.rows.push(st.record()?);
        }
    }
    let t_min = params.t_min_over_w2 * params.w * params.w;
    let min_lambda_late = trace.rows.iter().filter(|r| r.t >= t_min).map(|r| r.min_lambda).reduce(f64::min);
    let sup_rm_t_max = trace.rows.iter().map(|r| r.sup_rm_t).fold(0.0, f64::max);
    let drop = trace.max_lambda_drop();
    let initial_length = trace.rows[0].length;
    Ok(SmoothingReport {
        params: *params,
        initial_length,
        length_gap: (initial_length - std::f64::consts::FRAC_PI_2).abs(),
        t_min,
        min_lambda_late,
        lambda_ok: min_lambda_late.is_none_or(|v| v >= 1.0 - params.late_tol),
        max_lambda_drop: drop,
        monotone: drop <= params.flow_tol,
        sup_rm_t_max,
        rm_t_bounded: sup_rm_t_max <= params.rm_t_cap,
        kahler_ratio: trace.max_kahler() / st.initial_kahler,
        steps: st.steps,
        trace,
        state: st,
    })
}

/// Trace differences under halving the cell width: `‖T_N - T_2N‖` and `‖T_2N - T_4N‖` over the
/// `L` and min-λ columns at five common times, and their ratio.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RefinementStudy {
    pub coarse_gap: f64,
    pub fine_gap: f64,
    pub ratio: f64,
}

pub fn refinement_study(params: &SmoothingParams) -> Result<RefinementStudy> {
    let run = |cells: usize| -> Result<Vec<f64>> {
        let p = MollifiedHk::new(params.n, params.k, params.w)?;
        let mut st = FlowState::from_moment(params.n, p.x_l(), |x| p.big_theta(x), cells, FarEnd::Closed)?;
        let mut out = vec![st.length(), st.min_lambda()?];
        for q in 1..=4 {
            st.advance_to(params.t_end * q as f64 / 4.0, &params.flow)?;
            out.extend([st.length(), st.min_lambda()?]);
        }
        Ok(out)
    };
    let gap = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let t1 = run(params.cells)?;
    let t2 = run(2 * params.cells)?;
    let t4 = run(4 * params.cells)?;
    let coarse_gap = gap(&t1, &t2);
    let fine_gap = gap(&t2, &t4);
    Ok(RefinementStudy { coarse_gap, fine_gap, ratio: coarse_gap / fine_gap })
}
