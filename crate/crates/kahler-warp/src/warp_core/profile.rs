//! Warped profiles `g = ds² + a(s)² η² + b(s)² gᵀ` on `[0, L]`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::hermite::{septic, Jet4};
use crate::scalar::Real;

/// Values and first three derivatives of both warping functions at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Jet<T> {
    pub a: [T; 4],
    pub b: [T; 4],
}

impl<T: Real> Jet<T> {
    /// Residual of `a = b b'`.
    pub fn kahler_residual(&self) -> T {
        (self.a[0] - self.b[0] * self.b[1]).abs()
    }

    /// Jet of the homothetic profile `c a(s / c)`, `c b(s / c)`.
    pub fn scaled(&self, c: T) -> Jet<T> {
        let mut out = *self;
        let mut f = c;
        for k in 0..4 {
            out.a[k] = self.a[k] * f;
            out.b[k] = self.b[k] * f;
            f = f / c;
        }
        out
    }
}

/// A profile on the complex `(n-1)`-manifold whose principal orbits are `S^{2n-3}`.
///
/// `n` is therefore one more than the complex dimension; the transverse
/// (horizontal) block has complex dimension `n - 2`.
pub trait WarpProfile<T: Real> {
    fn n(&self) -> usize;

    fn length(&self) -> T;

    fn jet(&self, s: T) -> Result<Jet<T>>;

    /// Whether the profile is stored on nodes (selects the looser Kähler tolerance).
    fn is_sampled(&self) -> bool {
        false
    }

    /// Interior points used by certification and norms.
    fn sample_points(&self, count: usize) -> Vec<T> {
        uniform_interior(self.length(), count)
    }

    fn check_domain(&self, s: T) -> Result<()> {
        let len = self.length();
        let slack = T::epsilon() * T::lit(64.0) * (T::one() + len);
        if !(s >= -slack && s <= len + slack) {
            return Err(Error::OutOfDomain { s: s.as_f64(), len: len.as_f64() });
        }
        Ok(())
    }
}

pub(crate) fn uniform_interior<T: Real>(len: T, count: usize) -> Vec<T> {
    let m = T::from_usize_lossy(count + 1);
    (1..=count).map(|j| len * T::from_usize_lossy(j) / m).collect()
}

impl<T: Real, P: WarpProfile<T> + ?Sized> WarpProfile<T> for &P {
    fn n(&self) -> usize {
        (**self).n()
    }
    fn length(&self) -> T {
        (**self).length()
    }
    fn jet(&self, s: T) -> Result<Jet<T>> {
        (**self).jet(s)
    }
    fn is_sampled(&self) -> bool {
        (**self).is_sampled()
    }
    fn sample_points(&self, count: usize) -> Vec<T> {
        (**self).sample_points(count)
    }
}

fn sin_jet<T: Real>(w: T, s: T, amp: T) -> [T; 4] {
    let (sn, cs) = (w * s).sin_cos();
    [amp * sn, amp * w * cs, -amp * w * w * sn, -amp * w * w * w * cs]
}

/// Half the Fubini–Study metric: holomorphic sectional curvature 4.
#[derive(Debug, Clone, Copy)]
pub struct HalfFubiniStudy {
    pub n: usize,
}

impl<T: Real> WarpProfile<T> for HalfFubiniStudy {
    fn n(&self) -> usize {
        self.n
    }
    fn length(&self) -> T {
        T::FRAC_PI_2()
    }
    fn jet(&self, s: T) -> Result<Jet<T>> {
        WarpProfile::<T>::check_domain(self, s)?;
        Ok(Jet { a: sin_jet(T::lit(2.0), s, T::lit(0.5)), b: sin_jet(T::one(), s, T::one()) })
    }
}

/// The model `h_k`: `a = sin(2s)/(2k)`, `b = sin(s)/√k`, with cone singularities at both ends.
#[derive(Debug, Clone, Copy)]
pub struct ModelHk<T> {
    pub n: usize,
    pub k: T,
}

impl<T: Real> WarpProfile<T> for ModelHk<T> {
    fn n(&self) -> usize {
        self.n
    }
    fn length(&self) -> T {
        T::FRAC_PI_2()
    }
    fn jet(&self, s: T) -> Result<Jet<T>> {
        self.check_domain(s)?;
        let two = T::lit(2.0);
        Ok(Jet { a: sin_jet(two, s, T::one() / (two * self.k)), b: sin_jet(T::one(), s, T::one() / self.k.sqrt()) })
    }
}

/// Flat `ℂ^{n-1}`: `a = b = s` on `[0, len]`.
#[derive(Debug, Clone, Copy)]
pub struct FlatCone<T> {
    pub n: usize,
    pub len: T,
}

impl<T: Real> WarpProfile<T> for FlatCone<T> {
    fn n(&self) -> usize {
        self.n
    }
    fn length(&self) -> T {
        self.len
    }
    fn jet(&self, s: T) -> Result<Jet<T>> {
        self.check_domain(s)?;
        let z = T::zero();
        let j = [s, T::one(), z, z];
        Ok(Jet { a: j, b: j })
    }
}

/// The metric `c² g`, realised as `s ↦ c a(s/c)`, `c b(s/c)` on `[0, c L]`.
#[derive(Debug, Clone, Copy)]
pub struct Scaled<P, T> {
    pub inner: P,
    pub c: T,
}

impl<T: Real, P: WarpProfile<T>> WarpProfile<T> for Scaled<P, T> {
    fn n(&self) -> usize {
        self.inner.n()
    }
    fn length(&self) -> T {
        self.c * self.inner.length()
    }
    fn jet(&self, s: T) -> Result<Jet<T>> {
        self.check_domain(s)?;
        let inner_s = (s / self.c).max(T::zero()).min(self.inner.length());
        Ok(self.inner.jet(inner_s)?.scaled(self.c))
    }
    fn is_sampled(&self) -> bool {
        self.inner.is_sampled()
    }
    fn sample_points(&self, count: usize) -> Vec<T> {
        self.inner.sample_points(count).into_iter().map(|s| s * self.c).collect()
    }
}

/// Profile stored as node jets with septic Hermite interpolation between nodes.
#[derive(Debug, Clone, Serialize)]
pub struct SampledProfile<T> {
    pub n: usize,
    pub s: Vec<T>,
    pub a: Vec<Jet4<T>>,
    pub b: Vec<Jet4<T>>,
}

impl<T: Real> SampledProfile<T> {
    /// Nodes must be strictly increasing and start at `0`.
    pub fn new(n: usize, s: Vec<T>, a: Vec<Jet4<T>>, b: Vec<Jet4<T>>) -> Result<Self> {
        if s.len() < 2 || s.len() != a.len() || s.len() != b.len() {
            return Err(Error::BadConfig("sampled profile needs matching node arrays of length >= 2".into()));
        }
        if s[0] != T::zero() || s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::BadConfig("sampled profile nodes must start at 0 and increase".into()));
        }
        Ok(SampledProfile { n, s, a, b })
    }

    /// Samples any profile on the given nodes.
    pub fn from_profile<P: WarpProfile<T>>(p: &P, nodes: Vec<T>) -> Result<Self> {
        let mut a = Vec::with_capacity(nodes.len());
        let mut b = Vec::with_capacity(nodes.len());
        for &s in &nodes {
            let j = p.jet(s)?;
            a.push(j.a);
            b.push(j.b);
        }
        Self::new(p.n(), nodes, a, b)
    }

    pub fn node_jet(&self, i: usize) -> Jet<T> {
        Jet { a: self.a[i], b: self.b[i] }
    }

    pub fn len_nodes(&self) -> usize {
        self.s.len()
    }

    fn locate(&self, s: T) -> usize {
        let k = self.s.partition_point(|&x| x <= s);
        k.clamp(1, self.s.len() - 1) - 1
    }
}

impl<T: Real> WarpProfile<T> for SampledProfile<T> {
    fn n(&self) -> usize {
        self.n
    }
    fn length(&self) -> T {
        *self.s.last().expect("non-empty")
    }
    fn jet(&self, s: T) -> Result<Jet<T>> {
        self.check_domain(s)?;
        let s = s.max(T::zero()).min(self.length());
        let i = self.locate(s);
        if s == self.s[i] {
            return Ok(self.node_jet(i));
        }
        if s == self.s[i + 1] {
            return Ok(self.node_jet(i + 1));
        }
        let (x0, x1) = (self.s[i], self.s[i + 1]);
        Ok(Jet { a: septic(x0, x1, &self.a[i], &self.a[i + 1], s), b: septic(x0, x1, &self.b[i], &self.b[i + 1], s) })
    }
    fn is_sampled(&self) -> bool {
        true
    }
    fn sample_points(&self, count: usize) -> Vec<T> {
        let inner = &self.s[1..self.s.len() - 1];
        if inner.len() >= count || count == 0 {
            return inner.to_vec();
        }
        // nodes plus evenly spread midpoints
        let per = count.div_ceil(inner.len().max(1) + 1);
        let mut out = Vec::with_capacity(inner.len() * (per + 1));
        for w in self.s.windows(2) {
            for j in 0..per {
                let t = T::from_usize_lossy(j) / T::from_usize_lossy(per);
                let x = w[0] + (w[1] - w[0]) * t;
                if x > T::zero() {
                    out.push(x);
                }
            }
        }
        out
    }
}
