//! Full curvature tensor `R_{αβ̄γδ̄}` in the adapted unitary frame, and eigenvalue read-outs.
//!
//! Indices `0..dim-1` are horizontal; index `dim-1` is the radial/fibre direction.
//! The metric is `g_{αβ̄} = ½ δ_{αβ}`.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::warp_core::frame::CurvatureFrameData;
use crate::warp_core::profile::WarpProfile;

#[derive(Debug, Clone)]
pub struct CurvatureTensor {
    pub dim: usize,
    data: Vec<f64>,
}

impl CurvatureTensor {
    pub fn at<P: WarpProfile<f64>>(p: &P, s: f64) -> Result<Self> {
        let f = CurvatureFrameData::from_jet(&p.jet(s)?);
        Ok(Self::from_frame(&f, p.n() - 1))
    }

    pub fn from_frame(f: &CurvatureFrameData<f64>, dim: usize) -> Self {
        let r = dim - 1;
        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let mut data = vec![0.0; dim.pow(4)];
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    for e in 0..dim {
                        let radial = [a, b, c, e].iter().filter(|&&i| i == r).count();
                        // value of -R
                        let v = match radial {
                            0 => {
                                0.5 * (f.p + f.db) * (d(a, b) * d(c, e) + d(a, e) * d(b, c))
                                    - 0.5 * f.db * d(a, e) * d(b, c)
                                    - f.t * d(a, b) * d(c, e)
                            }
                            4 => f.ha,
                            2 => {
                                let unbarred = (a == r) as u8 + (c == r) as u8;
                                let barred = (b == r) as u8 + (e == r) as u8;
                                if unbarred == 1 && barred == 1 {
                                    let u = if a == r { c } else { a };
                                    let w = if b == r { e } else { b };
                                    if u == w {
                                        0.5 * f.hb
                                    } else {
                                        0.0
                                    }
                                } else {
                                    0.0
                                }
                            }
                            _ => 0.0,
                        };
                        data[((a * dim + b) * dim + c) * dim + e] = -v;
                    }
                }
            }
        }
        CurvatureTensor { dim, data }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, e: usize) -> f64 {
        let n = self.dim;
        self.data[((a * n + b) * n + c) * n + e]
    }

    /// Largest violation of the Kähler curvature symmetries.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for e in 0..n {
                        let v = self.get(a, b, c, e);
                        worst = worst
                            .max((v - self.get(c, b, a, e)).abs())
                            .max((v - self.get(a, e, c, b)).abs())
                            .max((v - self.get(b, a, e, c)).abs());
                    }
                }
            }
        }
        worst
    }

    /// `R(x, ȳ, z, w̄)` for complex vectors.
    pub fn eval(&self, x: &[Complex<f64>], y: &[Complex<f64>], z: &[Complex<f64>], w: &[Complex<f64>]) -> Complex<f64> {
        let n = self.dim;
        let mut acc = Complex::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for e in 0..n {
                        let r = self.get(a, b, c, e);
                        if r != 0.0 {
                            acc += x[a] * y[b].conj() * z[c] * w[e].conj() * r;
                        }
                    }
                }
            }
        }
        acc
    }

    /// Normalised bisectional curvature `-R(v, v̄, w, w̄) / ((gg + gg) v v̄ w w̄)`; at least `2 λ`.
    pub fn bisectional_ratio(&self, v: &[Complex<f64>], w: &[Complex<f64>]) -> f64 {
        let num = -self.eval(v, v, w, w).re;
        let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let ww: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        let vw: Complex<f64> = v.iter().zip(w).map(|(a, b)| a * b.conj()).sum();
        num / (0.25 * (vv * ww + vw.norm_sqr()))
    }

    /// Sectional curvature of `span(X, Y)` given real coordinates in `(e_α, J e_α)` pairs.
    pub fn sectional(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim;
        let cx: Vec<Complex<f64>> = (0..n).map(|a| Complex::new(x[2 * a], x[2 * a + 1])).collect();
        let cy: Vec<Complex<f64>> = (0..n).map(|a| Complex::new(y[2 * a], y[2 * a + 1])).collect();
        let num = 2.0 * (self.eval(&cx, &cy, &cx, &cy) - self.eval(&cx, &cy, &cy, &cx)).re;
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let yy: f64 = y.iter().map(|v| v * v).sum();
        let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        num / (xx * yy - xy * xy)
    }

    /// `ρ_α = Σ_γ 4 (-R_{αᾱγγ̄})`.
    pub fn ricci_diag(&self) -> Vec<f64> {
        (0..self.dim).map(|a| (0..self.dim).map(|c| -4.0 * self.get(a, a, c, c)).sum()).collect()
    }

    /// Real orthonormal basis of hermitian matrices, as sparse `(row, col, value)` lists.
    fn hermitian_basis(&self) -> Vec<Vec<(usize, usize, Complex<f64>)>> {
        let n = self.dim;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut basis = Vec::with_capacity(n * n);
        for a in 0..n {
            basis.push(vec![(a, a, Complex::new(1.0, 0.0))]);
        }
        for a in 0..n {
            for b in a + 1..n {
                basis.push(vec![(a, b, Complex::new(h, 0.0)), (b, a, Complex::new(h, 0.0))]);
                basis.push(vec![(a, b, Complex::new(0.0, h)), (b, a, Complex::new(0.0, -h))]);
            }
        }
        basis
    }

    /// Gram matrices of `u ↦ -R_{αβ̄γδ̄} u^{αβ̄} u^{γδ̄}` and of `u ↦ ½ (δδ + δδ) u u`.
    pub fn quadratic_forms(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        self.forms_with(|t, a, b, c, e| -t.get(a, b, c, e))
    }

    fn forms_with<F: Fn(&Self, usize, usize, usize, usize) -> f64>(&self, kernel: F) -> (DMatrix<f64>, DMatrix<f64>) {
        let basis = self.hermitian_basis();
        let k = basis.len();
        let d = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let mut q = DMatrix::zeros(k, k);
        let mut g = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let mut qv = Complex::new(0.0, 0.0);
                let mut gv = Complex::new(0.0, 0.0);
                for &(a, b, u) in &basis[i] {
                    for &(c, e, w) in &basis[j] {
                        qv += u * w * kernel(self, a, b, c, e);
                        gv += u * w * (0.5 * (d(a, b) * d(c, e) + d(a, e) * d(b, c)));
                    }
                }
                q[(i, j)] = qv.re;
                q[(j, i)] = qv.re;
                g[(i, j)] = gv.re;
                g[(j, i)] = gv.re;
            }
        }
        (q, g)
    }

    /// Smallest `μ` with `Q - μ G` singular: the optimal `λ` from the full tensor.
    pub fn min_pencil_eigenvalue(&self) -> Result<f64> {
        let (q, g) = self.quadratic_forms();
        min_generalized_eigenvalue(q, g)
    }

    /// Cone-side transverse form at unit radius: `Q - G`, compared against `G`.
    pub fn cone_min_eigenvalue(&self) -> Result<f64> {
        let (q, g) = self.quadratic_forms();
        min_generalized_eigenvalue(q - &g, g)
    }
}

/// Smallest eigenvalue of the symmetric pencil `(q, g)` with `g` positive definite.
pub fn min_generalized_eigenvalue(q: DMatrix<f64>, g: DMatrix<f64>) -> Result<f64> {
    let chol = g.cholesky().ok_or(Error::NonConvergence { what: "Cholesky of the norm form", iters: 0 })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(Error::NonConvergence { what: "triangular inverse", iters: 0 })?;
    let c = &linv * q * linv.transpose();
    let sym = (&c + c.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
}
