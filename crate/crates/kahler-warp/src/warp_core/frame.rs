use serde::Serialize;

use crate::scalar::Real;
use crate::warp_core::profile::Jet;

/// Curvature coefficients of a Kähler warped profile in the adapted unitary frame.
///
/// `p = (1 - b'²)/b²`, `t = a²/(2b⁴)`, `hb = -b''/b`, `ha = -a''/(4a)`, `db = (b'/b)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvatureFrameData<T> {
    pub p: T,
    pub t: T,
    pub hb: T,
    pub ha: T,
    pub db: T,
}

impl<T: Real> CurvatureFrameData<T> {
    /// Valid where `a, b > 0`, i.e. on the open interval.
    pub fn from_jet(j: &Jet<T>) -> Self {
        let (a, a2) = (j.a[0], j.a[2]);
        let (b, b1, b2) = (j.b[0], j.b[1], j.b[2]);
        let bb = b * b;
        CurvatureFrameData {
            p: (T::one() - b1 * b1) / bb,
            t: a * a / (T::lit(2.0) * bb * bb),
            hb: -b2 / b,
            ha: -a2 / (T::lit(4.0) * a),
            db: b1 * b1 / bb,
        }
    }

    /// Largest coefficient magnitude; a cheap proxy for `|Rm|`.
    pub fn magnitude(&self) -> T {
        self.p.abs().max(self.t.abs()).max(self.hb.abs()).max(self.ha.abs()).max(self.db.abs())
    }

    /// Ricci eigenvalues `(ρ_radial, ρ_transverse)` from the complex trace of the frame tensor,
    /// where `m` is the transverse complex dimension. `Ric(e, e) = ρ` for unit `e`.
    pub fn ricci(&self, m: usize) -> (T, T) {
        let mm = T::from_usize_lossy(m);
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        let radial = four * self.ha + two * mm * self.hb;
        let transverse = two * (mm + T::one()) * self.p + two * self.hb + two * mm * self.db - four * mm * self.t;
        (radial, transverse)
    }
}
