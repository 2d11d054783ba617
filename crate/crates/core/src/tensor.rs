//! Symmetric 2x2 tensors and symmetric linear maps acting on them.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric 2x2 tensor stored by its three independent entries.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 { xx: 0.0, yy: 0.0, xy: 0.0 };
    pub const IDENTITY: Sym2 = Sym2 { xx: 1.0, yy: 1.0, xy: 0.0 };

    pub const fn new(xx: f64, yy: f64, xy: f64) -> Self {
        Self { xx, yy, xy }
    }

    /// Double contraction `a : b`.
    #[inline]
    pub fn ddot(&self, other: &Sym2) -> f64 {
        self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn is_finite(&self) -> bool {
        self.xx.is_finite() && self.yy.is_finite() && self.xy.is_finite()
    }

    /// Mandel coordinates `[xx, yy, sqrt(2) xy]`, in which `:` is the Euclidean dot product.
    #[inline]
    pub fn to_mandel(self) -> [f64; 3] {
        [self.xx, self.yy, std::f64::consts::SQRT_2 * self.xy]
    }

    #[inline]
    pub fn from_mandel(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2] / std::f64::consts::SQRT_2)
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.yy + o.yy, self.xy + o.xy)
    }
}

impl AddAssign for Sym2 {
    fn add_assign(&mut self, o: Sym2) {
        self.xx += o.xx;
        self.yy += o.yy;
        self.xy += o.xy;
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx - o.xx, self.yy - o.yy, self.xy - o.xy)
    }
}

impl Neg for Sym2 {
    type Output = Sym2;
    fn neg(self) -> Sym2 {
        Sym2::new(-self.xx, -self.yy, -self.xy)
    }
}

impl Mul<Sym2> for f64 {
    type Output = Sym2;
    fn mul(self, t: Sym2) -> Sym2 {
        Sym2::new(self * t.xx, self * t.yy, self * t.xy)
    }
}

/// Linear map on symmetric 2x2 tensors, represented as a 3x3 matrix in
/// Mandel coordinates. Symmetric with respect to `:` iff the matrix is symmetric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymMap {
    pub m: [[f64; 3]; 3],
}

impl SymMap {
    pub fn identity() -> Self {
        Self::scaled_identity(1.0)
    }

    pub fn scaled_identity(s: f64) -> Self {
        Self { m: [[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, s]] }
    }

    /// Isotropic stiffness `C e = lambda tr(e) I + 2 mu e`.
    pub fn isotropic(lambda: f64, mu: f64) -> Self {
        Self {
            m: [
                [lambda + 2.0 * mu, lambda, 0.0],
                [lambda, lambda + 2.0 * mu, 0.0],
                [0.0, 0.0, 2.0 * mu],
            ],
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = self.m;
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        Self { m }
    }

    #[inline]
    pub fn apply(&self, e: &Sym2) -> Sym2 {
        let v = e.to_mandel();
        let m = &self.m;
        Sym2::from_mandel([
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ])
    }

    pub fn is_symmetric(&self) -> bool {
        let m = &self.m;
        let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        let tol = 1e-12 * scale;
        (m[0][1] - m[1][0]).abs() <= tol
            && (m[0][2] - m[2][0]).abs() <= tol
            && (m[1][2] - m[2][1]).abs() <= tol
    }

    /// Sylvester's criterion on the leading principal minors.
    pub fn is_positive_definite(&self) -> bool {
        let m = &self.m;
        let d1 = m[0][0];
        let d2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let d3 = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        d1 > 0.0 && d2 > 0.0 && d3 > 0.0
    }

    pub fn require_spd(&self, what: &str) -> Result<()> {
        if !self.is_symmetric() {
            return Err(Error::InvalidMaterial(format!("{what} is not symmetric")));
        }
        if !self.is_positive_definite() {
            return Err(Error::InvalidMaterial(format!("{what} is not positive definite")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_shear_response() {
        let c = SymMap::isotropic(1.0, 1.0);
        let s = c.apply(&Sym2::new(0.0, 0.0, 0.5));
        assert!((s.xy - 1.0).abs() < 1e-15);
        assert!(s.xx.abs() < 1e-15 && s.yy.abs() < 1e-15);
        let v = c.apply(&Sym2::IDENTITY);
        assert!((v.xx - 4.0).abs() < 1e-15 && (v.yy - 4.0).abs() < 1e-15);
    }

    #[test]
    fn mandel_roundtrip_preserves_ddot() {
        let a = Sym2::new(0.3, -1.2, 0.7);
        let b = Sym2::new(2.0, 0.5, -0.4);
        let (va, vb) = (a.to_mandel(), b.to_mandel());
        let dot: f64 = va.iter().zip(vb.iter()).map(|(x, y)| x * y).sum();
        assert!((dot - a.ddot(&b)).abs() < 1e-14);
        assert_eq!(Sym2::from_mandel(va), a);
    }

    #[test]
    fn definiteness_checks() {
        assert!(SymMap::isotropic(1.0, 1.0).is_positive_definite());
        assert!(!SymMap::scaled_identity(-1.0).is_positive_definite());
        let mut m = SymMap::identity();
        m.m[0][1] = 0.5;
        assert!(!m.is_symmetric());
    }
}
