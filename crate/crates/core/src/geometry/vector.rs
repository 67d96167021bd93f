//! Small fixed-size vectors.
//!
//! Planar scenes live in the `z = 0` plane of a three-component vector, so
//! every operation here is dimension agnostic as long as the third
//! component of planar data stays zero. The owning [`Scene`](super::Scene)
//! records the dimension and checks it at construction.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Tolerance on `| |v| - 1 |` accepted for a unit vector.
pub const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vector(pub [f64; 3]);

impl Vector {
    pub const ZERO: Vector = Vector([0.0; 3]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vector([x, y, z])
    }

    pub const fn planar(x: f64, y: f64) -> Self {
        Vector([x, y, 0.0])
    }

    /// Builds a vector from a slice of length 2 or 3.
    pub fn from_slice(components: &[f64]) -> Result<Self> {
        let v = match *components {
            [x, y] => Vector::planar(x, y),
            [x, y, z] => Vector::new(x, y, z),
            _ => {
                return Err(Error::Dimension(format!(
                    "expected 2 or 3 components, got {}",
                    components.len()
                )))
            }
        };
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "non-finite vector {components:?}"
            )));
        }
        Ok(v)
    }

    /// Leading `dimension` components.
    pub fn to_vec(self, dimension: usize) -> Vec<f64> {
        self.0[..dimension].to_vec()
    }

    #[inline]
    pub fn x(self) -> f64 {
        self.0[0]
    }

    #[inline]
    pub fn y(self) -> f64 {
        self.0[1]
    }

    #[inline]
    pub fn z(self) -> f64 {
        self.0[2]
    }

    #[inline]
    pub fn dot(self, other: Vector) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance(self, other: Vector) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Component-wise product.
    #[inline]
    pub fn hadamard(self, other: Vector) -> Vector {
        Vector([
            self.0[0] * other.0[0],
            self.0[1] * other.0[1],
            self.0[2] * other.0[2],
        ])
    }

    pub fn cross(self, other: Vector) -> Vector {
        let [a1, a2, a3] = self.0;
        let [b1, b2, b3] = other.0;
        Vector([a2 * b3 - a3 * b2, a3 * b1 - a1 * b3, a1 * b2 - a2 * b1])
    }

    pub fn is_planar(self) -> bool {
        self.0[2] == 0.0
    }

    pub fn max_abs_diff(self, other: Vector) -> f64 {
        (0..3)
            .map(|i| (self.0[i] - other.0[i]).abs())
            .fold(0.0, f64::max)
    }
}

impl Add for Vector {
    type Output = Vector;
    #[inline]
    fn add(self, rhs: Vector) -> Vector {
        Vector([
            self.0[0] + rhs.0[0],
            self.0[1] + rhs.0[1],
            self.0[2] + rhs.0[2],
        ])
    }
}

impl AddAssign for Vector {
    #[inline]
    fn add_assign(&mut self, rhs: Vector) {
        *self = *self + rhs;
    }
}

impl Sub for Vector {
    type Output = Vector;
    #[inline]
    fn sub(self, rhs: Vector) -> Vector {
        Vector([
            self.0[0] - rhs.0[0],
            self.0[1] - rhs.0[1],
            self.0[2] - rhs.0[2],
        ])
    }
}

impl SubAssign for Vector {
    #[inline]
    fn sub_assign(&mut self, rhs: Vector) {
        *self = *self - rhs;
    }
}

impl Mul<f64> for Vector {
    type Output = Vector;
    #[inline]
    fn mul(self, s: f64) -> Vector {
        Vector([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

impl Mul<Vector> for f64 {
    type Output = Vector;
    #[inline]
    fn mul(self, v: Vector) -> Vector {
        v * self
    }
}

impl Div<f64> for Vector {
    type Output = Vector;
    #[inline]
    fn div(self, s: f64) -> Vector {
        Vector([self.0[0] / s, self.0[1] / s, self.0[2] / s])
    }
}

impl Neg for Vector {
    type Output = Vector;
    #[inline]
    fn neg(self) -> Vector {
        Vector([-self.0[0], -self.0[1], -self.0[2]])
    }
}

/// A direction on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector(Vector);

impl UnitVector {
    /// Normalizes `v`; fails for zero or non-finite input.
    pub fn new(v: Vector) -> Result<Self> {
        let n = v.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cannot normalize {:?}",
                v.0
            )));
        }
        Ok(UnitVector(v / n))
    }

    /// Wraps a vector the caller knows to be of unit length, renormalizing
    /// away rounding drift.
    #[inline]
    pub fn renormalized(v: Vector) -> Self {
        UnitVector(v / v.norm())
    }

    /// Accepts only vectors already within [`UNIT_TOLERANCE`] of unit length.
    pub fn checked(v: Vector) -> Result<Self> {
        let n = v.norm();
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "|v| = {n} is not a unit vector"
            )));
        }
        Ok(UnitVector(v))
    }

    pub const fn planar_x() -> Self {
        UnitVector(Vector::planar(1.0, 0.0))
    }

    #[inline]
    pub fn get(self) -> Vector {
        self.0
    }

    #[inline]
    pub fn dot(self, other: Vector) -> f64 {
        self.0.dot(other)
    }
}

impl Neg for UnitVector {
    type Output = UnitVector;
    fn neg(self) -> UnitVector {
        UnitVector(-self.0)
    }
}

impl From<UnitVector> for Vector {
    fn from(u: UnitVector) -> Vector {
        u.0
    }
}

/// Orthonormal pair completing `n` to a right-handed basis.
pub fn orthonormal_basis(n: Vector) -> (Vector, Vector) {
    // Duff et al., branchless ONB.
    let sign = 1.0f64.copysign(n.z());
    let a = -1.0 / (sign + n.z());
    let b = n.x() * n.y() * a;
    let t = Vector::new(1.0 + sign * n.x() * n.x() * a, sign * b, -sign * n.x());
    let s = Vector::new(b, sign + n.y() * n.y() * a, -n.y());
    (t, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_lengths() {
        assert_eq!(
            Vector::from_slice(&[1.0, 2.0]).unwrap(),
            Vector::planar(1.0, 2.0)
        );
        assert!(Vector::from_slice(&[1.0]).is_err());
        assert!(Vector::from_slice(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn unit_vector_rejects_zero() {
        assert!(UnitVector::new(Vector::ZERO).is_err());
        assert!(UnitVector::checked(Vector::planar(1.0, 1.0)).is_err());
        let u = UnitVector::new(Vector::planar(3.0, 4.0)).unwrap();
        assert!((u.get().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn basis_is_orthonormal() {
        for n in [
            Vector::new(0.0, 0.0, 1.0),
            Vector::new(0.0, 0.0, -1.0),
            UnitVector::new(Vector::new(1.0, 2.0, -3.0)).unwrap().get(),
        ] {
            let (t, s) = orthonormal_basis(n);
            assert!((t.norm() - 1.0).abs() < 1e-12);
            assert!((s.norm() - 1.0).abs() < 1e-12);
            assert!(t.dot(s).abs() < 1e-12);
            assert!(t.dot(n).abs() < 1e-12);
            assert!(s.dot(n).abs() < 1e-12);
        }
    }
}
