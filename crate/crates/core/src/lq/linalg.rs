//! Fixed-size 2-vectors and 2x2 matrices.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2<T>(pub [T; 2]);

/// Row-major 2x2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat2<T>(pub [[T; 2]; 2]);

impl<T: Scalar> Vec2<T> {
    pub fn new(a: T, b: T) -> Self {
        Self([a, b])
    }

    pub fn zero() -> Self {
        Self([T::zero(); 2])
    }

    pub fn dot(self, o: Self) -> T {
        self.0[0] * o.0[0] + self.0[1] * o.0[1]
    }

    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    pub fn scale(self, k: T) -> Self {
        Self([self.0[0] * k, self.0[1] * k])
    }

    /// Outer product `self * o^T`.
    pub fn outer(self, o: Self) -> Mat2<T> {
        Mat2([[self.0[0] * o.0[0], self.0[0] * o.0[1]], [self.0[1] * o.0[0], self.0[1] * o.0[1]]])
    }
}

impl<T: Scalar> Mat2<T> {
    pub fn identity() -> Self {
        Self([[T::one(), T::zero()], [T::zero(), T::one()]])
    }

    pub fn zero() -> Self {
        Self([[T::zero(); 2]; 2])
    }

    pub fn transpose(self) -> Self {
        let m = self.0;
        Self([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn det(self) -> T {
        let m = self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Inverse, or `None` when the determinant is negligible relative to the
    /// entries.
    pub fn inverse(self) -> Option<Self> {
        let m = self.0;
        let d = self.det();
        let scale = m.iter().flatten().fold(T::zero(), |acc, v| acc.max(v.abs()));
        if !d.is_finite() || d.abs() <= T::epsilon() * scale * scale {
            return None;
        }
        Some(Self([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]))
    }

    pub fn scale(self, k: T) -> Self {
        let m = self.0;
        Self([[m[0][0] * k, m[0][1] * k], [m[1][0] * k, m[1][1] * k]])
    }

    pub fn mul_vec(self, v: Vec2<T>) -> Vec2<T> {
        let m = self.0;
        Vec2([m[0][0] * v.0[0] + m[0][1] * v.0[1], m[1][0] * v.0[0] + m[1][1] * v.0[1]])
    }

    /// `v^T * self`.
    pub fn left_mul(self, v: Vec2<T>) -> Vec2<T> {
        self.transpose().mul_vec(v)
    }

    pub fn pow(self, n: usize) -> Self {
        (0..n).fold(Self::identity(), |acc, _| acc * self)
    }
}

impl<T: Scalar> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        Self([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }
}

impl<T: Scalar> Add for Mat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        Self([[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]])
    }
}

impl<T: Scalar> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }
}

impl<T: Scalar> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self([self.0[0] - o.0[0], self.0[1] - o.0[1]])
    }
}

impl<T: Scalar> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self([-self.0[0], -self.0[1]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m = Mat2([[2.0, 1.0], [1.0, 3.0]]);
        let p = m * m.inverse().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((p.0[i][j] - Mat2::<f64>::identity().0[i][j]).abs() < 1e-15);
            }
        }
        assert!(Mat2([[1.0, 2.0], [2.0, 4.0]]).inverse().is_none());
    }

    #[test]
    fn products() {
        let m = Mat2([[1.0, 0.5], [0.0, 0.0]]);
        assert_eq!(m.mul_vec(Vec2::new(-1.0, 2.0)), Vec2::new(0.0, 0.0));
        assert_eq!(m.pow(0), Mat2::identity());
        assert_eq!(m.pow(2), m * m);
        assert_eq!(Vec2::new(1.0, 2.0).outer(Vec2::new(3.0, 4.0)).0, [[3.0, 4.0], [6.0, 8.0]]);
    }
}
