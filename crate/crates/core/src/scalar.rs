//! Scalar abstraction shared by every numerical module.
//!
//! All solvers are written against [`Scalar`] so the same code runs in
//! `f64` (the default used by the CLI and acceptance suite) or `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type usable by the solvers: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar type")
    }

    /// Conversion from a count or index.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Comparison slack used when deciding ties between payoffs.
    fn tie_tolerance() -> Self;
}

impl Scalar for f64 {
    fn tie_tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn tie_tolerance() -> Self {
        1e-4
    }
}

/// `-1`, `0` or `+1`, with `sign(0) = 0`.
pub fn sign<T: Scalar>(value: T) -> T {
    if value > T::zero() {
        T::one()
    } else if value < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// True when `a` is larger than `b` by more than the scalar's tie tolerance,
/// measured relative to the magnitudes involved.
pub fn strictly_greater<T: Scalar>(a: T, b: T) -> bool {
    let scale = T::one().max(a.abs()).max(b.abs());
    a - b > T::tie_tolerance() * scale
}

/// True when `a` and `b` are equal up to the tie tolerance.
pub fn ties<T: Scalar>(a: T, b: T) -> bool {
    !strictly_greater(a, b) && !strictly_greater(b, a)
}
