//! Scalar abstractions.
//!
//! Polynomial and combinatorial code (Laguerre families, scaled-mode
//! eigenvalues) only needs field arithmetic and ordering, so it is generic
//! over [`Scalar`] and runs on `f32`, `f64` and exact rationals alike.
//! Linear algebra additionally needs [`Real`], i.e. a nalgebra `RealField`.

use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, ToPrimitive};

/// Ordered field element: floats or exact rationals.
pub trait Scalar:
    Clone + Debug + PartialOrd + Num + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
}

impl<T> Scalar for T where
    T: Clone + Debug + PartialOrd + Num + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
}

/// Floating point scalar usable with the dense eigensolvers.
pub trait Real: Scalar + nalgebra::RealField + Copy {}

impl<T> Real for T where T: Scalar + nalgebra::RealField + Copy {}

/// `|x|` using only the ordering.
pub fn abs<T: Scalar>(x: &T) -> T {
    if *x < T::zero() {
        T::zero() - x.clone()
    } else {
        x.clone()
    }
}

/// Converts an integer count, falling back to a two-limb construction for
/// types whose `from_u128` is not implemented.
pub fn from_u128<T: Scalar>(v: u128) -> T {
    if let Some(x) = T::from_u128(v) {
        return x;
    }
    let hi = (v >> 64) as u64;
    let lo = v as u64;
    let shift = T::from_u64(1 << 32).expect("2^32 representable");
    let base = shift.clone() * shift;
    T::from_u64(hi).expect("u64 representable") * base + T::from_u64(lo).expect("u64 representable")
}

pub fn from_usize<T: Scalar>(v: usize) -> T {
    T::from_usize(v).expect("usize representable")
}

/// Lossy constant injection, used for literals like `0.5` in generic code.
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("finite literal")
}

/// Default tolerance scaled to the precision of `T`: `base` for `f64`, and
/// proportionally looser for lower precision types.
pub fn tolerance<T: Real>(base: f64) -> T {
    let eps = T::default_epsilon();
    let eps64: T = lit(f64::EPSILON);
    let scaled = lit::<T>(base) * (eps / eps64);
    if scaled > lit(base) {
        scaled
    } else {
        lit(base)
    }
}

pub fn to_f64<T: Scalar>(x: &T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    #[test]
    fn abs_works_for_rationals() {
        let x = BigRational::new((-3).into(), 4.into());
        assert_eq!(abs(&x), BigRational::new(3.into(), 4.into()));
    }

    #[test]
    fn wide_integers_convert() {
        let v: u128 = (1u128 << 100) + 7;
        let x: BigRational = from_u128(v);
        assert_eq!(x.to_integer(), num_bigint::BigInt::from(v));
        let y: f64 = from_u128(v);
        assert!((y - v as f64).abs() <= 1.0);
    }

    #[test]
    fn tolerance_loosens_for_f32() {
        assert_eq!(tolerance::<f64>(1e-10), 1e-10);
        assert!(tolerance::<f32>(1e-10) > 1e-4);
    }
}
