//! Scalar abstraction the whole crate is generic over.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar type usable everywhere in the crate.
///
/// `f64` and `f32` both implement this. The bound combines nalgebra's
/// `RealField` (decompositions, transcendentals) with the num-traits
/// conversions used to move tolerances and recorded metrics across the
/// `f64` boundary.
pub trait Scalar: RealField + Copy + FromPrimitive + ToPrimitive {}

impl<T> Scalar for T where T: RealField + Copy + FromPrimitive + ToPrimitive {}

/// Converts an `f64` constant into `T`. Panics only if `T` cannot represent
/// any nearby value, which no supported scalar does.
#[inline]
pub(crate) fn cv<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("scalar type must admit f64 constants")
}

/// Converts a `T` into `f64` for reporting.
#[inline]
pub(crate) fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().expect("scalar type must convert to f64")
}

/// Picks a numerical tolerance matching the scalar's precision: `wide` for
/// f64-class scalars, `narrow` for anything that rounds 1 + 1e-12 back to 1.
#[inline]
pub(crate) fn precision_tol<T: Scalar>(wide: f64, narrow: f64) -> T {
    if T::one() + cv::<T>(1e-12) > T::one() {
        cv(wide)
    } else {
        cv(narrow)
    }
}
