//! Scalar abstraction for the timing math.
//!
//! Everything measured in milliseconds (tempo, onsets, tap intervals, key
//! scores) is generic over [`Scalar`], which is implemented for `f32` and
//! `f64`. The engine itself runs on `f64`; see the aliases at the crate root.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` literal. Literals used by this crate are always
    /// representable, so this never fails for the provided impls.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn count(v: u64) -> Self {
        <Self as FromPrimitive>::from_u64(v).expect("integer representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `floor(x + 0.5)`, i.e. round half up. `x` must be non-negative and finite.
#[inline]
pub(crate) fn round_half_up<T: Scalar>(x: T) -> u64 {
    (x + T::lit(0.5)).floor().to_u64().unwrap_or(0)
}
