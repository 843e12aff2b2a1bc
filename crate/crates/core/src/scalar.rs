use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used for volumes, cuts, entropies and kernel values.
///
/// Implemented for `f32` and `f64`. Everything numeric in the crate is generic
/// over this trait; the crate root exports `f64` aliases for the common case.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from `f64`, used for literals and tolerances.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(v: usize) -> Self {
        Self::from_usize(v).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Total order for priority keys; NaN sorts last.
    #[inline]
    fn total_cmp_s(&self, other: &Self) -> std::cmp::Ordering {
        self.as_f64().total_cmp(&other.as_f64())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `-x * log2(ratio)` with the convention that a zero weight contributes zero
/// regardless of the ratio.
#[inline]
pub(crate) fn weighted_neg_log2<S: Scalar>(weight: S, ratio: S) -> S {
    if weight == S::zero() {
        S::zero()
    } else {
        -weight * ratio.log2()
    }
}
