//! Scalar abstractions shared by the scoring code.
//!
//! Every score in this crate (normalized BM25, referability, fact likelihood,
//! Jaccard indices) is computed with field operations only, so those routines
//! are generic over [`Scalar`] and can be evaluated in `f32`, `f64` or exactly
//! in [`num::BigRational`]. Routines that need `ln` or `sqrt` (BM25 IDF, cosine)
//! require [`Real`].

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Ordered field element usable as a score.
pub trait Scalar:
    Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// Lossy conversion used for literals such as `0.5` or `1.2`.
    ///
    /// Panics only if the target type cannot represent a finite `f64`,
    /// which does not happen for the floating and rational types we use.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("scalar type cannot represent literal")
    }

    fn from_count(value: usize) -> Self {
        Self::from_usize(value).expect("scalar type cannot represent count")
    }

    fn as_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
}

/// Floating-point scalar (`f32` / `f64`).
pub trait Real: Scalar + Float {}

impl<T: Scalar + Float> Real for T {}

/// Larger of two partially ordered values; `a` wins ties and incomparable pairs.
pub(crate) fn max_of<S: Scalar>(a: S, b: S) -> S {
    if b > a {
        b
    } else {
        a
    }
}

pub(crate) fn min_of<S: Scalar>(a: S, b: S) -> S {
    if b < a {
        b
    } else {
        a
    }
}

/// Clamp into `[lo, hi]`.
pub(crate) fn clamp<S: Scalar>(value: S, lo: S, hi: S) -> S {
    min_of(max_of(value, lo), hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigRational;

    #[test]
    fn literals_round_trip_through_rationals() {
        let half = BigRational::lit(0.5);
        assert_eq!(half.as_f64(), 0.5);
        assert_eq!(f32::lit(1.2), 1.2f32);
    }

    #[test]
    fn clamp_is_total() {
        assert_eq!(clamp(-0.2, 0.0, 1.0), 0.0);
        assert_eq!(clamp(1.7, 0.0, 1.0), 1.0);
        assert_eq!(clamp(0.3, 0.0, 1.0), 0.3);
    }
}
