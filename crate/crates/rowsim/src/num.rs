//! Scalar abstraction for the real-valued parts of the simulator.
//!
//! Counters, addresses and cycle counts are integer state; everything that is
//! genuinely real-valued (energy accounting, derived metrics, probability
//! mappings) is written against this trait so it works for `f32` and `f64`
//! alike. The crate root exports [`crate::Real`] as the concrete alias the
//! simulator itself runs on.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + core::ops::AddAssign + core::fmt::Debug + core::fmt::Display + 'static
{
    /// Lossless-enough conversion from an event count.
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Ratio of two counts, `zero` when the denominator is zero.
pub fn ratio<S: Scalar>(num: u64, den: u64) -> S {
    if den == 0 {
        S::zero()
    } else {
        S::from_count(num) / S::from_count(den)
    }
}

/// `count / (instructions / 1000)`: the per-kilo-instruction rate used by
/// the activation and read metrics.
pub fn per_kilo<S: Scalar>(count: u64, instructions: u64) -> S {
    let thousand = S::from_count(1000);
    ratio::<S>(count, instructions) * thousand
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_handles_zero_denominator() {
        assert_eq!(ratio::<f64>(5, 0), 0.0);
        assert_eq!(ratio::<f32>(1, 2), 0.5);
    }

    #[test]
    fn per_kilo_matches_definition() {
        assert_eq!(per_kilo::<f64>(10, 1000), 10.0);
        assert_eq!(per_kilo::<f64>(0, 123), 0.0);
        assert_eq!(per_kilo::<f32>(3, 2000), 1.5);
    }
}
