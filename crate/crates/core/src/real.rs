use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar used by the numerical kernels: `f32` or `f64`.
pub trait Real:
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
    + 'static
{
    /// Converts an `f64` literal. Never fails for the two implementors.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite float converts to f64")
    }

    /// `log(1 + e^x)` without overflow for large `|x|`.
    #[inline]
    fn softplus(self) -> Self {
        self.max(Self::zero()) + (-self.abs()).exp().ln_1p()
    }

    /// `log(e^a + e^b)`.
    #[inline]
    fn log_add_exp(self, other: Self) -> Self {
        let (hi, lo) = if self >= other {
            (self, other)
        } else {
            (other, self)
        };
        if hi == Self::neg_infinity() {
            return hi;
        }
        hi + (lo - hi).exp().ln_1p()
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_matches_naive_in_safe_range() {
        for &x in &[-20.0f64, -1.0, 0.0, 0.5, 3.0, 30.0] {
            assert!((x.softplus() - (1.0 + x.exp()).ln()).abs() < 1e-12);
        }
        assert_eq!(1000.0f64.softplus(), 1000.0);
        assert!((-1000.0f64).softplus() >= 0.0);
    }

    #[test]
    fn log_add_exp_is_stable() {
        assert!((1000.0f64.log_add_exp(1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(
            f64::NEG_INFINITY.log_add_exp(f64::NEG_INFINITY),
            f64::NEG_INFINITY
        );
        assert!((0.0f32.log_add_exp(0.0) - 2f32.ln()).abs() < 1e-6);
    }
}
