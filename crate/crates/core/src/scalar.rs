//! Scalar abstractions.
//!
//! Numeric kernels are written against [`Real`] so they run in `f32` or `f64`.
//! Agreement kernels only need field arithmetic and are written against
//! [`Weight`], which additionally admits exact rationals.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, NumAssign, NumCast, ToPrimitive};

/// Floating point scalar used by the numeric kernels.
pub trait Real:
    Float + FromPrimitive + NumCast + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    fn erf(self) -> Self;

    #[inline]
    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("literal representable")
    }

    #[inline]
    fn count(n: usize) -> Self {
        <Self as NumCast>::from(n).expect("count representable")
    }
}

impl Real for f32 {
    #[inline]
    fn erf(self) -> Self {
        libm::erff(self)
    }
}

impl Real for f64 {
    #[inline]
    fn erf(self) -> Self {
        libm::erf(self)
    }
}

/// Field-like scalar for agreement tables and kappa.
pub trait Weight:
    num_traits::Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    fn ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num).expect("numerator") / Self::from_i64(den).expect("denominator")
    }
}

impl Weight for f32 {}
impl Weight for f64 {}
impl Weight for Ratio<i64> {
    fn ratio(num: i64, den: i64) -> Self {
        Ratio::new(num, den)
    }
}
impl Weight for Ratio<i128> {
    fn ratio(num: i64, den: i64) -> Self {
        Ratio::new(num as i128, den as i128)
    }
}
