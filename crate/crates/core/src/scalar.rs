//! Scalar abstractions.
//!
//! Networks, estimators and the sampled statistics are written against
//! [`Scalar`] (`f32` or `f64`). The closed-form moment formulas only need
//! field arithmetic, so they accept any [`Exact`] type, which includes
//! rational numbers.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, Num, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; used for random draws and literals.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    /// Widening conversion to `f64`.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar is representable as f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Field-like number usable in closed-form expressions (floats or rationals).
pub trait Exact: Num + Clone + FromPrimitive + PartialOrd + Debug {}

impl<T> Exact for T where T: Num + Clone + FromPrimitive + PartialOrd + Debug {}
