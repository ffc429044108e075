//! Floating-point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type the tensor kernels are generic over.
///
/// Implemented for `f32` and `f64`. Exactness tolerances quoted in the
/// documentation (1e-10 and tighter) only hold for `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lower edge of the magnitude window kept in tensor data; anything
    /// smaller is folded into the log-scale factor.
    const RESCALE_LOW: f64;
    /// Upper edge of the magnitude window kept in tensor data.
    const RESCALE_HIGH: f64;

    /// Converts an `f64` literal. Panics only if the value is not
    /// representable at all, which cannot happen for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const RESCALE_LOW: f64 = 1e-150;
    const RESCALE_HIGH: f64 = 1e150;
}

impl Scalar for f32 {
    const RESCALE_LOW: f64 = 1e-15;
    const RESCALE_HIGH: f64 = 1e15;
}
