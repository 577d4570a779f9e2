//! Scalar abstraction shared by the numeric modules.
//!
//! Geometry, the Gaussian-process surrogate and the image metrics are written
//! against [`Real`] so they can run in `f32` or `f64`. File formats fix their
//! own widths (COLMAP is `f64`, splat checkpoints are `f32`).

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Send + Sync + Debug + Display + Default + 'static
{
    /// Converts an `f64` literal into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
