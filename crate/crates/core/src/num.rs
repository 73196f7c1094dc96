//! Scalar abstraction for sample values.
//!
//! Audio kernels are written once against [`Sample`] and instantiated for
//! `f32` (the default used by the pipeline) and `f64` (used by the oracles
//! in the test suite).

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// A floating-point sample type.
pub trait Sample:
    Float + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static
{
    /// Converts from `f64`, saturating to the nearest representable value.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::zero)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(0.0)
    }
}

impl Sample for f32 {}
impl Sample for f64 {}

/// Linear amplitude corresponding to a dBFS level.
pub fn dbfs_to_amplitude(dbfs: f64) -> f64 {
    10f64.powf(dbfs / 20.0)
}
