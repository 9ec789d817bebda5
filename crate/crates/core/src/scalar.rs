//! Scalar abstraction for the numeric parts of the crate.
//!
//! Geometry ratios, relation thresholds, state encodings, and the GRU are all
//! written against [`Real`] so they run at `f32` or `f64` unchanged. The crate
//! root exports [`crate::Scalar`] (`f64`) as the concrete choice used by the
//! CLI and the checkpoint format.

use ndarray::ScalarOperand;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar usable throughout the numeric code.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + ScalarOperand
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; panics only if the target type cannot
    /// represent any approximation (never for `f32`/`f64`).
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant not representable in scalar type")
    }

    /// Conversion to `f64` for reporting and serialization.
    fn to_f64_lossy(self) -> f64;
}

impl Real for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
}
