//! Scalar abstraction shared by the radio and metrics math.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the link and QoS formulas (f32 or f64).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an f64 constant.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}
