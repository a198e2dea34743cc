//! Scalar abstraction shared by the geometry, simulation and metric code.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the kinematic core can run on.
///
/// `f64` is the production choice; `f32` is supported for experiments where
/// memory matters more than the last few bits of integration accuracy.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + FromStr
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion from an `f64` literal or configuration value.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("every finite f64 converts to a float scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float scalars always convert to f64")
    }

    /// Tolerance used when comparing times that were accumulated tick by tick.
    fn time_eps() -> Self;
}

impl Scalar for f64 {
    fn time_eps() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn time_eps() -> Self {
        1e-4
    }
}

/// Converts a time span into a whole number of ticks, tolerating accumulated rounding.
pub fn ticks_for<T: Scalar>(span: T, dt: T) -> usize {
    let raw = span / dt;
    let nearest = raw.round();
    let snapped = if (raw - nearest).abs() <= T::of(1e-6) { nearest } else { raw.ceil() };
    snapped.to_usize().unwrap_or(0)
}
