use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating point type accepted by every routine in the crate (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + rustfft::FftNum
    + Default
    + Debug
    + Display
    + serde::Serialize
    + serde::de::DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into `Self`.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    #[inline]
    fn to64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("integer representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

// `Float` and `Signed` both provide these, so method syntax is ambiguous.
#[inline]
pub fn abs<S: Real>(x: S) -> S {
    Float::abs(x)
}

#[inline]
pub fn two_pi<S: Real>() -> S {
    S::TAU()
}
