//! Dense tensors, a reverse-mode gradient tape over the small op set the
//! model needs, and the Adam optimizer.

mod adam;
mod kernels;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig, AdamState};
pub use tape::{Gradients, Reduction, Tape, Var};
pub use tensor::Tensor;

use core::fmt::{Debug, Display};
use core::iter::Sum;
use num_traits::Float;

/// Floating point element type. `f32` is used for training, `f64` for
/// gradient checks.
pub trait Real:
    Float + Default + Debug + Display + Sum + Send + Sync + Copy + 'static
{
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Probabilities are clamped to `[BCE_EPSILON, 1 - BCE_EPSILON]` before the log.
pub const BCE_EPSILON: f64 = 1e-7;

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    // Symmetric form keeps exp() from overflowing for large |x|.
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
