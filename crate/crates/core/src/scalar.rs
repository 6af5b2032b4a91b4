use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar used by the closed-form and finite-distribution code.
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Send + Sync + 'static {
    /// Absolute tolerance on the total mass of a pmf.
    fn pmf_tolerance() -> Self;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }
}

impl Real for f64 {
    fn pmf_tolerance() -> Self {
        1e-9
    }
}

impl Real for f32 {
    fn pmf_tolerance() -> Self {
        1e-5
    }
}

/// `x·ln(y/x)`-style terms vanish at `x = 0`.
pub(crate) fn xlogy<T: Real>(x: T, y: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x * y.ln()
    }
}
