use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point type the exact pipelines are generic over.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Relative bound on the residual `‖Ax - b‖∞ / (1 + ‖b‖∞)` accepted by the solvers.
    fn residual_tolerance() -> Self;

    /// Converts an `f64` literal. Panics only for types that cannot represent finite `f64`s.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal not representable")
    }
}

impl Scalar for f64 {
    fn residual_tolerance() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn residual_tolerance() -> Self {
        1e-3
    }
}
