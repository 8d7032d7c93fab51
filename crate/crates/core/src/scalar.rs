use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used for scores, metrics and matrices.
///
/// Implemented for `f32` and `f64`. Tolerances scale with the type's
/// precision so that the same invariants can be checked for both.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance used when deciding whether a score row sums to one.
    fn sum_tolerance() -> Self;

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize fits in a float")
    }

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 fits in the scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn sum_tolerance() -> Self {
        1e-6
    }
}

impl Scalar for f32 {
    fn sum_tolerance() -> Self {
        1e-5
    }
}

/// Mean of a slice; zero for an empty slice.
pub fn mean<F: Scalar>(values: &[F]) -> F {
    if values.is_empty() {
        return F::zero();
    }
    values.iter().copied().sum::<F>() / F::from_usize_lossy(values.len())
}

/// Population variance of a slice around `mean`.
pub fn population_variance<F: Scalar>(values: &[F], mean: F) -> F {
    if values.is_empty() {
        return F::zero();
    }
    values.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / F::from_usize_lossy(values.len())
}

/// Harmonic mean of precision and recall, zero when both are zero.
pub fn f1<F: Scalar>(precision: F, recall: F) -> F {
    let denom = precision + recall;
    if denom == F::zero() {
        F::zero()
    } else {
        F::from_f64_lossy(2.0) * precision * recall / denom
    }
}

pub fn euclidean<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<F>().sqrt()
}

/// Ordering for finite scalars; incomparable values compare equal.
pub fn cmp_scalar<F: Scalar>(a: &F, b: &F) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
}
