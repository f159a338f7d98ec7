use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point type the models are computed in.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `ln Σ exp(x)` without overflow. Returns `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp<F: Scalar>(xs: impl IntoIterator<Item = F> + Clone) -> F {
    let max = xs
        .clone()
        .into_iter()
        .fold(F::neg_infinity(), |m, x| if x > m { x } else { m });
    if max == F::neg_infinity() {
        return max;
    }
    let s: F = xs.into_iter().map(|x| (x - max).exp()).sum();
    max + s.ln()
}
