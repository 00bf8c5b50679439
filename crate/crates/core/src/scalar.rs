//! Scalar abstractions shared by the generic numerics.
//!
//! [`Real`] covers the IEEE float types used for production evaluation.
//! [`Field`] is the weaker contract needed by the D-symbol sums, satisfied
//! by floats, double-double numbers and exact rationals alike.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive};

/// A field in which the combinatorial kernels can be evaluated.
pub trait Field: Clone + Num + Signed + FromPrimitive + PartialOrd + Debug {
    /// Exact conversion from a small integer.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in field")
    }
}

impl<T> Field for T where T: Clone + Num + Signed + FromPrimitive + PartialOrd + Debug {}

/// Floating point scalar used throughout the phase-space engine.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Field + Default + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal; panics only for types that cannot hold it.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Binomial coefficient evaluated in the target field by the multiplicative
/// formula. Exact for rationals; relative error of order `k` ulps for floats.
pub fn binomial<T: Field>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    let mut c = T::one();
    for i in 0..k {
        c = c * T::from_count(n - i) / T::from_count(i + 1);
    }
    c
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Float> CompensatedSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), carry: T::zero() }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry = self.carry + ((self.sum - t) + x);
        } else {
            self.carry = self.carry + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

impl<T: Float> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}
