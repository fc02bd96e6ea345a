//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;

use crate::numerics::SvdKernel;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar the decomposition is generic over.
///
/// Implemented for `f32` and `f64`. Numerical thresholds are expressed as
/// `max(nominal, k * machine_epsilon)` so that tolerances tuned for `f64`
/// remain meaningful in single precision.
pub trait Real:
    RealField + SvdKernel + Copy + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a count into this scalar type.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossy conversion to `f64` for reporting and serialization.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// `max(nominal, factor * epsilon)`.
    #[inline]
    fn floor_tol(nominal: f64, factor: f64) -> Self {
        let eps = Self::default_epsilon();
        let nominal = Self::lit(nominal);
        let scaled = Self::lit(factor) * eps;
        if nominal > scaled {
            nominal
        } else {
            scaled
        }
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over a [`Real`] field.
pub type Cplx<T> = Complex<T>;

#[inline]
pub(crate) fn cabs<T: Real>(z: Cplx<T>) -> T {
    z.re.hypot(z.im)
}

#[inline]
pub(crate) fn cconj<T: Real>(z: Cplx<T>) -> Cplx<T> {
    Complex::new(z.re, -z.im)
}

/// `r * exp(i theta)`.
#[inline]
pub fn polar<T: Real>(r: T, theta: T) -> Cplx<T> {
    Complex::new(r * theta.cos(), r * theta.sin())
}
