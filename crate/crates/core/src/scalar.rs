//! Scalar abstraction shared by every numeric module.

use nalgebra::{Complex, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the simulator is generic over (`f32` or `f64`).
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// Convert an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn cr<T: Real>(re: T) -> C<T> {
    Complex::new(re, T::zero())
}

#[inline]
pub(crate) fn czero<T: Real>() -> C<T> {
    Complex::new(T::zero(), T::zero())
}

/// `e^{i phase}`
#[inline]
pub(crate) fn cis<T: Real>(phase: T) -> C<T> {
    Complex::new(phase.cos(), phase.sin())
}

/// Modulus of a complex number.
#[inline]
pub fn cabs<T: Real>(z: C<T>) -> T {
    z.norm_sqr().sqrt()
}
