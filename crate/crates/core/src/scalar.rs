//! Scalar abstraction shared by every numeric module.
//!
//! All physics in this crate is written against [`Real`], which is
//! implemented for `f32` and `f64`. File formats and the CLI work in `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Speed of light in vacuum, m/s (exact by SI definition).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in target scalar")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn speed_of_light<T: Real>() -> T {
    lit(SPEED_OF_LIGHT)
}

/// Wavenumber 2πf/c.
#[inline]
pub fn wavenumber<T: Real>(f: T) -> T {
    T::TAU() * f / speed_of_light::<T>()
}

/// `e^{iθ}`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Reduces an angle to `[0, 2π)`.
#[inline]
pub fn wrap_two_pi<T: Real>(x: T) -> T {
    let tau = T::TAU();
    let r = x % tau;
    let r = if r < T::zero() { r + tau } else { r };
    // `r + tau` can round up to exactly tau for tiny negative r.
    if r >= tau {
        T::zero()
    } else {
        r
    }
}

/// Shortest distance between two angles on the circle, in `[0, π]`.
#[inline]
pub fn circular_distance<T: Real>(a: T, b: T) -> T {
    let d = wrap_two_pi(a - b);
    d.min(T::TAU() - d)
}

pub(crate) fn is_finite_complex<T: Real>(z: Complex<T>) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

#[inline]
pub fn db10<T: Real>(power: T) -> T {
    lit::<T>(10.0) * power.log10()
}
