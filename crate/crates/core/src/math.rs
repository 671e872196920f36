//! Scalar floating-point functions that work with and without `std`.
//!
//! With the `std` feature the platform implementations are used; otherwise
//! everything routes through `libm`.

#[cfg(feature = "std")]
mod imp {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        f64::sqrt(x)
    }
    #[inline]
    pub fn sin(x: f64) -> f64 {
        f64::sin(x)
    }
    #[inline]
    pub fn cos(x: f64) -> f64 {
        f64::cos(x)
    }
    #[inline]
    pub fn exp(x: f64) -> f64 {
        f64::exp(x)
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        f64::ln(x)
    }
    #[inline]
    pub fn log2(x: f64) -> f64 {
        f64::log2(x)
    }
    #[inline]
    pub fn atan2(y: f64, x: f64) -> f64 {
        f64::atan2(y, x)
    }
    #[inline]
    pub fn acos(x: f64) -> f64 {
        f64::acos(x)
    }
    #[inline]
    pub fn floor(x: f64) -> f64 {
        f64::floor(x)
    }
    #[inline]
    pub fn round(x: f64) -> f64 {
        f64::round(x)
    }
    #[inline]
    pub fn ceil(x: f64) -> f64 {
        f64::ceil(x)
    }
    #[inline]
    pub fn sin_cos(x: f64) -> (f64, f64) {
        f64::sin_cos(x)
    }
    #[inline]
    pub fn sqrtf(x: f32) -> f32 {
        f32::sqrt(x)
    }
    #[inline]
    pub fn sinf(x: f32) -> f32 {
        f32::sin(x)
    }
    #[inline]
    pub fn cosf(x: f32) -> f32 {
        f32::cos(x)
    }
    #[inline]
    pub fn expf(x: f32) -> f32 {
        f32::exp(x)
    }
}

#[cfg(not(feature = "std"))]
mod imp {
    pub use libm::{
        acos, atan2, ceil, cos, cosf, exp, expf, floor, log as ln, log2, round, sin, sinf, sqrt,
        sqrtf,
    };
    #[inline]
    pub fn sin_cos(x: f64) -> (f64, f64) {
        libm::sincos(x)
    }
}

pub use imp::*;

pub const PI: f64 = core::f64::consts::PI;
pub const FOUR_PI: f64 = 4.0 * PI;
