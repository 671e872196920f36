//! Core numerics for a fast-multipole accelerated boundary-integral solver of
//! acoustic scattering by sound-soft bodies.
//!
//! The crate is `no_std` (with `alloc`) so it can be embedded anywhere; the
//! `std` feature only switches the floating-point backend.
#![no_std]
#[cfg(feature = "std")]
extern crate std;
extern crate alloc;

pub mod error;
pub mod fmm;
pub mod geometry;
pub mod kernel;
pub mod math;
pub mod mesh;
pub mod oracle;
pub mod partition;
pub mod solver;
pub mod special;
pub mod vec3;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use vec3::Point3;
