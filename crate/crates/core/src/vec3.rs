//! Minimal fixed-size vector helpers for 3D points.

use crate::math;

pub type Point3 = [f64; 3];

#[inline]
pub fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm2(a: Point3) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: Point3) -> f64 {
    math::sqrt(norm2(a))
}

#[inline]
pub fn dist(a: Point3, b: Point3) -> f64 {
    norm(sub(a, b))
}

/// Spherical coordinates `(r, theta, phi)` of `a`; the angles are zero at the origin.
pub fn to_spherical(a: Point3) -> (f64, f64, f64) {
    let r = norm(a);
    if r == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let c = (a[2] / r).clamp(-1.0, 1.0);
    (r, math::acos(c), math::atan2(a[1], a[0]))
}
