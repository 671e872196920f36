//! Morton (Z-order) keys over a cubic domain.
//!
//! A key at level `l` holds `3·l` bits: the octant chosen at each refinement,
//! coarsest first, with octant `x + 2y + 4z`. The key of a child is therefore
//! its parent's key shifted left by 3 with the octant appended.

use crate::error::{Error, Result};
use crate::math;
use crate::vec3::Point3;

/// Deepest level representable in a 64-bit key.
pub const MAX_LEVEL: u32 = 20;

/// An axis-aligned cube.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bounds {
    pub center: Point3,
    pub half_width: f64,
}

impl Bounds {
    /// Smallest cube around `points`, padded slightly so that every point is
    /// strictly inside.
    pub fn from_points<'a, I: IntoIterator<Item = &'a Point3>>(points: I) -> Result<Self> {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        let mut any = false;
        for p in points {
            any = true;
            for d in 0..3 {
                if !p[d].is_finite() {
                    return Err(Error::Domain("non-finite position".into()));
                }
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        if !any {
            return Err(Error::Domain("no points".into()));
        }
        let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])];
        let mut hw: f64 = 0.0;
        for d in 0..3 {
            hw = hw.max(0.5 * (hi[d] - lo[d]));
        }
        let hw = if hw > 0.0 { hw * (1.0 + 1e-9) } else { 1.0 };
        Ok(Self { center, half_width: hw })
    }

    pub fn contains(&self, p: Point3) -> bool {
        (0..3).all(|d| (p[d] - self.center[d]).abs() <= self.half_width)
    }

    /// Integer lattice coordinates of `p` at `level`.
    pub fn grid_coords(&self, p: Point3, level: u32) -> Result<[u64; 3]> {
        if !self.contains(p) {
            return Err(Error::Domain(alloc::format!("point {p:?} outside the domain box")));
        }
        let n = 1u64 << level;
        let mut out = [0u64; 3];
        for d in 0..3 {
            let t = (p[d] - (self.center[d] - self.half_width)) / (2.0 * self.half_width);
            let i = math::floor(t * n as f64) as i64;
            out[d] = i.clamp(0, n as i64 - 1) as u64;
        }
        Ok(out)
    }

    /// Centre of the cell at `level` with lattice coordinates `ix`.
    pub fn cell_center(&self, ix: [u64; 3], level: u32) -> Point3 {
        let w = 2.0 * self.half_width / (1u64 << level) as f64;
        let mut c = [0.0; 3];
        for d in 0..3 {
            c[d] = self.center[d] - self.half_width + (ix[d] as f64 + 0.5) * w;
        }
        c
    }

    pub fn cell_half_width(&self, level: u32) -> f64 {
        self.half_width / (1u64 << level) as f64
    }
}

/// Interleave lattice coordinates of `level` bits each into a key.
pub fn interleave(ix: [u64; 3], level: u32) -> u64 {
    let mut key = 0u64;
    for l in (0..level).rev() {
        let oct = ((ix[0] >> l) & 1) | (((ix[1] >> l) & 1) << 1) | (((ix[2] >> l) & 1) << 2);
        key = (key << 3) | oct;
    }
    key
}

/// Inverse of [`interleave`].
pub fn deinterleave(key: u64, level: u32) -> [u64; 3] {
    let mut ix = [0u64; 3];
    for l in 0..level {
        let oct = (key >> (3 * l)) & 7;
        ix[0] |= (oct & 1) << l;
        ix[1] |= ((oct >> 1) & 1) << l;
        ix[2] |= ((oct >> 2) & 1) << l;
    }
    ix
}

/// Morton key of the level-`level` cell containing `position`.
pub fn morton_key(position: Point3, bounds: &Bounds, level: u32) -> Result<u64> {
    if level > MAX_LEVEL {
        return Err(Error::Config(alloc::format!("level {level} exceeds {MAX_LEVEL}")));
    }
    Ok(interleave(bounds.grid_coords(position, level)?, level))
}
