//! Cache-fit model for the traversal grain `s` and leaf size `c`.
//!
//! `f(s, c) = 2·c·task_size·threads_per_core·(csize·log₂(s/c) + bsize) − llc`
//! estimates, in bytes, how far the working set of the concurrently running
//! traversal tasks of one core overshoots the last-level cache. A good
//! configuration fits (`f ≤ 0`) with as little slack as possible.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Bytes of one traversal task descriptor: two cell references plus the
/// saved frame of the recursive traversal.
pub const TASK_DESCRIPTOR_BYTES: u64 = 568;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CachePlan {
    /// Bytes per cell record.
    pub csize: u64,
    /// Bytes per body record.
    pub bsize: u64,
    pub threads_per_core: u64,
    pub llc_bytes: u64,
    pub task_size: u64,
}

const MIB: u64 = 1 << 20;

impl CachePlan {
    /// Two-way hyper-threaded server core with a 38 MiB shared L3.
    pub fn skylake() -> Self {
        Self {
            csize: 72,
            bsize: 64,
            threads_per_core: 2,
            llc_bytes: 38 * MIB,
            task_size: TASK_DESCRIPTOR_BYTES,
        }
    }

    /// Four-way hyper-threaded many-core chip with 36 MiB of aggregated L2.
    pub fn knl() -> Self {
        Self {
            threads_per_core: 4,
            llc_bytes: 36 * MIB,
            ..Self::skylake()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.csize == 0 || self.bsize == 0 || self.threads_per_core == 0 || self.llc_bytes == 0 || self.task_size == 0 {
            return Err(Error::Config("cache plan fields must be positive".into()));
        }
        Ok(())
    }
}

/// Signed cache overshoot `f(s, c)` in bytes.
pub fn cache_fit(s: usize, c: usize, plan: &CachePlan) -> Result<f64> {
    if c == 0 || s < c {
        return Err(Error::Precondition(alloc::format!("need s >= c >= 1, got s = {s}, c = {c}")));
    }
    let depth = math::log2(s as f64 / c as f64);
    let per_task = plan.csize as f64 * depth + plan.bsize as f64;
    Ok(2.0 * c as f64 * plan.task_size as f64 * plan.threads_per_core as f64 * per_task - plan.llc_bytes as f64)
}

/// Powers of two from 16 to 1024 for both `s` and `c`, with `s >= c`.
pub fn default_grid() -> Vec<(usize, usize)> {
    let values: Vec<usize> = (4..=10).map(|e| 1usize << e).collect();
    let mut grid = Vec::new();
    for &s in &values {
        for &c in &values {
            if s >= c {
                grid.push((s, c));
            }
        }
    }
    grid
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GrainChoice {
    pub s: usize,
    pub c: usize,
    pub fit: f64,
    /// False when no grid point fits in cache and the overall minimum of
    /// `|f|` was returned instead.
    pub feasible: bool,
}

/// Grid point with the smallest `|f|` among those with `f ≤ 0`; ties go to the
/// larger `s`, then the larger `c`.
pub fn select_grain(plan: &CachePlan, grid: &[(usize, usize)]) -> Result<GrainChoice> {
    plan.validate()?;
    if grid.is_empty() {
        return Err(Error::Config("empty tuning grid".into()));
    }
    let better = |a: &GrainChoice, b: &GrainChoice| {
        let (fa, fb) = (a.fit.abs(), b.fit.abs());
        fa < fb || (fa == fb && (a.s > b.s || (a.s == b.s && a.c > b.c)))
    };
    let mut best_fit: Option<GrainChoice> = None;
    let mut best_any: Option<GrainChoice> = None;
    for &(s, c) in grid {
        let f = cache_fit(s, c, plan)?;
        let cand = GrainChoice { s, c, fit: f, feasible: f <= 0.0 };
        if f <= 0.0 && best_fit.as_ref().is_none_or(|b| better(&cand, b)) {
            best_fit = Some(cand);
        }
        if best_any.as_ref().is_none_or(|b| better(&cand, b)) {
            best_any = Some(cand);
        }
    }
    Ok(match best_fit {
        Some(c) => c,
        None => GrainChoice {
            feasible: false,
            ..best_any.expect("grid is not empty")
        },
    })
}

/// Grid points whose `|f|` is within `slack` of the feasible minimum.
pub fn near_optimal(plan: &CachePlan, grid: &[(usize, usize)], slack: f64) -> Result<Vec<(usize, usize)>> {
    let best = select_grain(plan, grid)?;
    let mut out = Vec::new();
    for &(s, c) in grid {
        let f = cache_fit(s, c, plan)?;
        if (f <= 0.0 || !best.feasible) && f.abs() <= best.fit.abs() * (1.0 + slack) {
            out.push((s, c));
        }
    }
    Ok(out)
}
