//! Weighted orthogonal recursive bisection.
//!
//! The current box is cut perpendicular to its longest side at the weighted
//! median of the bodies it holds. A rank count that is not a power of two is
//! split unevenly, with the weight target proportional to the ranks on each
//! side.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::vec3::Point3;

/// Axis-aligned box `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn around(points: &[Point3]) -> Result<Self> {
        let first = *points.first().ok_or_else(|| Error::Precondition("no points".into()))?;
        let mut b = Self { min: first, max: first };
        for p in points {
            for d in 0..3 {
                b.min[d] = b.min[d].min(p[d]);
                b.max[d] = b.max[d].max(p[d]);
            }
        }
        Ok(b)
    }

    pub fn contains(&self, p: Point3) -> bool {
        (0..3).all(|d| p[d] >= self.min[d] && p[d] <= self.max[d])
    }

    pub fn extent(&self, d: usize) -> f64 {
        self.max[d] - self.min[d]
    }

    pub fn longest_axis(&self) -> usize {
        let e = [self.extent(0), self.extent(1), self.extent(2)];
        if e[0] >= e[1] && e[0] >= e[2] {
            0
        } else if e[1] >= e[2] {
            1
        } else {
            2
        }
    }

    pub fn volume(&self) -> f64 {
        self.extent(0) * self.extent(1) * self.extent(2)
    }

    /// Whether the closed boxes share at least one point.
    pub fn intersects(&self, o: &Aabb) -> bool {
        (0..3).all(|d| self.min[d] <= o.max[d] && o.min[d] <= self.max[d])
    }

    /// Whether the closed box meets the cube of half-width `hw` about `c`.
    pub fn meets_cube(&self, c: Point3, hw: f64) -> bool {
        (0..3).all(|d| self.min[d] <= c[d] + hw && c[d] - hw <= self.max[d])
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartitionPlan {
    pub nranks: usize,
    pub domain: Aabb,
    pub boxes: Vec<Aabb>,
    /// Rank of every body.
    pub assignment: Vec<usize>,
    /// Total body weight of every rank.
    pub weights: Vec<f64>,
}

impl PartitionPlan {
    /// Bodies of `rank` in ascending index order.
    pub fn members(&self, rank: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == rank).collect()
    }

    /// `max / mean` of `per_rank`.
    pub fn imbalance(per_rank: &[f64]) -> f64 {
        let max = per_rank.iter().cloned().fold(0.0, f64::max);
        let mean = per_rank.iter().sum::<f64>() / per_rank.len() as f64;
        if mean > 0.0 {
            max / mean
        } else {
            1.0
        }
    }

    pub fn weight_imbalance(&self) -> f64 {
        Self::imbalance(&self.weights)
    }
}

/// Partition bodies at `positions` with `weights` over `nranks` ranks.
pub fn orb_partition(positions: &[Point3], weights: &[f64], nranks: usize) -> Result<PartitionPlan> {
    if positions.len() != weights.len() {
        return Err(Error::Dimension {
            expected: positions.len(),
            got: weights.len(),
        });
    }
    if nranks == 0 {
        return Err(Error::Config("need at least one rank".into()));
    }
    if nranks > positions.len() {
        return Err(Error::Precondition(alloc::format!(
            "{nranks} ranks for {} bodies",
            positions.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::Precondition("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Precondition("total weight must be positive".into()));
    }
    let domain = Aabb::around(positions)?;
    let mut plan = PartitionPlan {
        nranks,
        domain,
        boxes: vec![domain; nranks],
        assignment: vec![0; positions.len()],
        weights: vec![0.0; nranks],
    };
    let idx: Vec<usize> = (0..positions.len()).collect();
    bisect(positions, weights, idx, domain, 0, nranks, &mut plan);
    Ok(plan)
}

fn bisect(
    pos: &[Point3],
    w: &[f64],
    mut idx: Vec<usize>,
    bx: Aabb,
    first_rank: usize,
    nranks: usize,
    plan: &mut PartitionPlan,
) {
    if nranks == 1 {
        plan.boxes[first_rank] = bx;
        for &i in &idx {
            plan.assignment[i] = first_rank;
            plan.weights[first_rank] += w[i];
        }
        return;
    }
    let axis = bx.longest_axis();
    idx.sort_by(|&a, &b| pos[a][axis].total_cmp(&pos[b][axis]).then(a.cmp(&b)));
    let left_ranks = nranks / 2;
    let total: f64 = idx.iter().map(|&i| w[i]).sum();
    let target = total * left_ranks as f64 / nranks as f64;
    // Each side keeps at least as many bodies as ranks.
    let lo = left_ranks;
    let hi = idx.len() - (nranks - left_ranks);
    let mut cum = 0.0;
    let mut best = lo;
    let mut best_gap = f64::INFINITY;
    for (s, &i) in idx.iter().enumerate().take(hi + 1) {
        if s >= lo {
            let gap = (cum - target).abs();
            if gap < best_gap {
                best_gap = gap;
                best = s;
            }
        }
        cum += w[i];
    }
    let cut = 0.5 * (pos[idx[best - 1]][axis] + pos[idx[best]][axis]);
    let mut left_box = bx;
    let mut right_box = bx;
    left_box.max[axis] = cut;
    right_box.min[axis] = cut;
    let right = idx.split_off(best);
    bisect(pos, w, idx, left_box, first_rank, left_ranks, plan);
    bisect(pos, w, right, right_box, first_rank + left_ranks, nranks - left_ranks, plan);
}
