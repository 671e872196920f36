//! Load-balance simulation for weighted repartitioning.
//!
//! Every body's work is the number of interactions it takes part in as a
//! target: source bodies reached by P2P plus M2L translations into the cells
//! that contain it, split by whether the source lives on the body's own rank
//! (`local`) or elsewhere (`remote`). A rank's simulated runtime is its total
//! work plus `comm_factor` times its remote work, and the runtime of the step
//! is the maximum over ranks.

use alloc::vec;
use alloc::vec::Vec;

use super::orb::{orb_partition, PartitionPlan};
use super::weight::{compute_weight, update_alpha, PROBE_BUDGET};
use crate::error::{Error, Result};
use crate::fmm::traversal::InteractionLists;
use crate::fmm::tree::Octree;
use crate::vec3::Point3;

/// Per-body interaction counts under one assignment, by original index.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionCounts {
    pub local: Vec<f64>,
    pub remote: Vec<f64>,
}

pub fn interaction_counts(tree: &Octree, lists: &InteractionLists, assignment: &[usize]) -> Result<InteractionCounts> {
    let n = tree.bodies.len();
    if assignment.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: assignment.len(),
        });
    }
    let rank_at: Vec<usize> = tree.bodies.iter().map(|b| assignment[b.index]).collect();
    let mut present: Vec<Vec<usize>> = vec![Vec::new(); tree.cells.len()];
    for c in (0..tree.cells.len()).rev() {
        let cell = &tree.cells[c];
        let mut ranks: Vec<usize> = if cell.is_leaf() {
            cell.body_span.range().map(|i| rank_at[i]).collect()
        } else {
            cell.child_span.range().flat_map(|ch| present[ch].iter().copied()).collect()
        };
        ranks.sort_unstable();
        ranks.dedup();
        present[c] = ranks;
    }
    let mut local = vec![0.0; n];
    let mut remote = vec![0.0; n];
    for &(t, s) in &lists.m2l {
        let ps = &present[s];
        for i in tree.cells[t].body_span.range() {
            let own = ps.binary_search(&rank_at[i]).is_ok() as usize;
            local[i] += own as f64;
            remote[i] += (ps.len() - own) as f64;
        }
    }
    for &(t, s) in &lists.p2p {
        for i in tree.cells[t].body_span.range() {
            for j in tree.cells[s].body_span.range() {
                if i == j {
                    continue;
                }
                if rank_at[j] == rank_at[i] {
                    local[i] += 1.0;
                } else {
                    remote[i] += 1.0;
                }
            }
        }
    }
    let mut out = InteractionCounts {
        local: vec![0.0; n],
        remote: vec![0.0; n],
    };
    for (pos, b) in tree.bodies.iter().enumerate() {
        out.local[b.index] = local[pos];
        out.remote[b.index] = remote[pos];
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BalanceReport {
    pub alpha: Option<f64>,
    pub work: Vec<f64>,
    pub remote: Vec<f64>,
    /// Max over mean of `work`.
    pub imbalance: f64,
    pub runtime: f64,
}

/// Evaluate the assignment of `plan`.
pub fn assess(tree: &Octree, lists: &InteractionLists, plan: &PartitionPlan, comm_factor: f64, alpha: Option<f64>) -> Result<BalanceReport> {
    let counts = interaction_counts(tree, lists, &plan.assignment)?;
    let mut work = vec![0.0; plan.nranks];
    let mut remote = vec![0.0; plan.nranks];
    for (i, &r) in plan.assignment.iter().enumerate() {
        work[r] += counts.local[i] + counts.remote[i];
        remote[r] += counts.remote[i];
    }
    let runtime = work
        .iter()
        .zip(&remote)
        .map(|(w, c)| w + comm_factor * c)
        .fold(0.0, f64::max);
    Ok(BalanceReport {
        alpha,
        imbalance: PartitionPlan::imbalance(&work),
        work,
        remote,
        runtime,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BalanceOutcome {
    pub unweighted: BalanceReport,
    pub probes: Vec<BalanceReport>,
    /// The probe with the lowest runtime.
    pub best: BalanceReport,
}

/// Start from an unweighted partition, measure interaction counts, then
/// repartition with `w = l + α·r` while searching `α` for the lowest runtime.
pub fn rebalance(
    positions: &[Point3],
    tree: &Octree,
    lists: &InteractionLists,
    nranks: usize,
    comm_factor: f64,
) -> Result<BalanceOutcome> {
    let first = orb_partition(positions, &vec![1.0; positions.len()], nranks)?;
    let unweighted = assess(tree, lists, &first, comm_factor, None)?;
    let counts = interaction_counts(tree, lists, &first.assignment)?;
    let mut history: Vec<(f64, f64)> = Vec::new();
    let mut probes: Vec<BalanceReport> = Vec::new();
    for _ in 0..PROBE_BUDGET {
        let alpha = update_alpha(&history);
        if history.iter().any(|(a, _)| (a - alpha).abs() <= 1e-9) {
            break;
        }
        let w: Vec<f64> = counts
            .local
            .iter()
            .zip(&counts.remote)
            .map(|(&l, &r)| compute_weight(l, r, alpha))
            .collect();
        let plan = orb_partition(positions, &w, nranks)?;
        let report = assess(tree, lists, &plan, comm_factor, Some(alpha))?;
        history.push((alpha, report.runtime));
        probes.push(report);
    }
    let best = probes
        .iter()
        .fold(None::<&BalanceReport>, |acc, p| match acc {
            Some(b) if b.runtime <= p.runtime => Some(b),
            _ => Some(p),
        })
        .cloned()
        .ok_or_else(|| Error::Precondition("no probes".into()))?;
    Ok(BalanceOutcome {
        unweighted,
        probes,
        best,
    })
}
