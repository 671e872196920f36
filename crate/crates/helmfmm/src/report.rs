//! Machine-readable outputs: JSON summaries and CSV tables.
//!
//! Field layouts are documented as JSON Schemas under `docs/schemas`.

use std::path::Path;

use helmfmm_core::fmm::FmmStats;
use helmfmm_core::partition::balance::BalanceReport;
use helmfmm_core::partition::{ExchangeStats, TraceRecord};
use helmfmm_core::solver::SolveReport;
use helmfmm_core::Complex64;
use serde::Serialize;

use crate::error::Result;

#[derive(Clone, Debug, Serialize)]
pub struct MeshSummary {
    pub elements: usize,
    pub unknowns: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveSummary {
    pub mesh: MeshSummary,
    pub wavenumber: f64,
    pub frequency: f64,
    pub basis_order: u32,
    pub singularity: String,
    pub backend: String,
    pub precision: String,
    pub grain: usize,
    pub ncrit: usize,
    pub theta: f64,
    pub fmm: Option<FmmStats>,
    pub corrections_nnz: usize,
    pub rtol: f64,
    pub restart: usize,
    pub iterations: usize,
    pub converged: bool,
    pub breakdown: bool,
    pub final_residual: f64,
    pub true_residual: f64,
    pub assembly_seconds: f64,
    pub solve_seconds: f64,
    pub oracle_error: Option<f64>,
    pub threads: usize,
}

impl SolveSummary {
    pub fn absorb(&mut self, r: &SolveReport) {
        self.iterations = r.iterations;
        self.converged = r.converged;
        self.breakdown = r.breakdown;
        self.final_residual = r.residual_history.last().copied().unwrap_or(1.0);
        self.true_residual = r.true_residual;
        self.oracle_error = r.oracle_error;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyRow {
    pub order: u32,
    pub unknowns: usize,
    pub iterations: usize,
    pub converged: bool,
    pub max_relative_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub radius: f64,
    pub wavenumber: f64,
    pub observation_radius: f64,
    pub observation_points: usize,
    pub rows: Vec<VerifyRow>,
    /// Whether the error column strictly decreases with the order.
    pub strictly_decreasing: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub seconds: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    pub slope: Option<f64>,
    pub slope_ci95: Option<[f64; 2]>,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BalanceSummary {
    pub unweighted_imbalance: f64,
    pub weighted_imbalance: f64,
    pub alpha: f64,
    /// Weighted over unweighted imbalance.
    pub imbalance_ratio: f64,
    pub probes: Vec<BalanceReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PartitionReport {
    pub ranks: usize,
    pub bodies: usize,
    pub distribution: String,
    pub groups_spanned: usize,
    pub hsdx: ExchangeStats,
    pub alltoall: ExchangeStats,
    /// HSDX over all-to-all hop-weighted bytes.
    pub cost_ratio: f64,
    pub balance: Option<BalanceSummary>,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TuneReport {
    pub s: usize,
    pub c: usize,
    pub fit: f64,
    pub feasible: bool,
    pub warning: Option<String>,
    pub near_optimal: Vec<[usize; 2]>,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

pub fn write_residuals(path: &Path, r: &SolveReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "residual", "seconds"])?;
    for (i, res) in r.residual_history.iter().enumerate() {
        let t = if i == 0 { 0.0 } else { r.elapsed_seconds.get(i - 1).copied().unwrap_or(0.0) };
        w.write_record([i.to_string(), format!("{res:e}"), format!("{t:e}")])?;
    }
    w.flush()?;
    Ok(())
}

/// `theta,re,im,magnitude` rows, optionally followed by reference columns.
pub fn write_field(path: &Path, theta: &[f64], values: &[Complex64], reference: Option<&[Complex64]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut head = vec!["theta", "re", "im", "magnitude"];
    if reference.is_some() {
        head.extend(["reference_re", "reference_im", "reference_magnitude"]);
    }
    w.write_record(&head)?;
    for (i, (t, v)) in theta.iter().zip(values).enumerate() {
        let mut row = vec![format!("{t:e}"), format!("{:e}", v.re), format!("{:e}", v.im), format!("{:e}", v.norm())];
        if let Some(r) = reference {
            row.extend([format!("{:e}", r[i].re), format!("{:e}", r[i].im), format!("{:e}", r[i].norm())]);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scaling(path: &Path, rows: &[ScalingRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["stage", "src", "dst", "bytes", "hops"])?;
    for t in trace {
        w.write_record([t.stage.to_string(), t.src.to_string(), t.dst.to_string(), t.bytes.to_string(), t.hops.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_balance(path: &Path, unweighted: &BalanceReport, probes: &[BalanceReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["alpha", "imbalance", "runtime", "imbalance_ratio"])?;
    w.write_record([String::from("unweighted"), format!("{:e}", unweighted.imbalance), format!("{:e}", unweighted.runtime), "1".into()])?;
    for p in probes {
        let alpha = p.alpha.map_or(String::from("unweighted"), |a| format!("{a:e}"));
        w.write_record([
            alpha,
            format!("{:e}", p.imbalance),
            format!("{:e}", p.runtime),
            format!("{:e}", p.imbalance / unweighted.imbalance),
        ])?;
    }
    w.flush()?;
    Ok(())
}
