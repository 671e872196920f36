//! The discretised single-layer system `Z·q = p_inc`.
//!
//! Unknowns are density values at the interpolation nodes of every patch.
//! An entry `Z_ij` couples target node `i` to source node `j`:
//!
//! - `j` on another patch and far: `w_j G(r_i, r_j)`, the one-point rule with
//!   `w_j` the reference weight times the Jacobian;
//! - `j` on another patch within the near distance of that patch (only with
//!   [`SingularityMode::SelfAndNear`]): the near-patch integral of `L_j`;
//! - `j` on the same patch: the Duffy-integrated `∫ G L_j J` for the singular
//!   modes, or the one-point rule with a zero diagonal without treatment.
//!
//! The far part is computed by the FMM (or a direct double loop) over all
//! pairs on distinct patches; everything else lives in a sparse correction
//! matrix assembled once.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fmm::pipeline::{direct_sum, FmmConfig, FmmPlan, FmmStats};
use crate::geometry::{BasisOrder, CurvilinearPatch, LagrangeBasis, ReferencePoint};
use crate::kernel::{green_distance, near_patch_row, self_patch_row, WaveNumber, SOUND_SPEED};
use crate::math;
use crate::mesh::SurfaceMesh;
use crate::vec3::{self, Point3};

/// Which integrals are treated beyond the one-point rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SingularityMode {
    None,
    SelfOnly,
    #[default]
    SelfAndNear,
}

impl SingularityMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "self" | "self-only" => Ok(Self::SelfOnly),
            "self+near" | "self-and-near" => Ok(Self::SelfAndNear),
            _ => Err(Error::Config(alloc::format!("unknown singularity mode '{s}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::SelfOnly => "self-only",
            Self::SelfAndNear => "self+near",
        }
    }
}

/// How the far part of the operator is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Backend {
    #[default]
    Fmm,
    Direct,
}

/// Plane wave `amplitude · e^{i k d·r}`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IncidentWave {
    pub direction: Point3,
    pub amplitude: Complex64,
    pub k: WaveNumber,
    pub sound_speed: f64,
}

impl IncidentWave {
    pub fn new(direction: Point3, amplitude: Complex64, k: WaveNumber) -> Result<Self> {
        if (vec3::norm(direction) - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition("incident direction must be a unit vector".into()));
        }
        Ok(Self {
            direction,
            amplitude,
            k,
            sound_speed: SOUND_SPEED,
        })
    }

    /// Unit-amplitude wave travelling along `+z`.
    pub fn plus_z(k: WaveNumber) -> Self {
        Self {
            direction: [0.0, 0.0, 1.0],
            amplitude: Complex64::new(1.0, 0.0),
            k,
            sound_speed: SOUND_SPEED,
        }
    }

    pub fn pressure(&self, r: Point3) -> Complex64 {
        let s = vec3::dot(self.direction, r);
        self.amplitude * (Complex64::i() * self.k.as_complex() * s).exp()
    }
}

/// An interpolation node of one patch with its one-point weight.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuadraturePoint {
    pub position: Point3,
    /// Reference weight times the Jacobian magnitude.
    pub weight: f64,
    pub reference: ReferencePoint,
    pub patch_id: usize,
    pub interp_index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SystemConfig {
    pub basis: BasisOrder,
    pub mode: SingularityMode,
    /// Near distance as a multiple of the source patch diameter.
    pub near_factor: f64,
    /// Fixed near distance overriding `near_factor`.
    pub near_distance: Option<f64>,
    pub self_rule: usize,
    pub near_rule: usize,
    pub backend: Backend,
    pub fmm: FmmConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            basis: BasisOrder::Quadratic,
            mode: SingularityMode::SelfAndNear,
            near_factor: 2.0,
            near_distance: None,
            self_rule: 8,
            near_rule: 8,
            backend: Backend::Fmm,
            fmm: FmmConfig::default(),
        }
    }
}

/// Row-compressed sparse complex matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseMatrix {
    pub dim: usize,
    pub row_start: Vec<usize>,
    pub cols: Vec<u32>,
    pub values: Vec<Complex64>,
}

impl SparseMatrix {
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// `y += A·x`.
    pub fn mul_add(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.dim) {
            let mut acc = Complex64::new(0.0, 0.0);
            for e in self.row_start[i]..self.row_start[i + 1] {
                acc += self.values[e] * x[self.cols[e] as usize];
            }
            *yi += acc;
        }
    }
}

/// Assembled system ready for matrix-vector products.
#[derive(Clone, Debug)]
pub struct DiscreteSystem {
    k: WaveNumber,
    cfg: SystemConfig,
    patches: Vec<CurvilinearPatch>,
    basis: LagrangeBasis,
    points: Vec<QuadraturePoint>,
    positions: Vec<Point3>,
    patch_ids: Vec<usize>,
    weights: Vec<f64>,
    near_distance: Vec<f64>,
    corrections: SparseMatrix,
    fmm: Option<FmmPlan>,
}

/// Uniform spatial hash of point indices.
pub(crate) struct PointGrid {
    h: f64,
    bins: BTreeMap<[i64; 3], Vec<usize>>,
}

impl PointGrid {
    pub(crate) fn new(points: &[Point3], h: f64) -> Self {
        let mut bins: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
        for (i, p) in points.iter().enumerate() {
            bins.entry(Self::bin(p, h)).or_default().push(i);
        }
        Self { h, bins }
    }

    fn bin(p: &Point3, h: f64) -> [i64; 3] {
        [0, 1, 2].map(|d| math::floor(p[d] / h) as i64)
    }

    /// Indices in the 27 bins around `p`: a superset of the points within `h`.
    pub(crate) fn around(&self, p: &Point3, out: &mut Vec<usize>) {
        out.clear();
        let b = Self::bin(p, self.h);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(v) = self.bins.get(&[b[0] + dx, b[1] + dy, b[2] + dz]) {
                        out.extend_from_slice(v);
                    }
                }
            }
        }
        out.sort_unstable();
    }
}

impl DiscreteSystem {
    pub fn new(mesh: &SurfaceMesh, k: WaveNumber, cfg: SystemConfig) -> Result<Self> {
        mesh.validate()?;
        if !(k.wave_r >= 0.0 && k.wave_i >= 0.0) {
            return Err(Error::Config("wavenumber parts must be non-negative".into()));
        }
        if cfg.self_rule == 0 || cfg.near_rule == 0 || !(cfg.near_factor >= 0.0) {
            return Err(Error::Config("rule sizes must be positive and the near factor non-negative".into()));
        }
        let patches = mesh.patches();
        let basis = LagrangeBasis::new(cfg.basis);
        let nodes = cfg.basis.nodes();
        let ni = nodes.len();
        let mut points = Vec::with_capacity(patches.len() * ni);
        for patch in &patches {
            for (i, (r, w)) in nodes.iter().enumerate() {
                let (jac, _) = patch.jacobian(*r)?;
                points.push(QuadraturePoint {
                    position: patch.map_to_physical(*r),
                    weight: w * jac,
                    reference: *r,
                    patch_id: patch.patch_id,
                    interp_index: i,
                });
            }
        }
        let near_distance: Vec<f64> = patches
            .iter()
            .map(|p| cfg.near_distance.unwrap_or(cfg.near_factor * p.diameter()))
            .collect();
        let positions: Vec<Point3> = points.iter().map(|p| p.position).collect();
        let patch_ids: Vec<usize> = points.iter().map(|p| p.patch_id).collect();
        let weights: Vec<f64> = points.iter().map(|p| p.weight).collect();
        let mut sys = Self {
            k,
            cfg,
            patches,
            basis,
            points,
            positions,
            patch_ids,
            weights,
            near_distance,
            corrections: SparseMatrix::default(),
            fmm: None,
        };
        sys.corrections = sys.assemble_corrections()?;
        if cfg.backend == Backend::Fmm {
            sys.fmm = Some(FmmPlan::new(&sys.positions, &sys.patch_ids, k, &cfg.fmm)?);
        }
        Ok(sys)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn wavenumber(&self) -> WaveNumber {
        self.k
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn points(&self) -> &[QuadraturePoint] {
        &self.points
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn patches(&self) -> &[CurvilinearPatch] {
        &self.patches
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    /// Near distance of source patch `p`.
    pub fn near_distance(&self, p: usize) -> f64 {
        self.near_distance[p]
    }

    pub fn corrections(&self) -> &SparseMatrix {
        &self.corrections
    }

    pub fn fmm_stats(&self) -> Option<FmmStats> {
        self.fmm.as_ref().map(|f| f.stats())
    }

    pub fn points_per_patch(&self) -> usize {
        self.basis.len()
    }

    /// One-point entry `w_j G(r_i, r_j)`.
    #[inline]
    pub fn point_entry(&self, i: usize, j: usize) -> Complex64 {
        green_distance(vec3::dist(self.positions[i], self.positions[j]), self.k) * self.weights[j]
    }

    /// Whether the pair `(i, j)` on distinct patches is re-integrated.
    #[inline]
    pub fn is_near(&self, i: usize, j: usize) -> bool {
        self.cfg.mode == SingularityMode::SelfAndNear
            && vec3::dist(self.positions[i], self.positions[j]) <= self.near_distance[self.patch_ids[j]]
    }

    /// `∫ G(r_i, ·) L_m J` over the patch of target `i` for every node `m`.
    pub fn self_row(&self, i: usize) -> Result<[Complex64; 12]> {
        let p = &self.points[i];
        self_patch_row(p.interp_index, &self.patches[p.patch_id], &self.basis, self.k, self.cfg.self_rule)
    }

    /// `∫ G(r_i, ·) L_m J` over source patch `patch` for every node `m`.
    pub fn near_row(&self, i: usize, patch: usize) -> Result<[Complex64; 12]> {
        near_patch_row(self.positions[i], &self.patches[patch], &self.basis, self.k, self.cfg.near_rule)
    }

    fn assemble_corrections(&self) -> Result<SparseMatrix> {
        let n = self.len();
        let ni = self.points_per_patch();
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_start.push(0);
        let grid = if self.cfg.mode == SingularityMode::SelfAndNear {
            let h = self.near_distance.iter().cloned().fold(0.0, f64::max);
            (h > 0.0).then(|| PointGrid::new(&self.positions, h))
        } else {
            None
        };
        let mut cand = Vec::new();
        for i in 0..n {
            let pi = self.patch_ids[i];
            let first = pi * ni;
            if self.cfg.mode == SingularityMode::None {
                for j in first..first + ni {
                    if j != i {
                        cols.push(j as u32);
                        values.push(self.point_entry(i, j));
                    }
                }
            } else {
                let row = self.self_row(i)?;
                for m in 0..ni {
                    cols.push((first + m) as u32);
                    values.push(row[m]);
                }
            }
            if let Some(grid) = &grid {
                grid.around(&self.positions[i], &mut cand);
                let mut c = 0;
                while c < cand.len() {
                    let pj = self.patch_ids[cand[c]];
                    let mut end = c;
                    while end < cand.len() && self.patch_ids[cand[end]] == pj {
                        end += 1;
                    }
                    if pj != pi {
                        let near: Vec<usize> = cand[c..end].iter().copied().filter(|&j| self.is_near(i, j)).collect();
                        if !near.is_empty() {
                            let row = self.near_row(i, pj)?;
                            for j in near {
                                cols.push(j as u32);
                                values.push(row[self.points[j].interp_index] - self.point_entry(i, j));
                            }
                        }
                    }
                    c = end;
                }
            }
            row_start.push(cols.len());
        }
        Ok(SparseMatrix {
            dim: n,
            row_start,
            cols,
            values,
        })
    }

    /// `V_i = p_inc(r_i)`.
    pub fn assemble_rhs(&self, wave: &IncidentWave) -> Vec<Complex64> {
        self.positions.iter().map(|r| wave.pressure(*r)).collect()
    }

    /// `Z·x`.
    pub fn apply_operator(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.len();
        if x.len() != n {
            return Err(Error::Dimension { expected: n, got: x.len() });
        }
        let s: Vec<Complex64> = x.iter().zip(&self.weights).map(|(v, w)| v * w).collect();
        let mut y = match &self.fmm {
            Some(plan) => plan.evaluate(&s)?,
            None => direct_sum(&self.positions, &self.patch_ids, &s, self.k),
        };
        self.corrections.mul_add(x, &mut y);
        Ok(y)
    }

    /// Number of unknowns expected for `elements` patches.
    pub fn expected_unknowns(elements: usize, order: BasisOrder) -> usize {
        elements * order.points_per_patch()
    }
}

/// Relative 2-norm `‖a − b‖ / ‖b‖`.
pub fn relative_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    math::sqrt(num / den)
}

#[cfg(test)]
pub(crate) fn zeros(n: usize) -> Vec<Complex64> {
    alloc::vec![Complex64::new(0.0, 0.0); n]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::icosphere;

    fn system(mode: SingularityMode, backend: Backend) -> DiscreteSystem {
        let mesh = icosphere(1.0, 2).unwrap();
        let cfg = SystemConfig {
            mode,
            backend,
            ..Default::default()
        };
        DiscreteSystem::new(&mesh, WaveNumber::real(2.0), cfg).unwrap()
    }

    #[test]
    fn rhs_phases() {
        let w = IncidentWave::plus_z(WaveNumber::real(math::PI));
        assert_eq!(w.pressure([0.0; 3]), Complex64::new(1.0, 0.0));
        assert!((w.pressure([0.0, 0.0, 1.0]) - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!(IncidentWave::new([1.0, 1.0, 0.0], Complex64::new(1.0, 0.0), WaveNumber::real(1.0)).is_err());
    }

    #[test]
    fn unknown_count_follows_mesh() {
        let s = system(SingularityMode::SelfOnly, Backend::Direct);
        assert_eq!(s.len(), 6 * 80);
        assert!(s.weights().iter().sum::<f64>() > 12.0);
    }

    #[test]
    fn zero_maps_to_zero_and_modes_differ() {
        for mode in [SingularityMode::None, SingularityMode::SelfOnly, SingularityMode::SelfAndNear] {
            let s = system(mode, Backend::Direct);
            let y = s.apply_operator(&zeros(s.len())).unwrap();
            assert!(y.iter().all(|v| v.norm() == 0.0));
        }
        let a = system(SingularityMode::SelfOnly, Backend::Direct);
        let b = system(SingularityMode::SelfAndNear, Backend::Direct);
        assert!(b.corrections().nnz() > a.corrections().nnz());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let s = system(SingularityMode::None, Backend::Direct);
        assert!(matches!(s.apply_operator(&zeros(3)), Err(Error::Dimension { .. })));
    }
}
