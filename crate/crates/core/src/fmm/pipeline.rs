//! End-to-end FMM evaluation of `Σ_j q_j G(x_i, y_j)` over a point set.
//!
//! [`FmmPlan`] builds the octree, the interaction lists and every translation
//! operator once; [`FmmPlan::evaluate`] then runs P2M, M2M, M2L, L2L, L2P and
//! P2P for any strength vector. Pairs of points sharing a patch id are left
//! out of the direct part, so the result is the far-field portion of a
//! boundary-element matrix-vector product.
//!
//! The pass functions are public so that a caller holding several trees
//! (one per simulated rank) can drive the same arithmetic.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use super::expansion::{l2p, m2p, p2l, p2m, Workspace};
use super::traversal::{dual_tree_traversal, InteractionLists, TraversalConfig};
use super::translate::{TranslationKind, TranslationOp, TranslationScratch, Translator};
use super::tree::{build_tree, Body, Cell, Octree};
use crate::error::{Error, Result};
use crate::kernel::WaveNumber;
use crate::math;
use crate::special::coeff_len;
use crate::vec3::{self, Point3};

/// Working precision of the direct (P2P) part.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Precision {
    #[default]
    Double,
    Single,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FmmConfig {
    /// Expansion order; `None` runs [`calibrate_order`] with `tolerance`.
    pub order: Option<usize>,
    pub tolerance: f64,
    pub traversal: TraversalConfig,
    pub precision: Precision,
}

impl Default for FmmConfig {
    fn default() -> Self {
        Self {
            order: None,
            tolerance: 1e-5,
            traversal: TraversalConfig::default(),
            precision: Precision::Double,
        }
    }
}

/// Counters describing one plan.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FmmStats {
    pub bodies: usize,
    pub cells: usize,
    pub leaves: usize,
    pub depth: u32,
    pub order: usize,
    pub m2l_pairs: usize,
    pub p2p_pairs: usize,
    pub tasks: usize,
    pub operators: usize,
}

/// Point data of a tree in Morton order, structure-of-arrays.
#[derive(Clone, Debug, Default)]
pub struct PointSet {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub patch: Vec<usize>,
}

impl PointSet {
    pub fn from_bodies(bodies: &[Body]) -> Self {
        Self {
            x: bodies.iter().map(|b| b.position[0]).collect(),
            y: bodies.iter().map(|b| b.position[1]).collect(),
            z: bodies.iter().map(|b| b.position[2]).collect(),
            patch: bodies.iter().map(|b| b.patch_id).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    #[inline]
    pub fn position(&self, i: usize) -> Point3 {
        [self.x[i], self.y[i], self.z[i]]
    }
}

/// Smallest order whose cluster-to-cluster M2L error at the admissibility
/// limit drops below `tol`, for cells of radius `radius`.
pub fn calibrate_order(k: f64, theta: f64, radius: f64, tol: f64) -> Result<usize> {
    const MAX_ORDER: usize = 30;
    if !(k > 0.0 && radius > 0.0 && tol > 0.0 && theta > 0.0) {
        return Err(Error::Config("calibration needs positive k, radius, theta and tolerance".into()));
    }
    let hw = radius / math::sqrt(3.0);
    // A fixed low-discrepancy cloud in each cell.
    let halton = |i: usize, base: usize| {
        let (mut f, mut r, mut n) = (1.0, 0.0, i + 1);
        while n > 0 {
            f /= base as f64;
            r += f * (n % base) as f64;
            n /= base;
        }
        r
    };
    let cloud = |c: Point3| -> Vec<Point3> {
        (0..16)
            .map(|i| {
                [
                    c[0] + hw * (2.0 * halton(i, 2) - 1.0),
                    c[1] + hw * (2.0 * halton(i, 3) - 1.0),
                    c[2] + hw * (2.0 * halton(i, 5) - 1.0),
                ]
            })
            .collect()
    };
    let dir = {
        let d = [1.0, 0.35, 0.2];
        vec3::scale(d, 1.0 / vec3::norm(d))
    };
    let sc = [0.0; 3];
    let tc = vec3::scale(dir, 2.0 * radius / theta * (1.0 + 1e-9));
    let (src, trg) = (cloud(sc), cloud(tc));
    let q: Vec<Complex64> = (0..src.len()).map(|i| Complex64::new(1.0, 0.1 * i as f64 - 0.7)).collect();
    let kk = WaveNumber::real(k);
    let exact: Vec<Complex64> = trg
        .iter()
        .map(|x| {
            src.iter()
                .zip(&q)
                .map(|(y, qj)| qj * crate::kernel::green_distance(vec3::dist(*x, *y), kk))
                .sum()
        })
        .collect();
    for order in 1..=MAX_ORDER {
        let mut tr = Translator::new(order, k, radius * 1e-9)?;
        let op = tr.operator(TranslationKind::MultipoleToLocal, vec3::sub(tc, sc))?;
        let mut ws = Workspace::new(order);
        let mut m = vec![Complex64::new(0.0, 0.0); coeff_len(order)];
        for (y, qj) in src.iter().zip(&q) {
            p2m(k, sc, *y, *qj, &mut m, &mut ws);
        }
        let mut l = vec![Complex64::new(0.0, 0.0); coeff_len(order)];
        op.apply(&m, &mut l, &mut TranslationScratch::new(order));
        let err = trg
            .iter()
            .zip(&exact)
            .map(|(x, e)| (l2p(k, tc, *x, &l, &mut ws) - e).norm() / e.norm())
            .fold(0.0, f64::max);
        if err < tol {
            return Ok(order);
        }
    }
    Err(Error::Accuracy(alloc::format!("no order up to {MAX_ORDER} reaches {tol:e}")))
}

/// Cells whose multipole is needed: M2L sources and their descendants.
pub fn multipole_needs(cells: &[Cell], m2l: &[(usize, usize)]) -> Vec<bool> {
    let mut need = vec![false; cells.len()];
    for &(_, s) in m2l {
        need[s] = true;
    }
    propagate_down(cells, &mut need);
    need
}

/// Cells whose local expansion is needed: M2L targets and their descendants.
pub fn local_needs(cells: &[Cell], m2l: &[(usize, usize)]) -> Vec<bool> {
    let mut need = vec![false; cells.len()];
    for &(t, _) in m2l {
        need[t] = true;
    }
    propagate_down(cells, &mut need);
    need
}

fn propagate_down(cells: &[Cell], need: &mut [bool]) {
    // Cells are stored parent-before-child.
    for c in 0..cells.len() {
        if need[c] {
            for ch in cells[c].child_span.range() {
                need[ch] = true;
            }
        }
    }
}

/// Child-to-parent operators for every cell flagged in `need` (M2M) or the
/// parent-to-child operators (L2L).
pub fn shift_operators(
    translator: &mut Translator,
    cells: &[Cell],
    need: &[bool],
    kind: TranslationKind,
) -> Result<Vec<Option<Arc<TranslationOp>>>> {
    let mut ops = vec![None; cells.len()];
    for (c, cell) in cells.iter().enumerate() {
        let Some(parent) = cell.parent else { continue };
        let wanted = match kind {
            TranslationKind::MultipoleToMultipole => need[parent],
            _ => need[c] && need[parent],
        };
        if !wanted {
            continue;
        }
        let t = match kind {
            TranslationKind::MultipoleToMultipole => vec3::sub(cells[parent].center, cell.center),
            _ => vec3::sub(cell.center, cells[parent].center),
        };
        ops[c] = Some(translator.operator(kind, t)?);
    }
    Ok(ops)
}

/// One M2L operator per entry of `m2l`.
pub fn m2l_operators(
    translator: &mut Translator,
    targets: &[Cell],
    sources: &[Cell],
    m2l: &[(usize, usize)],
) -> Result<Vec<Arc<TranslationOp>>> {
    m2l.iter()
        .map(|&(t, s)| translator.operator(TranslationKind::MultipoleToLocal, vec3::sub(targets[t].center, sources[s].center)))
        .collect()
}

/// P2M at flagged leaves and M2M towards the root; returns the flat
/// multipole array, `coeff_len(order)` values per cell.
pub fn upward_pass(
    k: f64,
    order: usize,
    cells: &[Cell],
    points: &PointSet,
    strengths: &[Complex64],
    need: &[bool],
    m2m: &[Option<Arc<TranslationOp>>],
) -> Vec<Complex64> {
    let nc = coeff_len(order);
    let mut mp = vec![Complex64::new(0.0, 0.0); cells.len() * nc];
    let mut ws = Workspace::new(order);
    let mut scratch = TranslationScratch::new(order);
    let mut tmp = vec![Complex64::new(0.0, 0.0); nc];
    for c in (0..cells.len()).rev() {
        if !need[c] {
            continue;
        }
        let cell = &cells[c];
        if cell.is_leaf() {
            let m = &mut mp[c * nc..(c + 1) * nc];
            for i in cell.body_span.range() {
                p2m(k, cell.center, points.position(i), strengths[i], m, &mut ws);
            }
        } else {
            tmp.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for ch in cell.child_span.range() {
                if let Some(op) = &m2m[ch] {
                    op.apply(&mp[ch * nc..(ch + 1) * nc], &mut tmp, &mut scratch);
                }
            }
            mp[c * nc..(c + 1) * nc].copy_from_slice(&tmp);
        }
    }
    mp
}

/// Source side of an interaction pass.
pub struct SourceView<'a> {
    pub cells: &'a [Cell],
    pub points: &'a PointSet,
    pub strengths: &'a [Complex64],
    pub multipoles: &'a [Complex64],
}

/// Apply the M2L list into `locals` and the P2P list into `out`, both indexed
/// by target tree position.
#[allow(clippy::too_many_arguments)]
pub fn interaction_pass(
    k: f64,
    order: usize,
    lists: &InteractionLists,
    m2l_ops: &[Arc<TranslationOp>],
    targets: &[Cell],
    target_points: &PointSet,
    sources: &SourceView<'_>,
    locals: &mut [Complex64],
    out: &mut [Complex64],
    precision: Precision,
) {
    let nc = coeff_len(order);
    let mut scratch = TranslationScratch::new(order);
    for (&(t, s), op) in lists.m2l.iter().zip(m2l_ops) {
        op.apply(
            &sources.multipoles[s * nc..(s + 1) * nc],
            &mut locals[t * nc..(t + 1) * nc],
            &mut scratch,
        );
    }
    for &(t, s) in &lists.p2p {
        let (tr, sr) = (targets[t].body_span.range(), sources.cells[s].body_span.range());
        match precision {
            Precision::Double => p2p_block(k, target_points, tr, sources.points, sources.strengths, sr, out),
            Precision::Single => p2p_block_f32(k, target_points, tr, sources.points, sources.strengths, sr, out),
        }
    }
}

fn p2p_block(
    k: f64,
    tp: &PointSet,
    tr: core::ops::Range<usize>,
    sp: &PointSet,
    q: &[Complex64],
    sr: core::ops::Range<usize>,
    out: &mut [Complex64],
) {
    let inv4pi = 1.0 / math::FOUR_PI;
    for i in tr {
        let (xi, yi, zi, pi) = (tp.x[i], tp.y[i], tp.z[i], tp.patch[i]);
        let (mut re, mut im) = (0.0, 0.0);
        for j in sr.clone() {
            if sp.patch[j] == pi {
                continue;
            }
            let (dx, dy, dz) = (xi - sp.x[j], yi - sp.y[j], zi - sp.z[j]);
            let r2 = dx * dx + dy * dy + dz * dz;
            if r2 == 0.0 {
                continue;
            }
            let r = math::sqrt(r2);
            let (s, c) = math::sin_cos(k * r);
            let a = inv4pi / r;
            let (gr, gi) = (a * c, a * s);
            re += q[j].re * gr - q[j].im * gi;
            im += q[j].re * gi + q[j].im * gr;
        }
        out[i] += Complex64::new(re, im);
    }
}

fn p2p_block_f32(
    k: f64,
    tp: &PointSet,
    tr: core::ops::Range<usize>,
    sp: &PointSet,
    q: &[Complex64],
    sr: core::ops::Range<usize>,
    out: &mut [Complex64],
) {
    let inv4pi = (1.0 / math::FOUR_PI) as f32;
    let kf = k as f32;
    for i in tr {
        let (xi, yi, zi, pi) = (tp.x[i], tp.y[i], tp.z[i], tp.patch[i]);
        let (mut re, mut im) = (0.0f32, 0.0f32);
        for j in sr.clone() {
            if sp.patch[j] == pi {
                continue;
            }
            let dx = (xi - sp.x[j]) as f32;
            let dy = (yi - sp.y[j]) as f32;
            let dz = (zi - sp.z[j]) as f32;
            let r2 = dx * dx + dy * dy + dz * dz;
            if r2 == 0.0 {
                continue;
            }
            let r = math::sqrtf(r2);
            let (s, c) = (math::sinf(kf * r), math::cosf(kf * r));
            let a = inv4pi / r;
            let (qr, qi) = (q[j].re as f32, q[j].im as f32);
            re += qr * a * c - qi * a * s;
            im += qr * a * s + qi * a * c;
        }
        out[i] += Complex64::new(re as f64, im as f64);
    }
}

/// L2L towards the leaves and L2P at flagged leaves, adding into `out`.
#[allow(clippy::too_many_arguments)]
pub fn downward_pass(
    k: f64,
    order: usize,
    cells: &[Cell],
    points: &PointSet,
    locals: &mut [Complex64],
    need: &[bool],
    l2l: &[Option<Arc<TranslationOp>>],
    out: &mut [Complex64],
) {
    let nc = coeff_len(order);
    let mut ws = Workspace::new(order);
    let mut scratch = TranslationScratch::new(order);
    for c in 0..cells.len() {
        if !need[c] {
            continue;
        }
        let cell = &cells[c];
        if let (Some(parent), Some(op)) = (cell.parent, &l2l[c]) {
            let (head, tail) = locals.split_at_mut(c * nc);
            op.apply(&head[parent * nc..(parent + 1) * nc], &mut tail[..nc], &mut scratch);
        }
        if cell.is_leaf() {
            let l = &locals[c * nc..(c + 1) * nc];
            for i in cell.body_span.range() {
                out[i] += l2p(k, cell.center, points.position(i), l, &mut ws);
            }
        }
    }
}

/// Evaluate one multipole at a point; used by diagnostics.
pub fn evaluate_multipole(k: f64, order: usize, center: Point3, x: Point3, m: &[Complex64]) -> Complex64 {
    m2p(k, center, x, m, &mut Workspace::new(order))
}

/// Local expansion about `center` of one point source; used by diagnostics.
pub fn local_from_source(k: f64, order: usize, center: Point3, y: Point3, q: Complex64) -> Vec<Complex64> {
    let mut l = vec![Complex64::new(0.0, 0.0); coeff_len(order)];
    p2l(k, center, y, q, &mut l, &mut Workspace::new(order));
    l
}

/// A reusable single-domain FMM for fixed points and wavenumber.
#[derive(Clone, Debug)]
pub struct FmmPlan {
    k: f64,
    order: usize,
    precision: Precision,
    tree: Octree,
    points: PointSet,
    lists: InteractionLists,
    need_m: Vec<bool>,
    need_l: Vec<bool>,
    m2m: Vec<Option<Arc<TranslationOp>>>,
    l2l: Vec<Option<Arc<TranslationOp>>>,
    m2l: Vec<Arc<TranslationOp>>,
    operators: usize,
}

impl FmmPlan {
    /// Plan for sources and targets at `positions`; points sharing a patch id
    /// do not interact. The FMM needs a real, positive wavenumber.
    pub fn new(positions: &[Point3], patch_ids: &[usize], k: WaveNumber, cfg: &FmmConfig) -> Result<Self> {
        if !k.is_real() || !(k.wave_r > 0.0) {
            return Err(Error::Config("the FMM supports real positive wavenumbers only".into()));
        }
        if positions.len() != patch_ids.len() {
            return Err(Error::Dimension {
                expected: positions.len(),
                got: patch_ids.len(),
            });
        }
        cfg.traversal.validate()?;
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite position".into()));
        }
        let bodies: Vec<Body> = positions
            .iter()
            .zip(patch_ids)
            .enumerate()
            .map(|(i, (p, &id))| Body::new(*p, Complex64::new(0.0, 0.0), id, i))
            .collect();
        let tree = build_tree(bodies, cfg.traversal.ncrit, None)?;
        let lists = dual_tree_traversal(&tree.cells, 0, &tree.cells, 0, &cfg.traversal)?;
        let kr = k.wave_r;
        let order = match cfg.order {
            Some(p) => p,
            None => {
                let radius = lists
                    .m2l
                    .iter()
                    .map(|&(t, s)| tree.cells[t].radius.max(tree.cells[s].radius))
                    .fold(0.0, f64::max);
                if radius > 0.0 {
                    calibrate_order(kr, cfg.traversal.theta, radius, cfg.tolerance)?
                } else {
                    1
                }
            }
        };
        let need_m = multipole_needs(&tree.cells, &lists.m2l);
        let need_l = local_needs(&tree.cells, &lists.m2l);
        let mut translator = Translator::new(order, kr, tree.bounds.half_width * 1e-10)?;
        let m2m = shift_operators(&mut translator, &tree.cells, &need_m, TranslationKind::MultipoleToMultipole)?;
        let l2l = shift_operators(&mut translator, &tree.cells, &need_l, TranslationKind::LocalToLocal)?;
        let m2l = m2l_operators(&mut translator, &tree.cells, &tree.cells, &lists.m2l)?;
        let points = PointSet::from_bodies(&tree.bodies);
        Ok(Self {
            k: kr,
            order,
            precision: cfg.precision,
            points,
            lists,
            need_m,
            need_l,
            m2m,
            l2l,
            m2l,
            operators: translator.cached_operators(),
            tree,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn tree(&self) -> &Octree {
        &self.tree
    }

    pub fn lists(&self) -> &InteractionLists {
        &self.lists
    }

    pub fn stats(&self) -> FmmStats {
        FmmStats {
            bodies: self.points.len(),
            cells: self.tree.cells.len(),
            leaves: self.tree.leaves().count(),
            depth: self.tree.depth(),
            order: self.order,
            m2l_pairs: self.lists.m2l.len(),
            p2p_pairs: self.lists.p2p.len(),
            tasks: self.lists.tasks.len(),
            operators: self.operators,
        }
    }

    /// `out_i = Σ_{j: patch_j ≠ patch_i} q_j G(x_i, x_j)`, approximated.
    pub fn evaluate(&self, strengths: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.points.len();
        if strengths.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: strengths.len(),
            });
        }
        let q: Vec<Complex64> = self.tree.bodies.iter().map(|b| strengths[b.index]).collect();
        let cells = &self.tree.cells;
        let mp = upward_pass(self.k, self.order, cells, &self.points, &q, &self.need_m, &self.m2m);
        let mut locals = vec![Complex64::new(0.0, 0.0); mp.len()];
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        let src = SourceView {
            cells,
            points: &self.points,
            strengths: &q,
            multipoles: &mp,
        };
        interaction_pass(
            self.k,
            self.order,
            &self.lists,
            &self.m2l,
            cells,
            &self.points,
            &src,
            &mut locals,
            &mut acc,
            self.precision,
        );
        downward_pass(self.k, self.order, cells, &self.points, &mut locals, &self.need_l, &self.l2l, &mut acc);
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (b, v) in self.tree.bodies.iter().zip(acc) {
            out[b.index] = v;
        }
        Ok(out)
    }
}

/// Direct `O(N²)` reference for [`FmmPlan::evaluate`].
pub fn direct_sum(positions: &[Point3], patch_ids: &[usize], strengths: &[Complex64], k: WaveNumber) -> Vec<Complex64> {
    positions
        .iter()
        .zip(patch_ids)
        .map(|(x, pi)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for ((y, pj), q) in positions.iter().zip(patch_ids).zip(strengths) {
                let r = vec3::dist(*x, *y);
                if pi != pj && r > 0.0 {
                    acc += q * crate::kernel::green_distance(r, k);
                }
            }
            acc
        })
        .collect()
}
