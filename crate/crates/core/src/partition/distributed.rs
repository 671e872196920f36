//! Simulated distributed FMM with locally essential trees.
//!
//! All ranks share one global octree geometry. Rank `r` holds the subset of
//! global cells that contain its bodies; a cell of this local tree is a leaf
//! exactly when the global cell is, so traversals over local trees make the
//! same decisions as the global traversal and visit the global pairs
//! restricted to the participating bodies.
//!
//! A sender cannot see the receiver's tree, only its partition box. It
//! traverses the global cells meeting that box against its own local tree
//! and ships the source cells that traversal touches: multipoles for cells
//! used in M2L, bodies for leaves used in P2P, and the ancestors needed to
//! rebuild a tree. The receiver's own traversal only ever reaches pairs the
//! sender's traversal reached, so the shipped tree is sufficient.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use super::exchange::{hsdx_exchange, CommGraph, Demand, ExchangeStats, Item};
use super::orb::{Aabb, PartitionPlan};
use crate::error::{Error, Result};
use crate::fmm::pipeline::{
    calibrate_order, downward_pass, interaction_pass, m2l_operators, shift_operators, upward_pass, PointSet, SourceView,
};
use crate::fmm::translate::{TranslationKind, TranslationOp, Translator};
use crate::fmm::traversal::{dual_tree_traversal, InteractionLists, TraversalConfig};
use crate::fmm::tree::{build_tree, make_cell, Body, Cell, Octree, Span};
use crate::fmm::{FmmConfig, Precision};
use crate::kernel::WaveNumber;
use crate::math;
use crate::special::coeff_len;
use crate::vec3::Point3;

/// Serialized size of a cell header (key, level, centre, radius, flags).
pub const CELL_HEADER_BYTES: u64 = 64;
/// Serialized size of a body (position, strength, patch id).
pub const BODY_BYTES: u64 = 48;

/// The part of the global tree owned by one rank.
#[derive(Clone, Debug)]
pub struct RankTree {
    pub rank: usize,
    /// Breadth-first, children contiguous; body spans index `bodies`.
    pub cells: Vec<Cell>,
    /// Global cell index of every local cell.
    pub global_ids: Vec<usize>,
    /// Original index of every local body, in tree order.
    pub bodies: Vec<usize>,
    pub points: PointSet,
}

/// Cells of `global` reachable from the root through cells accepted by
/// `keep`, with body spans counted over the bodies accepted by `body`.
fn restrict(global: &Octree, keep: impl Fn(usize) -> bool, body: impl Fn(&Body) -> bool) -> (Vec<Cell>, Vec<usize>) {
    let mut prefix = Vec::with_capacity(global.bodies.len() + 1);
    prefix.push(0usize);
    for b in &global.bodies {
        prefix.push(prefix.last().unwrap() + body(b) as usize);
    }
    let span = |c: &Cell| {
        let first = prefix[c.body_span.first];
        Span::new(first, prefix[c.body_span.first + c.body_span.count] - first)
    };
    let mut cells = Vec::new();
    let mut ids = Vec::new();
    if !keep(0) {
        return (cells, ids);
    }
    let mut root = global.cells[0];
    root.body_span = span(&root);
    root.parent = None;
    cells.push(root);
    ids.push(0);
    let mut i = 0;
    while i < cells.len() {
        let g = ids[i];
        let first = cells.len();
        for ch in global.cells[g].child_span.range() {
            if keep(ch) {
                let mut c = global.cells[ch];
                c.body_span = span(&c);
                c.child_span = Span::default();
                c.parent = Some(i);
                cells.push(c);
                ids.push(ch);
            }
        }
        cells[i].child_span = Span::new(first, cells.len() - first);
        i += 1;
    }
    (cells, ids)
}

/// One [`RankTree`] per rank; `assignment` is indexed by original body index.
pub fn local_trees(global: &Octree, assignment: &[usize], nranks: usize) -> Result<Vec<RankTree>> {
    if assignment.len() != global.bodies.len() {
        return Err(Error::Dimension {
            expected: global.bodies.len(),
            got: assignment.len(),
        });
    }
    if assignment.iter().any(|&r| r >= nranks) {
        return Err(Error::Precondition("assignment names a rank out of range".into()));
    }
    let mut present = vec![vec![false; global.cells.len()]; nranks];
    for (c, cell) in global.cells.iter().enumerate() {
        for b in &global.bodies[cell.body_span.range()] {
            present[assignment[b.index]][c] = true;
        }
    }
    let mut out = Vec::with_capacity(nranks);
    for r in 0..nranks {
        let (cells, global_ids) = restrict(global, |c| present[r][c], |b| assignment[b.index] == r);
        let mine: Vec<Body> = global.bodies.iter().filter(|b| assignment[b.index] == r).copied().collect();
        if cells.is_empty() {
            return Err(Error::Precondition(alloc::format!("rank {r} owns no bodies")));
        }
        out.push(RankTree {
            rank: r,
            cells,
            global_ids,
            bodies: mine.iter().map(|b| b.index).collect(),
            points: PointSet::from_bodies(&mine),
        });
    }
    Ok(out)
}

/// Global cells meeting `region`, as a target tree.
pub fn region_tree(global: &Octree, region: &Aabb) -> (Vec<Cell>, Vec<usize>) {
    restrict(
        global,
        |c| {
            let cell = &global.cells[c];
            region.meets_cube(cell.center, cell.radius / math::sqrt(3.0))
        },
        |_| true,
    )
}

/// What a sender ships for one source cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LetEntry {
    /// Index into the sender's local tree.
    pub local: usize,
    pub multipole: bool,
    pub bodies: bool,
}

/// The cells of the sender's tree that one receiver needs, in breadth-first
/// order and closed under taking parents.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LetManifest {
    pub owner: usize,
    pub dest: usize,
    pub entries: Vec<LetEntry>,
}

impl LetManifest {
    /// Exchange items: one header per cell plus multipole and body blocks.
    /// Item ids are unique per global cell and kind.
    pub fn items(&self, sender: &RankTree, order: usize) -> Vec<Item> {
        let mut out = Vec::with_capacity(self.entries.len() * 2);
        for e in &self.entries {
            let g = sender.global_ids[e.local] as u64;
            out.push(Item {
                id: 3 * g,
                bytes: CELL_HEADER_BYTES,
            });
            if e.multipole {
                out.push(Item {
                    id: 3 * g + 1,
                    bytes: 16 * coeff_len(order) as u64,
                });
            }
            if e.bodies {
                out.push(Item {
                    id: 3 * g + 2,
                    bytes: BODY_BYTES * sender.cells[e.local].body_span.count as u64,
                });
            }
        }
        out
    }
}

/// Plan what `sender` must ship to the owner of `dest_box`, given the global
/// cells meeting that box (`region`, from [`region_tree`]).
pub fn let_manifest(region: &[Cell], sender: &RankTree, dest: usize, cfg: &TraversalConfig) -> Result<LetManifest> {
    let mut flags = vec![(false, false, false); sender.cells.len()];
    if !region.is_empty() {
        let lists = dual_tree_traversal(region, 0, &sender.cells, 0, cfg)?;
        for &(_, s) in &lists.m2l {
            flags[s].1 = true;
        }
        for &(_, s) in &lists.p2p {
            flags[s].2 = true;
        }
    }
    for c in (0..sender.cells.len()).rev() {
        let f = flags[c];
        if f.0 || f.1 || f.2 {
            flags[c].0 = true;
            if let Some(p) = sender.cells[c].parent {
                flags[p].0 = true;
            }
        }
    }
    Ok(LetManifest {
        owner: sender.rank,
        dest,
        entries: flags
            .iter()
            .enumerate()
            .filter(|(_, f)| f.0)
            .map(|(local, f)| LetEntry {
                local,
                multipole: f.1,
                bodies: f.2,
            })
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LetCell {
    pub key: u64,
    pub level: u32,
    pub multipole: Option<Vec<Complex64>>,
    /// `(position, patch id, strength)` of the sender's bodies in the cell.
    pub bodies: Vec<(Point3, usize, Complex64)>,
}

/// Data of a locally essential tree in transit.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LetPayload {
    pub owner: usize,
    pub dest: usize,
    pub order: usize,
    pub cells: Vec<LetCell>,
}

/// Fill a manifest with the sender's multipoles (flat, per local cell) and
/// strengths (tree order).
pub fn extract_let(
    manifest: &LetManifest,
    sender: &RankTree,
    multipoles: &[Complex64],
    strengths: &[Complex64],
    order: usize,
) -> Result<LetPayload> {
    let nc = coeff_len(order);
    if multipoles.len() != sender.cells.len() * nc {
        return Err(Error::Dimension {
            expected: sender.cells.len() * nc,
            got: multipoles.len(),
        });
    }
    if strengths.len() != sender.bodies.len() {
        return Err(Error::Dimension {
            expected: sender.bodies.len(),
            got: strengths.len(),
        });
    }
    let cells = manifest
        .entries
        .iter()
        .map(|e| {
            let c = &sender.cells[e.local];
            LetCell {
                key: c.key,
                level: c.level,
                multipole: e.multipole.then(|| multipoles[e.local * nc..(e.local + 1) * nc].to_vec()),
                bodies: if e.bodies {
                    c.body_span
                        .range()
                        .map(|i| (sender.points.position(i), sender.points.patch[i], strengths[i]))
                        .collect()
                } else {
                    Vec::new()
                },
            }
        })
        .collect();
    Ok(LetPayload {
        owner: manifest.owner,
        dest: manifest.dest,
        order,
        cells,
    })
}

/// A received tree, ready to act as the source side of an interaction pass.
#[derive(Clone, Debug)]
pub struct LetTree {
    pub owner: usize,
    pub cells: Vec<Cell>,
    pub points: PointSet,
    pub strengths: Vec<Complex64>,
    pub multipoles: Vec<Complex64>,
    has_multipole: Vec<bool>,
}

impl LetTree {
    fn build(payload: &LetPayload, bounds: &crate::fmm::Bounds) -> Result<Self> {
        let bad = |m: &str| Error::Structural(alloc::format!("LET from rank {}: {m}", payload.owner));
        let nc = coeff_len(payload.order);
        let mut cells: Vec<Cell> = Vec::with_capacity(payload.cells.len());
        let mut index: BTreeMap<(u32, u64), usize> = BTreeMap::new();
        let mut bodies = Vec::new();
        let mut strengths = Vec::new();
        let mut multipoles = vec![Complex64::new(0.0, 0.0); payload.cells.len() * nc];
        let mut has_multipole = vec![false; payload.cells.len()];
        for (i, c) in payload.cells.iter().enumerate() {
            let parent = if i == 0 {
                if c.level != 0 {
                    return Err(bad("first cell is not the root"));
                }
                None
            } else {
                let p = *index
                    .get(&(c.level.wrapping_sub(1), c.key >> 3))
                    .ok_or_else(|| bad("cell without parent"))?;
                let ps = &mut cells[p].child_span;
                if ps.is_empty() {
                    *ps = Span::new(i, 1);
                } else if ps.first + ps.count == i {
                    ps.count += 1;
                } else {
                    return Err(bad("children are not contiguous"));
                }
                Some(p)
            };
            if index.insert((c.level, c.key), i).is_some() {
                return Err(bad("duplicate cell"));
            }
            let span = Span::new(bodies.len(), c.bodies.len());
            for (j, &(pos, patch, q)) in c.bodies.iter().enumerate() {
                bodies.push(Body::new(pos, q, patch, span.first + j));
                strengths.push(q);
            }
            if let Some(m) = &c.multipole {
                if m.len() != nc {
                    return Err(bad("multipole of the wrong order"));
                }
                multipoles[i * nc..(i + 1) * nc].copy_from_slice(m);
                has_multipole[i] = true;
            }
            cells.push(make_cell(bounds, c.key, c.level, span, parent));
        }
        Ok(Self {
            owner: payload.owner,
            cells,
            points: PointSet::from_bodies(&bodies),
            strengths,
            multipoles,
            has_multipole,
        })
    }

    /// Check that `lists` only asks for data the tree carries.
    fn check(&self, lists: &InteractionLists) -> Result<()> {
        for &(_, s) in &lists.m2l {
            if !self.has_multipole[s] {
                return Err(Error::Structural(alloc::format!("LET from rank {} lacks a multipole", self.owner)));
            }
        }
        for &(_, s) in &lists.p2p {
            if self.cells[s].body_span.is_empty() {
                return Err(Error::Structural(alloc::format!("LET from rank {} lacks bodies", self.owner)));
            }
        }
        Ok(())
    }
}

/// Received trees of one rank, keyed by (owner rank, root key).
#[derive(Clone, Debug)]
pub struct LetForest {
    pub rank: usize,
    bounds: crate::fmm::Bounds,
    pub trees: BTreeMap<(usize, u64), LetTree>,
}

impl LetForest {
    pub fn new(rank: usize, bounds: crate::fmm::Bounds) -> Self {
        Self {
            rank,
            bounds,
            trees: BTreeMap::new(),
        }
    }
}

/// Attach a received payload to `forest`.
pub fn graft_let(forest: &mut LetForest, payload: &LetPayload) -> Result<()> {
    if payload.owner == forest.rank {
        return Err(Error::Structural(alloc::format!(
            "rank {} received a LET from itself",
            forest.rank
        )));
    }
    if payload.dest != forest.rank {
        return Err(Error::Structural(alloc::format!(
            "LET for rank {} delivered to rank {}",
            payload.dest, forest.rank
        )));
    }
    let root = payload.cells.first().ok_or_else(|| Error::Structural("empty LET".into()))?.key;
    let key = (payload.owner, root);
    if forest.trees.contains_key(&key) {
        return Err(Error::Structural(alloc::format!(
            "second LET from rank {} with root {root}",
            payload.owner
        )));
    }
    let tree = LetTree::build(payload, &forest.bounds)?;
    forest.trees.insert(key, tree);
    Ok(())
}

/// Interaction lists and operators of one (target rank, source rank) pair.
#[derive(Clone, Debug)]
struct PairPlan {
    lists: InteractionLists,
    ops: Vec<Arc<TranslationOp>>,
}

/// Per-rank counters of a distributed evaluation.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RankStats {
    pub bodies: usize,
    pub cells: usize,
    pub m2l_local: usize,
    pub m2l_remote: usize,
    pub p2p_local: usize,
    pub p2p_remote: usize,
    pub let_bytes_received: u64,
}

/// Sequential simulation of the distributed FMM over the ranks of a partition.
#[derive(Clone, Debug)]
pub struct DistributedFmm {
    k: f64,
    order: usize,
    precision: Precision,
    global: Octree,
    ranks: Vec<RankTree>,
    manifests: Vec<Vec<Option<LetManifest>>>,
    pairs: Vec<Vec<PairPlan>>,
    m2m: Vec<Vec<Option<Arc<TranslationOp>>>>,
    l2l: Vec<Vec<Option<Arc<TranslationOp>>>>,
}

impl DistributedFmm {
    pub fn new(positions: &[Point3], patch_ids: &[usize], k: WaveNumber, cfg: &FmmConfig, plan: &PartitionPlan) -> Result<Self> {
        if !k.is_real() || !(k.wave_r > 0.0) {
            return Err(Error::Config("the FMM supports real positive wavenumbers only".into()));
        }
        if positions.len() != patch_ids.len() || positions.len() != plan.assignment.len() {
            return Err(Error::Dimension {
                expected: positions.len(),
                got: patch_ids.len().min(plan.assignment.len()),
            });
        }
        cfg.traversal.validate()?;
        let bodies: Vec<Body> = positions
            .iter()
            .zip(patch_ids)
            .enumerate()
            .map(|(i, (p, &id))| Body::new(*p, Complex64::new(0.0, 0.0), id, i))
            .collect();
        let global = build_tree(bodies, cfg.traversal.ncrit, None)?;
        let nranks = plan.nranks;
        let ranks = local_trees(&global, &plan.assignment, nranks)?;
        let order = match cfg.order {
            Some(p) => p,
            None => {
                let lists = dual_tree_traversal(&global.cells, 0, &global.cells, 0, &cfg.traversal)?;
                let radius = lists
                    .m2l
                    .iter()
                    .map(|&(t, s)| global.cells[t].radius.max(global.cells[s].radius))
                    .fold(0.0, f64::max);
                if radius > 0.0 {
                    calibrate_order(k.wave_r, cfg.traversal.theta, radius, cfg.tolerance)?
                } else {
                    1
                }
            }
        };
        let mut translator = Translator::new(order, k.wave_r, global.bounds.half_width * 1e-10)?;
        let mut m2m = Vec::with_capacity(nranks);
        let mut l2l = Vec::with_capacity(nranks);
        for rt in &ranks {
            let all = vec![true; rt.cells.len()];
            m2m.push(shift_operators(&mut translator, &rt.cells, &all, TranslationKind::MultipoleToMultipole)?);
            l2l.push(shift_operators(&mut translator, &rt.cells, &all, TranslationKind::LocalToLocal)?);
        }
        let mut manifests = vec![vec![None; nranks]; nranks];
        let mut pairs = Vec::with_capacity(nranks);
        for r in 0..nranks {
            let (region, _) = region_tree(&global, &plan.boxes[r]);
            let mut row = Vec::with_capacity(nranks);
            for q in 0..nranks {
                let lists = if q == r {
                    dual_tree_traversal(&ranks[r].cells, 0, &ranks[r].cells, 0, &cfg.traversal)?
                } else {
                    let man = let_manifest(&region, &ranks[q], r, &cfg.traversal)?;
                    let skeleton = skeleton_payload(&man, &ranks[q], order);
                    let tree = LetTree::build(&skeleton, &global.bounds)?;
                    let lists = dual_tree_traversal(&ranks[r].cells, 0, &tree.cells, 0, &cfg.traversal)?;
                    tree.check(&lists)?;
                    manifests[q][r] = Some(man);
                    lists
                };
                let source_cells: Vec<Cell> = if q == r {
                    ranks[r].cells.clone()
                } else {
                    skeleton_cells(manifests[q][r].as_ref().unwrap(), &ranks[q])
                };
                let ops = m2l_operators(&mut translator, &ranks[r].cells, &source_cells, &lists.m2l)?;
                row.push(PairPlan { lists, ops });
            }
            pairs.push(row);
        }
        Ok(Self {
            k: k.wave_r,
            order,
            precision: cfg.precision,
            global,
            ranks,
            manifests,
            pairs,
            m2m,
            l2l,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nranks(&self) -> usize {
        self.ranks.len()
    }

    pub fn global(&self) -> &Octree {
        &self.global
    }

    pub fn rank_trees(&self) -> &[RankTree] {
        &self.ranks
    }

    /// What every rank must send to every other rank.
    pub fn demands(&self) -> Vec<Demand> {
        let mut out = Vec::new();
        for (q, row) in self.manifests.iter().enumerate() {
            for (r, m) in row.iter().enumerate() {
                if let Some(m) = m {
                    out.push(Demand {
                        src: q,
                        dst: r,
                        items: m.items(&self.ranks[q], self.order),
                    });
                }
            }
        }
        out
    }

    pub fn rank_stats(&self) -> Vec<RankStats> {
        let demands = self.demands();
        let mut stats: Vec<RankStats> = self
            .ranks
            .iter()
            .map(|t| RankStats {
                bodies: t.bodies.len(),
                cells: t.cells.len(),
                ..Default::default()
            })
            .collect();
        for (r, row) in self.pairs.iter().enumerate() {
            for (q, p) in row.iter().enumerate() {
                if q == r {
                    stats[r].m2l_local += p.lists.m2l.len();
                    stats[r].p2p_local += p.lists.p2p.len();
                } else {
                    stats[r].m2l_remote += p.lists.m2l.len();
                    stats[r].p2p_remote += p.lists.p2p.len();
                }
            }
        }
        for d in demands {
            stats[d.dst].let_bytes_received += d.items.iter().map(|i| i.bytes).sum::<u64>();
        }
        stats
    }

    /// Same sum as [`crate::fmm::FmmPlan::evaluate`], computed rank by rank
    /// from local data and received trees.
    pub fn evaluate(&self, strengths: &[Complex64]) -> Result<Vec<Complex64>> {
        self.evaluate_inner(strengths, None)
    }

    /// [`evaluate`](Self::evaluate) with every tree shipped by an HSDX
    /// exchange over `graph`.
    pub fn evaluate_routed(
        &self,
        strengths: &[Complex64],
        graph: &CommGraph,
        hops: impl Fn(usize, usize) -> Result<u32>,
    ) -> Result<(Vec<Complex64>, ExchangeStats)> {
        if graph.len() != self.ranks.len() {
            return Err(Error::Dimension {
                expected: self.ranks.len(),
                got: graph.len(),
            });
        }
        let ex = hsdx_exchange(graph, &self.demands(), hops)?;
        let out = self.evaluate_delivered(strengths, &ex.delivered)?;
        Ok((out, ex.stats))
    }

    /// Evaluate with the `(source rank, item id)` pairs that reached each
    /// rank; a tree is grafted only when all of its items arrived.
    pub fn evaluate_delivered(&self, strengths: &[Complex64], delivered: &[BTreeSet<(usize, u64)>]) -> Result<Vec<Complex64>> {
        if delivered.len() != self.ranks.len() {
            return Err(Error::Dimension {
                expected: self.ranks.len(),
                got: delivered.len(),
            });
        }
        self.evaluate_inner(strengths, Some(delivered))
    }

    fn evaluate_inner(&self, strengths: &[Complex64], delivered: Option<&[BTreeSet<(usize, u64)>]>) -> Result<Vec<Complex64>> {
        let n = self.global.bodies.len();
        if strengths.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: strengths.len(),
            });
        }
        let nranks = self.ranks.len();
        let local_q: Vec<Vec<Complex64>> = self
            .ranks
            .iter()
            .map(|t| t.bodies.iter().map(|&i| strengths[i]).collect())
            .collect();
        let multipoles: Vec<Vec<Complex64>> = (0..nranks)
            .map(|q| {
                let t = &self.ranks[q];
                let all = vec![true; t.cells.len()];
                upward_pass(self.k, self.order, &t.cells, &t.points, &local_q[q], &all, &self.m2m[q])
            })
            .collect();
        let mut forests: Vec<LetForest> = (0..nranks).map(|r| LetForest::new(r, self.global.bounds)).collect();
        for q in 0..nranks {
            for r in 0..nranks {
                if let Some(m) = &self.manifests[q][r] {
                    if let Some(got) = delivered {
                        if let Some(it) = m.items(&self.ranks[q], self.order).iter().find(|it| !got[r].contains(&(q, it.id))) {
                            return Err(Error::Structural(alloc::format!("item {} from rank {q} never reached rank {r}", it.id)));
                        }
                    }
                    let payload = extract_let(m, &self.ranks[q], &multipoles[q], &local_q[q], self.order)?;
                    graft_let(&mut forests[r], &payload)?;
                }
            }
        }
        let nc = coeff_len(self.order);
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for r in 0..nranks {
            let t = &self.ranks[r];
            let mut locals = vec![Complex64::new(0.0, 0.0); t.cells.len() * nc];
            let mut acc = vec![Complex64::new(0.0, 0.0); t.bodies.len()];
            for q in 0..nranks {
                let pair = &self.pairs[r][q];
                let view = if q == r {
                    SourceView {
                        cells: &t.cells,
                        points: &t.points,
                        strengths: &local_q[r],
                        multipoles: &multipoles[r],
                    }
                } else {
                    let tree = forests[r]
                        .trees
                        .get(&(q, 0))
                        .ok_or_else(|| Error::Structural(alloc::format!("rank {r} has no LET from rank {q}")))?;
                    SourceView {
                        cells: &tree.cells,
                        points: &tree.points,
                        strengths: &tree.strengths,
                        multipoles: &tree.multipoles,
                    }
                };
                interaction_pass(
                    self.k,
                    self.order,
                    &pair.lists,
                    &pair.ops,
                    &t.cells,
                    &t.points,
                    &view,
                    &mut locals,
                    &mut acc,
                    self.precision,
                );
            }
            let all = vec![true; t.cells.len()];
            downward_pass(self.k, self.order, &t.cells, &t.points, &mut locals, &all, &self.l2l[r], &mut acc);
            for (&i, v) in t.bodies.iter().zip(acc) {
                out[i] = v;
            }
        }
        Ok(out)
    }
}

fn skeleton_payload(man: &LetManifest, sender: &RankTree, order: usize) -> LetPayload {
    let nc = coeff_len(order);
    LetPayload {
        owner: man.owner,
        dest: man.dest,
        order,
        cells: man
            .entries
            .iter()
            .map(|e| {
                let c = &sender.cells[e.local];
                LetCell {
                    key: c.key,
                    level: c.level,
                    multipole: e.multipole.then(|| vec![Complex64::new(0.0, 0.0); nc]),
                    bodies: if e.bodies {
                        c.body_span
                            .range()
                            .map(|i| (sender.points.position(i), sender.points.patch[i], Complex64::new(0.0, 0.0)))
                            .collect()
                    } else {
                        Vec::new()
                    },
                }
            })
            .collect(),
    }
}

fn skeleton_cells(man: &LetManifest, sender: &RankTree) -> Vec<Cell> {
    man.entries.iter().map(|e| sender.cells[e.local]).collect()
}

/// Exchange demands of a partition without building the evaluator.
pub fn let_demands(global: &Octree, plan: &PartitionPlan, order: usize, cfg: &TraversalConfig) -> Result<Vec<Demand>> {
    let ranks = local_trees(global, &plan.assignment, plan.nranks)?;
    let mut out = Vec::new();
    for r in 0..plan.nranks {
        let (region, _) = region_tree(global, &plan.boxes[r]);
        for q in (0..plan.nranks).filter(|&q| q != r) {
            let man = let_manifest(&region, &ranks[q], r, cfg)?;
            out.push(Demand {
                src: q,
                dst: r,
                items: man.items(&ranks[q], order),
            });
        }
    }
    Ok(out)
}
