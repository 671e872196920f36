//! Dual-tree traversal producing M2L and P2P interaction lists.
//!
//! Starting from a pair of roots, a pair of cells is accepted for an M2L
//! when the distance between their centres exceeds `(r_s + r_t)/θ`. Two
//! leaves that are not admissible interact directly. Otherwise the larger
//! cell is split (the target when the source is a leaf). The traversal is
//! cut into tasks: the topmost pairs whose combined body count is at most
//! the grain `s` become one task each, and the interactions they generate
//! are stored contiguously.

use alloc::vec::Vec;

use super::tree::{Cell, Span};
use crate::error::{Error, Result};
use crate::vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraversalConfig {
    /// Grain: largest combined body count of a pair handled as one task.
    pub grain: usize,
    /// Largest number of bodies in a leaf.
    pub ncrit: usize,
    /// Opening parameter of the admissibility test.
    pub theta: f64,
    pub deterministic: bool,
}

impl Default for TraversalConfig {
    fn default() -> Self {
        Self {
            grain: 128,
            ncrit: 64,
            theta: 0.5,
            deterministic: true,
        }
    }
}

impl TraversalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ncrit == 0 || self.grain < self.ncrit {
            return Err(Error::Config(alloc::format!(
                "need s >= c >= 1, got s = {}, c = {}",
                self.grain,
                self.ncrit
            )));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::Config(alloc::format!("theta {} outside (0, 1]", self.theta)));
        }
        Ok(())
    }
}

/// One unit of traversal work and the interactions it produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Task {
    pub target: usize,
    pub source: usize,
    pub m2l: Span,
    pub p2p: Span,
}

/// Interaction lists of one traversal, as `(target cell, source cell)` pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InteractionLists {
    pub m2l: Vec<(usize, usize)>,
    pub p2p: Vec<(usize, usize)>,
    pub tasks: Vec<Task>,
}

impl InteractionLists {
    pub fn append(&mut self, other: InteractionLists) {
        let (m0, p0) = (self.m2l.len(), self.p2p.len());
        self.m2l.extend(other.m2l);
        self.p2p.extend(other.p2p);
        self.tasks.extend(other.tasks.into_iter().map(|t| Task {
            m2l: Span::new(t.m2l.first + m0, t.m2l.count),
            p2p: Span::new(t.p2p.first + p0, t.p2p.count),
            ..t
        }));
    }
}

/// Multipole acceptance test.
#[inline]
pub fn admissible(target: &Cell, source: &Cell, theta: f64) -> bool {
    vec3::dist(target.center, source.center) * theta > target.radius + source.radius
}

struct Walker<'a> {
    targets: &'a [Cell],
    sources: &'a [Cell],
    cfg: TraversalConfig,
    lists: InteractionLists,
    in_task: bool,
}

impl Walker<'_> {
    fn visit(&mut self, t: usize, s: usize) {
        let spawn = !self.in_task
            && self.targets[t].body_span.count + self.sources[s].body_span.count <= self.cfg.grain;
        if spawn {
            self.in_task = true;
            let (m0, p0) = (self.lists.m2l.len(), self.lists.p2p.len());
            self.interact(t, s);
            self.in_task = false;
            self.close_task(t, s, m0, p0);
        } else {
            self.interact(t, s);
        }
    }

    fn close_task(&mut self, t: usize, s: usize, m0: usize, p0: usize) {
        self.lists.tasks.push(Task {
            target: t,
            source: s,
            m2l: Span::new(m0, self.lists.m2l.len() - m0),
            p2p: Span::new(p0, self.lists.p2p.len() - p0),
        });
    }

    fn record(&mut self, t: usize, s: usize, m2l: bool) {
        let (m0, p0) = (self.lists.m2l.len(), self.lists.p2p.len());
        if m2l {
            self.lists.m2l.push((t, s));
        } else {
            self.lists.p2p.push((t, s));
        }
        if !self.in_task {
            self.close_task(t, s, m0, p0);
        }
    }

    fn interact(&mut self, t: usize, s: usize) {
        let (ct, cs) = (&self.targets[t], &self.sources[s]);
        if admissible(ct, cs, self.cfg.theta) {
            self.record(t, s, true);
        } else if ct.is_leaf() && cs.is_leaf() {
            self.record(t, s, false);
        } else if cs.is_leaf() || (!ct.is_leaf() && ct.radius >= cs.radius) {
            for c in ct.child_span.range() {
                self.visit(c, s);
            }
        } else {
            for c in cs.child_span.range() {
                self.visit(t, c);
            }
        }
    }
}

/// Traverse the target tree rooted at `target_root` against the source tree
/// rooted at `source_root`.
pub fn dual_tree_traversal(
    targets: &[Cell],
    target_root: usize,
    sources: &[Cell],
    source_root: usize,
    cfg: &TraversalConfig,
) -> Result<InteractionLists> {
    cfg.validate()?;
    if target_root >= targets.len() || source_root >= sources.len() {
        return Err(Error::Precondition("traversal root out of range".into()));
    }
    let mut w = Walker {
        targets,
        sources,
        cfg: *cfg,
        lists: InteractionLists::default(),
        in_task: false,
    };
    w.visit(target_root, source_root);
    Ok(w.lists)
}
