//! Morton-ordered octree with index+count spans.
//!
//! Bodies are sorted by their finest-level key. Cells are laid out
//! breadth-first so that the children of a cell occupy one contiguous run of
//! the cell array, and the bodies of a cell one contiguous run of the body
//! array. A cell is a leaf exactly when it has no children.

use alloc::vec::Vec;
use num_complex::Complex64;

use super::morton::{deinterleave, interleave, Bounds, MAX_LEVEL};
use crate::error::{Error, Result};
use crate::math;
use crate::vec3::Point3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Body {
    pub position: Point3,
    pub src: Complex64,
    pub trg: Complex64,
    pub patch_id: usize,
    pub weight: f64,
    /// Finest-level Morton key.
    pub key: u64,
    /// Position of the body in the caller's original ordering.
    pub index: usize,
}

impl Body {
    pub fn new(position: Point3, src: Complex64, patch_id: usize, index: usize) -> Self {
        Self {
            position,
            src,
            trg: Complex64::new(0.0, 0.0),
            patch_id,
            weight: 1.0,
            key: 0,
            index,
        }
    }
}

/// `(first, count)` into a sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Span {
    pub first: usize,
    pub count: usize,
}

impl Span {
    pub const fn new(first: usize, count: usize) -> Self {
        Self { first, count }
    }

    pub fn range(&self) -> core::ops::Range<usize> {
        self.first..self.first + self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Cell {
    pub key: u64,
    pub level: u32,
    pub center: Point3,
    /// Half of the cube diagonal.
    pub radius: f64,
    pub body_span: Span,
    pub child_span: Span,
    pub parent: Option<usize>,
}

impl Cell {
    #[inline]
    pub fn is_leaf(&self) -> bool {
        self.child_span.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Octree {
    pub bounds: Bounds,
    pub bodies: Vec<Body>,
    pub cells: Vec<Cell>,
    pub ncrit: usize,
    /// Set when some leaf at the deepest level still holds more than `ncrit`
    /// bodies (coincident points).
    pub degenerate: bool,
}

pub(crate) fn make_cell(bounds: &Bounds, key: u64, level: u32, body_span: Span, parent: Option<usize>) -> Cell {
    let ix = deinterleave(key, level);
    Cell {
        key,
        level,
        center: bounds.cell_center(ix, level),
        radius: math::sqrt(3.0) * bounds.cell_half_width(level),
        body_span,
        child_span: Span::default(),
        parent,
    }
}

/// Sort `bodies` by Morton key and build the octree with at most `ncrit`
/// bodies per leaf. `bounds` defaults to the padded bounding cube.
pub fn build_tree(mut bodies: Vec<Body>, ncrit: usize, bounds: Option<Bounds>) -> Result<Octree> {
    if bodies.is_empty() {
        return Err(Error::Precondition("tree needs at least one body".into()));
    }
    if ncrit == 0 {
        return Err(Error::Config("ncrit must be at least 1".into()));
    }
    let bounds = match bounds {
        Some(b) => b,
        None => Bounds::from_points(bodies.iter().map(|b| &b.position))?,
    };
    for b in bodies.iter_mut() {
        b.key = interleave(bounds.grid_coords(b.position, MAX_LEVEL)?, MAX_LEVEL);
    }
    bodies.sort_by(|a, b| a.key.cmp(&b.key).then(a.index.cmp(&b.index)));
    let mut cells = Vec::new();
    cells.push(make_cell(&bounds, 0, 0, Span::new(0, bodies.len()), None));
    let mut degenerate = false;
    let mut i = 0;
    while i < cells.len() {
        let cell = cells[i];
        if cell.body_span.count > ncrit {
            if cell.level == MAX_LEVEL {
                degenerate = true;
            } else {
                let shift = 3 * (MAX_LEVEL - cell.level - 1);
                let first_child = cells.len();
                let range = cell.body_span.range();
                let mut start = range.start;
                while start < range.end {
                    let oct = (bodies[start].key >> shift) & 7;
                    let mut end = start + 1;
                    while end < range.end && (bodies[end].key >> shift) & 7 == oct {
                        end += 1;
                    }
                    let key = (cell.key << 3) | oct;
                    cells.push(make_cell(&bounds, key, cell.level + 1, Span::new(start, end - start), Some(i)));
                    start = end;
                }
                cells[i].child_span = Span::new(first_child, cells.len() - first_child);
            }
        }
        i += 1;
    }
    Ok(Octree {
        bounds,
        bodies,
        cells,
        ncrit,
        degenerate,
    })
}

impl Octree {
    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.cells.len()).filter(|&c| self.cells[c].is_leaf())
    }

    pub fn depth(&self) -> u32 {
        self.cells.iter().map(|c| c.level).max().unwrap_or(0)
    }

    /// `perm[i]` is the tree position of the body with original index `i`.
    pub fn permutation(&self) -> Vec<usize> {
        let mut perm = alloc::vec![0; self.bodies.len()];
        for (pos, b) in self.bodies.iter().enumerate() {
            perm[b.index] = pos;
        }
        perm
    }

    /// Check the span invariants, returning a description of the first violation.
    pub fn check_spans(&self) -> Result<()> {
        let bad = |m: alloc::string::String| Err(Error::Structural(m));
        let root = &self.cells[0];
        if root.body_span != Span::new(0, self.bodies.len()) {
            return bad("root does not span all bodies".into());
        }
        for (i, c) in self.cells.iter().enumerate() {
            if !(c.radius > 0.0) {
                return bad(alloc::format!("cell {i} has non-positive radius"));
            }
            if c.is_leaf() {
                if c.body_span.count > self.ncrit && c.level < MAX_LEVEL {
                    return bad(alloc::format!("leaf {i} holds {} bodies", c.body_span.count));
                }
                continue;
            }
            let mut next = c.body_span.first;
            for ch in c.child_span.range() {
                let child = &self.cells[ch];
                if child.parent != Some(i) || child.body_span.first != next || child.key >> 3 != c.key {
                    return bad(alloc::format!("child {ch} of cell {i} is inconsistent"));
                }
                next += child.body_span.count;
            }
            if next != c.body_span.first + c.body_span.count {
                return bad(alloc::format!("children of cell {i} do not cover its bodies"));
            }
        }
        for c in &self.cells {
            for b in &self.bodies[c.body_span.range()] {
                if b.key >> (3 * (MAX_LEVEL - c.level)) != c.key {
                    return bad("body outside its cell".into());
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn body(p: Point3, i: usize) -> Body {
        Body::new(p, Complex64::new(1.0, 0.0), i, i)
    }

    #[test]
    fn eight_octant_centres() {
        let mut bodies = Vec::new();
        for i in 0..8 {
            let p = [
                if i & 1 == 1 { 0.75 } else { 0.25 },
                if i & 2 == 2 { 0.75 } else { 0.25 },
                if i & 4 == 4 { 0.75 } else { 0.25 },
            ];
            bodies.push(body(p, i));
        }
        let b = Bounds {
            center: [0.5; 3],
            half_width: 0.5,
        };
        let t = build_tree(bodies, 1, Some(b)).unwrap();
        assert_eq!(t.cells.len(), 9);
        assert_eq!(t.leaves().count(), 8);
        assert_eq!(t.depth(), 1);
        t.check_spans().unwrap();
    }

    #[test]
    fn single_body_is_root_leaf() {
        let t = build_tree(alloc::vec![body([1.0, 2.0, 3.0], 0)], 4, None).unwrap();
        assert_eq!(t.cells.len(), 1);
        assert!(t.cells[0].is_leaf());
    }

    #[test]
    fn random_bodies_respect_ncrit() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let bodies: Vec<Body> = (0..10_000).map(|i| body([rng.gen(), rng.gen(), rng.gen()], i)).collect();
        let t = build_tree(bodies, 64, None).unwrap();
        t.check_spans().unwrap();
        assert!(t.leaves().all(|l| t.cells[l].body_span.count <= 64));
        let total: usize = t.leaves().map(|l| t.cells[l].body_span.count).sum();
        assert_eq!(total, 10_000);
    }

    #[test]
    fn coincident_bodies_flag_degenerate() {
        let bodies: Vec<Body> = (0..5).map(|i| body([0.5, 0.5, 0.5], i)).chain([body([0.0; 3], 5)]).collect();
        let t = build_tree(bodies, 2, None).unwrap();
        assert!(t.degenerate);
        t.check_spans().unwrap();
    }
}
