//! Surface meshes of 6-node curved triangles.
//!
//! Elements are stored as raw coordinate records with no node sharing, which
//! is also the layout of the block-readable binary format.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::CurvilinearPatch;
use crate::math;
use crate::vec3::{self, Point3};

/// Coordinates of one element: 3 corner nodes then 3 midside nodes.
pub type ElementRecord = [Point3; 6];

#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SurfaceMesh {
    pub elements: Vec<ElementRecord>,
}

/// Entity counts implied by a closed mesh of quadratic triangles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeshCounts {
    pub elements: u64,
    pub nodes: u64,
    pub edges: u64,
    pub unknowns: u64,
}

impl MeshCounts {
    /// Counts for a closed genus-0 triangulation with `elements` triangles and
    /// six unknowns per element.
    pub fn from_elements(elements: u64) -> Self {
        Self {
            elements,
            nodes: 2 * elements,
            edges: 3 * elements,
            unknowns: 6 * elements,
        }
    }
}

impl SurfaceMesh {
    pub fn new(elements: Vec<ElementRecord>) -> Result<Self> {
        let mesh = Self { elements };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::Geometry("mesh has no elements".into()));
        }
        for (i, e) in self.elements.iter().enumerate() {
            if e.iter().flatten().any(|c| !c.is_finite()) {
                return Err(Error::Geometry(alloc::format!("element {i} has a non-finite coordinate")));
            }
        }
        Ok(())
    }

    pub fn counts(&self) -> MeshCounts {
        MeshCounts::from_elements(self.elements.len() as u64)
    }

    pub fn patches(&self) -> Vec<CurvilinearPatch> {
        self.elements
            .iter()
            .enumerate()
            .map(|(i, e)| CurvilinearPatch::new(*e, i))
            .collect()
    }

    /// Number of distinct corner and midside points, and of distinct edges,
    /// found by matching coordinates to within `1e-9`.
    pub fn topology_counts(&self) -> (usize, usize) {
        let q = |x: f64| math::round(x * 1e9) as i64;
        let key = |p: Point3| (q(p[0]), q(p[1]), q(p[2]));
        let mut corners = BTreeMap::new();
        let mut mids = BTreeMap::new();
        for e in &self.elements {
            for p in &e[..3] {
                corners.insert(key(*p), ());
            }
            for p in &e[3..] {
                mids.insert(key(*p), ());
            }
        }
        (corners.len() + mids.len(), mids.len())
    }
}

/// A sphere of radius `radius` built by splitting each icosahedron face into
/// `subdivisions²` triangles, giving `20·subdivisions²` elements. All nodes,
/// including midside nodes, are projected onto the sphere.
pub fn icosphere(radius: f64, subdivisions: usize) -> Result<SurfaceMesh> {
    if subdivisions == 0 || !(radius > 0.0) {
        return Err(Error::Config("icosphere needs radius > 0 and at least one subdivision".into()));
    }
    let t = (1.0 + math::sqrt(5.0)) / 2.0;
    let verts: [Point3; 12] = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    const FACES: [[usize; 3]; 20] = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let proj = |p: Point3| vec3::scale(p, radius / vec3::norm(p));
    let n = subdivisions;
    // Points of the doubled lattice so that midside nodes are lattice points too.
    let lattice = |f: &[usize; 3], i: usize, j: usize| -> Point3 {
        let (a, b, c) = (verts[f[0]], verts[f[1]], verts[f[2]]);
        let m = 2 * n;
        let u = i as f64 / m as f64;
        let v = j as f64 / m as f64;
        let w = 1.0 - u - v;
        proj([
            w * a[0] + u * b[0] + v * c[0],
            w * a[1] + u * b[1] + v * c[1],
            w * a[2] + u * b[2] + v * c[2],
        ])
    };
    let mut elements = Vec::with_capacity(20 * n * n);
    for f in &FACES {
        for i in 0..n {
            for j in 0..(n - i) {
                let (i2, j2) = (2 * i, 2 * j);
                // Upward triangle (i,j), (i+1,j), (i,j+1).
                elements.push([
                    lattice(f, i2, j2),
                    lattice(f, i2 + 2, j2),
                    lattice(f, i2, j2 + 2),
                    lattice(f, i2 + 1, j2),
                    lattice(f, i2 + 1, j2 + 1),
                    lattice(f, i2, j2 + 1),
                ]);
                if i + j + 1 < n {
                    // Downward triangle (i+1,j), (i+1,j+1), (i,j+1).
                    elements.push([
                        lattice(f, i2 + 2, j2),
                        lattice(f, i2 + 2, j2 + 2),
                        lattice(f, i2, j2 + 2),
                        lattice(f, i2 + 2, j2 + 1),
                        lattice(f, i2 + 1, j2 + 2),
                        lattice(f, i2 + 1, j2 + 1),
                    ]);
                }
            }
        }
    }
    SurfaceMesh::new(elements)
}
