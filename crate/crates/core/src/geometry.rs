//! Curvilinear 6-node triangle geometry, interpolation bases and triangle
//! quadrature (regular Gauss rules and Duffy-transformed singular rules).
//!
//! The reference triangle has vertices `(0,0)`, `(1,0)`, `(0,1)` in `(ζ, η)`.
//! Node ordering follows the usual quadratic-triangle convention: the three
//! corners, then the midside nodes of edges 0–1, 1–2 and 2–0.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::special::gauss_legendre;
use crate::vec3::{self, Point3};

const REF_TOL: f64 = 1e-12;

/// A point of the reference triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReferencePoint {
    pub zeta: f64,
    pub eta: f64,
}

impl ReferencePoint {
    pub const fn new(zeta: f64, eta: f64) -> Self {
        Self { zeta, eta }
    }

    /// The third barycentric coordinate `1 - ζ - η`.
    #[inline]
    pub fn lambda(&self) -> f64 {
        1.0 - self.zeta - self.eta
    }

    pub fn is_inside(&self) -> bool {
        self.zeta >= -REF_TOL && self.eta >= -REF_TOL && self.lambda() >= -REF_TOL
    }

    pub fn centroid() -> Self {
        Self::new(1.0 / 3.0, 1.0 / 3.0)
    }
}

/// Reference coordinates of the six geometry nodes.
pub const NODE_REFERENCE: [ReferencePoint; 6] = [
    ReferencePoint::new(0.0, 0.0),
    ReferencePoint::new(1.0, 0.0),
    ReferencePoint::new(0.0, 1.0),
    ReferencePoint::new(0.5, 0.0),
    ReferencePoint::new(0.5, 0.5),
    ReferencePoint::new(0.0, 0.5),
];

/// A second-order (6-node) curved triangle.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvilinearPatch {
    pub nodes: [Point3; 6],
    pub patch_id: usize,
}

fn shape(p: ReferencePoint) -> [f64; 6] {
    let (z, e, l) = (p.zeta, p.eta, p.lambda());
    [
        l * (2.0 * l - 1.0),
        z * (2.0 * z - 1.0),
        e * (2.0 * e - 1.0),
        4.0 * z * l,
        4.0 * z * e,
        4.0 * e * l,
    ]
}

fn shape_derivatives(p: ReferencePoint) -> ([f64; 6], [f64; 6]) {
    let (z, e, l) = (p.zeta, p.eta, p.lambda());
    let dz = [
        1.0 - 4.0 * l,
        4.0 * z - 1.0,
        0.0,
        4.0 * (l - z),
        4.0 * e,
        -4.0 * e,
    ];
    let de = [
        1.0 - 4.0 * l,
        0.0,
        4.0 * e - 1.0,
        -4.0 * z,
        4.0 * z,
        4.0 * (l - e),
    ];
    (dz, de)
}

impl CurvilinearPatch {
    pub fn new(nodes: [Point3; 6], patch_id: usize) -> Self {
        Self { nodes, patch_id }
    }

    /// A straight-sided patch whose midside nodes sit at the edge midpoints.
    pub fn flat(a: Point3, b: Point3, c: Point3, patch_id: usize) -> Self {
        let mid = |p: Point3, q: Point3| vec3::scale(vec3::add(p, q), 0.5);
        Self::new([a, b, c, mid(a, b), mid(b, c), mid(c, a)], patch_id)
    }

    pub fn map_to_physical(&self, p: ReferencePoint) -> Point3 {
        let n = shape(p);
        let mut out = [0.0; 3];
        for (w, node) in n.iter().zip(&self.nodes) {
            for d in 0..3 {
                out[d] += w * node[d];
            }
        }
        out
    }

    /// Tangent vectors `∂r/∂ζ` and `∂r/∂η`.
    pub fn tangents(&self, p: ReferencePoint) -> (Point3, Point3) {
        let (dz, de) = shape_derivatives(p);
        let mut tz = [0.0; 3];
        let mut te = [0.0; 3];
        for k in 0..6 {
            for d in 0..3 {
                tz[d] += dz[k] * self.nodes[k][d];
                te[d] += de[k] * self.nodes[k][d];
            }
        }
        (tz, te)
    }

    /// Surface Jacobian magnitude `|∂r/∂ζ × ∂r/∂η|` and unit normal.
    pub fn jacobian(&self, p: ReferencePoint) -> Result<(f64, Point3)> {
        let (tz, te) = self.tangents(p);
        let n = vec3::cross(tz, te);
        let mag = vec3::norm(n);
        let scale = vec3::norm2(tz).max(vec3::norm2(te));
        if !(mag > 1e-13 * scale) || !mag.is_finite() {
            return Err(Error::Geometry(alloc::format!(
                "degenerate patch {} at ({}, {})",
                self.patch_id,
                p.zeta,
                p.eta
            )));
        }
        Ok((mag, vec3::scale(n, 1.0 / mag)))
    }

    /// Largest distance between any two geometry nodes.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in 0..6 {
            for b in a + 1..6 {
                d = d.max(vec3::dist(self.nodes[a], self.nodes[b]));
            }
        }
        d
    }

    pub fn centroid(&self) -> Point3 {
        self.map_to_physical(ReferencePoint::centroid())
    }

    /// Reference point whose image is closest to `x`.
    ///
    /// A coarse lattice search seeds a shrinking pattern search clamped to the
    /// reference triangle.
    pub fn closest_reference_point(&self, x: Point3) -> ReferencePoint {
        const GRID: usize = 12;
        let dist2 = |p: ReferencePoint| vec3::norm2(vec3::sub(self.map_to_physical(p), x));
        let mut best = ReferencePoint::centroid();
        let mut best_d = dist2(best);
        for i in 0..=GRID {
            for j in 0..=(GRID - i) {
                let p = ReferencePoint::new(i as f64 / GRID as f64, j as f64 / GRID as f64);
                let d = dist2(p);
                if d < best_d {
                    best = p;
                    best_d = d;
                }
            }
        }
        let mut step = 0.5 / GRID as f64;
        const DIRS: [(f64, f64); 6] = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, -1.0), (-1.0, 1.0)];
        while step > 1e-10 {
            let mut improved = false;
            for (dz, de) in DIRS {
                let p = clamp_to_triangle(ReferencePoint::new(best.zeta + dz * step, best.eta + de * step));
                let d = dist2(p);
                if d < best_d {
                    best = p;
                    best_d = d;
                    improved = true;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best
    }
}

fn clamp_to_triangle(p: ReferencePoint) -> ReferencePoint {
    let mut z = p.zeta.max(0.0);
    let mut e = p.eta.max(0.0);
    let s = z + e;
    if s > 1.0 {
        z /= s;
        e /= s;
    }
    ReferencePoint::new(z, e)
}

/// Polynomial order of the density interpolation on each patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BasisOrder {
    Linear,
    Quadratic,
    Cubic,
}

impl BasisOrder {
    pub fn from_degree(order: u32) -> Result<Self> {
        match order {
            1 => Ok(Self::Linear),
            2 => Ok(Self::Quadratic),
            3 => Ok(Self::Cubic),
            _ => Err(Error::Config(alloc::format!("basis order {order} not in {{1, 2, 3}}"))),
        }
    }

    pub fn degree(self) -> u32 {
        match self {
            Self::Linear => 1,
            Self::Quadratic => 2,
            Self::Cubic => 3,
        }
    }

    /// Interpolation points per patch.
    pub fn points_per_patch(self) -> usize {
        match self {
            Self::Linear => 3,
            Self::Quadratic => 6,
            Self::Cubic => 12,
        }
    }

    /// Interpolation nodes, which double as the regular quadrature rule.
    pub fn nodes(self) -> Vec<(ReferencePoint, f64)> {
        let n = self.points_per_patch();
        gauss_rule(n).expect("interpolation rules are always available")
    }
}

fn s3_orbit(a: f64, w: f64, out: &mut Vec<(ReferencePoint, f64)>) {
    let b = 1.0 - 2.0 * a;
    out.push((ReferencePoint::new(a, a), w));
    out.push((ReferencePoint::new(b, a), w));
    out.push((ReferencePoint::new(a, b), w));
}

fn s6_orbit(a: f64, b: f64, w: f64, out: &mut Vec<(ReferencePoint, f64)>) {
    let c = 1.0 - a - b;
    for (z, e) in [(a, b), (b, a), (b, c), (c, b), (c, a), (a, c)] {
        out.push((ReferencePoint::new(z, e), w));
    }
}

/// Supported regular rule sizes.
pub const GAUSS_RULE_SIZES: [usize; 5] = [1, 3, 6, 7, 12];

/// Polynomial degree integrated exactly by the rule with `npoints` points.
pub fn gauss_rule_degree(npoints: usize) -> Result<u32> {
    match npoints {
        1 => Ok(1),
        3 => Ok(2),
        6 => Ok(4),
        7 => Ok(5),
        12 => Ok(6),
        _ => Err(Error::Config(alloc::format!("no {npoints}-point triangle rule"))),
    }
}

/// Symmetric Gauss rules on the reference triangle; weights sum to ½.
pub fn gauss_rule(npoints: usize) -> Result<Vec<(ReferencePoint, f64)>> {
    let mut r = Vec::with_capacity(npoints);
    match npoints {
        1 => r.push((ReferencePoint::centroid(), 0.5)),
        3 => s3_orbit(1.0 / 6.0, 1.0 / 6.0, &mut r),
        6 => {
            s3_orbit(0.445948490915965, 0.223381589678011 / 2.0, &mut r);
            s3_orbit(0.091576213509771, 0.109951743655322 / 2.0, &mut r);
        }
        7 => {
            r.push((ReferencePoint::centroid(), 0.225 / 2.0));
            s3_orbit(0.470142064105115, 0.132394152788506 / 2.0, &mut r);
            s3_orbit(0.101286507323456, 0.125939180544827 / 2.0, &mut r);
        }
        12 => {
            s3_orbit(0.063089014491502, 0.050844906370207 / 2.0, &mut r);
            s3_orbit(0.249286745170910, 0.116786275726379 / 2.0, &mut r);
            s6_orbit(0.053145049844817, 0.310352451033784, 0.082851075618374 / 2.0, &mut r);
        }
        _ => return Err(Error::Config(alloc::format!("no {npoints}-point triangle rule"))),
    }
    Ok(r)
}

/// The 12-point rule replicated on the `4^levels` congruent sub-triangles of
/// a uniform refinement of the reference triangle.
pub fn subdivided_gauss_rule(levels: u32) -> Vec<(ReferencePoint, f64)> {
    let base = gauss_rule(12).expect("12-point rule exists");
    let n = 1usize << levels;
    let h = 1.0 / n as f64;
    let scale = h * h;
    let mut out = Vec::with_capacity(base.len() * n * n);
    for i in 0..n {
        for j in 0..(n - i) {
            let (z0, e0) = (i as f64 * h, j as f64 * h);
            for (p, w) in &base {
                out.push((ReferencePoint::new(z0 + h * p.zeta, e0 + h * p.eta), w * scale));
            }
            if i + j + 1 < n {
                // Inverted sub-triangle with corners (i+1,j), (i,j+1), (i+1,j+1).
                for (p, w) in &base {
                    out.push((
                        ReferencePoint::new(z0 + h * (1.0 - p.eta), e0 + h * (1.0 - p.zeta)),
                        w * scale,
                    ));
                }
            }
        }
    }
    out
}

/// Composite Duffy rule for integrands with a `1/R` singularity at `singular`.
///
/// The triangle is split at the singular point into up to three
/// sub-triangles, each collapsed onto a unit square so that the area element
/// vanishes linearly at the singular point. Sub-triangles are sliced further
/// along their far edge, so the rule may hold more than `3·n²` points.
pub fn duffy_rule(singular: ReferencePoint, npoints_per_dim: usize) -> Result<Vec<(ReferencePoint, f64)>> {
    if !singular.is_inside() || !singular.zeta.is_finite() || !singular.eta.is_finite() {
        return Err(Error::Precondition(alloc::format!(
            "singular point ({}, {}) outside the reference triangle",
            singular.zeta,
            singular.eta
        )));
    }
    if npoints_per_dim == 0 {
        return Err(Error::Config("duffy rule needs at least one point per dimension".into()));
    }
    let (x, w) = gauss_legendre(npoints_per_dim);
    let t: Vec<f64> = x.iter().map(|x| 0.5 * (x + 1.0)).collect();
    let wt: Vec<f64> = w.iter().map(|w| 0.5 * w).collect();
    let s = (singular.zeta, singular.eta);
    let verts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)];
    let mut out = Vec::with_capacity(3 * npoints_per_dim * npoints_per_dim);
    for k in 0..3 {
        let a = verts[k];
        let b = verts[(k + 1) % 3];
        let ea = (a.0 - s.0, a.1 - s.1);
        let eb = (b.0 - s.0, b.1 - s.1);
        let det = (ea.0 * eb.1 - ea.1 * eb.0).abs();
        if det < 1e-14 {
            continue;
        }
        // The far edge is cut at the foot of the perpendicular from the
        // singular point and at distances h·2^j from it, so that within each
        // slice the distance to the edge varies by at most a factor of two.
        let d = (eb.0 - ea.0, eb.1 - ea.1);
        let len = math::sqrt(d.0 * d.0 + d.1 * d.1);
        let e = (d.0 / len, d.1 / len);
        let ta = ea.0 * e.0 + ea.1 * e.1;
        let h = det / len;
        let (t0, t1) = (ta, ta + len);
        let mut cuts = vec![t0];
        let mut ladder = vec![0.0];
        let reach = t0.abs().max(t1.abs());
        let mut step = h;
        while step < reach {
            ladder.push(-step);
            ladder.push(step);
            step *= 2.0;
        }
        ladder.sort_by(f64::total_cmp);
        cuts.extend(ladder.into_iter().filter(|&c| c > t0 + 1e-12 * len && c < t1 - 1e-12 * len));
        cuts.push(t1);
        let slices = cuts.len() - 1;
        let edge_point = |i: usize| -> (f64, f64) {
            let v = if i == 0 {
                0.0
            } else if i == slices {
                1.0
            } else {
                (cuts[i] - ta) / len
            };
            ((1.0 - v) * ea.0 + v * eb.0, (1.0 - v) * ea.1 + v * eb.1)
        };
        for slice in 0..slices {
            let fa = edge_point(slice);
            let fb = edge_point(slice + 1);
            let sdet = (fa.0 * fb.1 - fa.1 * fb.0).abs();
            for (u, wu) in t.iter().zip(&wt) {
                for (v, wv) in t.iter().zip(&wt) {
                    let dz = (1.0 - v) * fa.0 + v * fb.0;
                    let de = (1.0 - v) * fa.1 + v * fb.1;
                    let p = ReferencePoint::new(s.0 + u * dz, s.1 + u * de);
                    out.push((p, wu * wv * u * sdet));
                }
            }
        }
    }
    Ok(out)
}

/// Monomial-type functions spanning the interpolation space of each order.
fn basis_functions(order: BasisOrder, p: ReferencePoint, out: &mut [f64]) {
    let (z, e) = (p.zeta, p.eta);
    match order {
        BasisOrder::Linear => {
            out[..3].copy_from_slice(&[1.0, z, e]);
        }
        BasisOrder::Quadratic => {
            out[..6].copy_from_slice(&[1.0, z, e, z * z, z * e, e * e]);
        }
        BasisOrder::Cubic => {
            let l = 1.0 - z - e;
            let bubble = z * e * l;
            out[..12].copy_from_slice(&[
                1.0,
                z,
                e,
                z * z,
                z * e,
                e * e,
                z * z * z,
                z * z * e,
                z * e * e,
                e * e * e,
                bubble * (2.0 * z - e - l),
                bubble * (e - l),
            ]);
        }
    }
}

/// Lagrange interpolation basis attached to the interpolation nodes of one order.
#[derive(Clone, Debug)]
pub struct LagrangeBasis {
    order: BasisOrder,
    /// Row `i` holds the expansion of `L_i` in the monomial-type functions.
    coeffs: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(order: BasisOrder) -> Self {
        let n = order.points_per_patch();
        let nodes = order.nodes();
        // V[j][k] = φ_k(node_j); L = V^{-T} φ.
        let mut v = vec![0.0; n * n];
        for (j, (p, _)) in nodes.iter().enumerate() {
            basis_functions(order, *p, &mut v[j * n..(j + 1) * n]);
        }
        let inv = invert(&v, n).expect("interpolation nodes are unisolvent");
        // L_i(p) = Σ_k inv[k][i] φ_k(p)
        let mut coeffs = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                coeffs[i * n + k] = inv[k * n + i];
            }
        }
        Self { order, coeffs }
    }

    pub fn order(&self) -> BasisOrder {
        self.order
    }

    pub fn len(&self) -> usize {
        self.order.points_per_patch()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All basis values at `p`, written into `out[..len]`.
    pub fn eval_all(&self, p: ReferencePoint, out: &mut [f64]) {
        let n = self.len();
        let mut phi = [0.0; 12];
        basis_functions(self.order, p, &mut phi);
        for i in 0..n {
            let row = &self.coeffs[i * n..(i + 1) * n];
            out[i] = row.iter().zip(&phi[..n]).map(|(a, b)| a * b).sum();
        }
    }

    pub fn eval(&self, i: usize, p: ReferencePoint) -> f64 {
        let mut out = [0.0; 12];
        self.eval_all(p, &mut out);
        out[i]
    }
}

/// Value of the `i`-th (zero-based) Lagrange basis function of `order` at `p`.
pub fn lagrange_basis(order: BasisOrder, i: usize, p: ReferencePoint) -> Result<f64> {
    if i >= order.points_per_patch() {
        return Err(Error::Precondition(alloc::format!(
            "basis index {i} out of range for order {}",
            order.degree()
        )));
    }
    Ok(LagrangeBasis::new(order).eval(i, p))
}

/// Gauss–Jordan inverse with partial pivoting of a small row-major matrix.
fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x * n + col].abs().total_cmp(&m[y * n + col].abs()))?;
        if m[piv * n + col].abs() < 1e-14 {
            return None;
        }
        for k in 0..n {
            m.swap(col * n + k, piv * n + k);
            inv.swap(col * n + k, piv * n + k);
        }
        let d = m[col * n + col];
        for k in 0..n {
            m[col * n + k] /= d;
            inv[col * n + k] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * n + col];
                if f != 0.0 {
                    for k in 0..n {
                        m[r * n + k] -= f * m[col * n + k];
                        inv[r * n + k] -= f * inv[col * n + k];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Area of the image of the reference triangle, by the 12-point rule.
pub fn patch_area(patch: &CurvilinearPatch) -> Result<f64> {
    let mut a = 0.0;
    for (p, w) in gauss_rule(12)? {
        a += w * patch.jacobian(p)?.0;
    }
    Ok(a)
}

/// `∫ ζ^a η^b` over the reference triangle, `a! b! / (a + b + 2)!`.
pub fn monomial_moment(a: u32, b: u32) -> f64 {
    let fact = |n: u32| (1..=n).fold(1.0, |acc, k| acc * k as f64);
    fact(a) * fact(b) / fact(a + b + 2)
}
