//! Expansion translations by rotation, coaxial shift and back-rotation.
//!
//! A translation by `t` is applied in three `O(P³)` steps: rotate the
//! coefficients so that `t` points along `+z`, shift along `z` (which keeps
//! every `m` separate), and rotate back. Rotation matrices are obtained by
//! exact spherical quadrature of rotated harmonics; coaxial coefficients come
//! from Gaunt integrals against `j_l` (regular-to-regular and
//! singular-to-singular shifts) or `h_l` (singular-to-regular shift).
//!
//! Operators are cached by a quantised translation vector, so a tree with
//! many congruent cell pairs builds each operator once.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math;
use crate::special::{coeff_len, gauss_legendre, normalized_legendre, spherical_harmonics_into, spherical_jn, spherical_yn};
use crate::vec3::{self, Point3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TranslationKind {
    /// Multipole about a child centre to multipole about its parent centre.
    MultipoleToMultipole,
    /// Multipole about a source centre to local about a target centre.
    MultipoleToLocal,
    /// Local about a parent centre to local about a child centre.
    LocalToLocal,
}

/// A ready-to-apply translation.
#[derive(Clone, Debug)]
pub struct TranslationOp {
    pub kind: TranslationKind,
    order: usize,
    /// `e^{imφ}` for `m = 0..=P`.
    phase: Vec<Complex64>,
    /// Rotation blocks `d^n_{m m'}(θ)`, block `n` starting at `Σ_{j<n} (2j+1)²`.
    rotation: Arc<Vec<f64>>,
    /// Coaxial blocks `A^m_{n' n}` for `m = 0..=P`.
    coaxial: Vec<Complex64>,
}

fn rotation_offset(n: usize) -> usize {
    // Σ_{j<n} (2j+1)²
    (4 * n * n * n - n) / 3
}

fn coaxial_offset(order: usize, m: usize) -> usize {
    // Σ_{j<m} (P+1-j)²
    (0..m).map(|j| (order + 1 - j) * (order + 1 - j)).sum()
}

/// Builder and cache of translation operators for one order and wavenumber.
#[derive(Clone, Debug)]
pub struct Translator {
    order: usize,
    k: f64,
    quantum: f64,
    /// `G[m][n][n'][l] = ∫ Y_n^m Y_l^0 conj(Y_{n'}^m) dΩ`.
    gaunt: Vec<f64>,
    sphere: Vec<(Point3, f64)>,
    sphere_conj_y: Vec<Vec<Complex64>>,
    rotations: BTreeMap<i64, Arc<Vec<f64>>>,
    ops: BTreeMap<(TranslationKind, [i64; 3]), Arc<TranslationOp>>,
}

impl Translator {
    /// `quantum` is the length below which translation vectors are treated as equal.
    pub fn new(order: usize, k: f64, quantum: f64) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Config("translations need a positive real wavenumber".into()));
        }
        let p = order;
        let lmax = 2 * p;
        let (xs, ws) = gauss_legendre(2 * p + 2);
        let tri = |n: usize, m: usize| n * (n + 1) / 2 + m;
        let mut gaunt = vec![0.0; (p + 1) * (p + 1) * (p + 1) * (lmax + 1)];
        for (x, w) in xs.iter().zip(&ws) {
            let s = math::sqrt((1.0 - x * x).max(0.0));
            let leg = normalized_legendre(lmax, *x, s);
            for m in 0..=p {
                for n in m..=p {
                    for np in m..=p {
                        let a = leg[tri(n, m)] * leg[tri(np, m)] * w * 2.0 * math::PI;
                        let base = ((m * (p + 1) + n) * (p + 1) + np) * (lmax + 1);
                        for l in 0..=lmax {
                            gaunt[base + l] += a * leg[tri(l, 0)];
                        }
                    }
                }
            }
        }
        let (cx, cw) = gauss_legendre(p + 1);
        let nphi = 2 * p + 2;
        let mut sphere = Vec::with_capacity(cx.len() * nphi);
        let mut sphere_conj_y = Vec::with_capacity(cx.len() * nphi);
        let mut leg = vec![0.0; (p + 1) * (p + 2) / 2];
        for (x, w) in cx.iter().zip(&cw) {
            let s = math::sqrt((1.0 - x * x).max(0.0));
            for j in 0..nphi {
                let phi = 2.0 * math::PI * j as f64 / nphi as f64;
                let (sp, cp) = math::sin_cos(phi);
                sphere.push(([s * cp, s * sp, *x], w * 2.0 * math::PI / nphi as f64));
                let mut y = vec![Complex64::new(0.0, 0.0); coeff_len(p)];
                spherical_harmonics_into(p, *x, s, Complex64::new(cp, sp), &mut leg, &mut y);
                for v in y.iter_mut() {
                    *v = v.conj();
                }
                sphere_conj_y.push(y);
            }
        }
        Ok(Self {
            order,
            k,
            quantum,
            gaunt,
            sphere,
            sphere_conj_y,
            rotations: BTreeMap::new(),
            ops: BTreeMap::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn wavenumber(&self) -> f64 {
        self.k
    }

    pub fn cached_operators(&self) -> usize {
        self.ops.len()
    }

    fn gaunt(&self, m: usize, n: usize, np: usize, l: usize) -> f64 {
        let p = self.order;
        self.gaunt[((m * (p + 1) + n) * (p + 1) + np) * (2 * p + 1) + l]
    }

    fn rotation(&mut self, cos_theta: f64, sin_theta: f64) -> Arc<Vec<f64>> {
        let key = math::round(cos_theta * (1u64 << 40) as f64) as i64;
        if let Some(r) = self.rotations.get(&key) {
            return r.clone();
        }
        let p = self.order;
        let mut d = vec![0.0; rotation_offset(p + 1)];
        let mut y = vec![Complex64::new(0.0, 0.0); coeff_len(p)];
        let mut leg = vec![0.0; (p + 1) * (p + 2) / 2];
        for (q, (u, w)) in self.sphere.iter().enumerate() {
            // v = R_y(θ) u
            let v = [
                cos_theta * u[0] + sin_theta * u[2],
                u[1],
                -sin_theta * u[0] + cos_theta * u[2],
            ];
            let rho = math::sqrt(v[0] * v[0] + v[1] * v[1]);
            let e = if rho > 0.0 {
                Complex64::new(v[0] / rho, v[1] / rho)
            } else {
                Complex64::new(1.0, 0.0)
            };
            spherical_harmonics_into(p, v[2], rho, e, &mut leg, &mut y);
            let cy = &self.sphere_conj_y[q];
            for n in 0..=p {
                let off = rotation_offset(n);
                let w2 = 2 * n + 1;
                for a in 0..w2 {
                    let ya = y[n * n + a] * *w;
                    for b in 0..w2 {
                        d[off + a * w2 + b] += (ya * cy[n * n + b]).re;
                    }
                }
            }
        }
        let d = Arc::new(d);
        self.rotations.insert(key, d.clone());
        d
    }

    fn coaxial(&self, kind: TranslationKind, tau: f64) -> Vec<Complex64> {
        let p = self.order;
        let lmax = 2 * p;
        let x = self.k * tau;
        let j = spherical_jn(lmax, x);
        let f: Vec<Complex64> = match kind {
            TranslationKind::MultipoleToLocal => {
                let y = spherical_yn(lmax, x);
                j.iter().zip(&y).map(|(a, b)| Complex64::new(*a, *b)).collect()
            }
            _ => j.iter().map(|a| Complex64::new(*a, 0.0)).collect(),
        };
        let mut out = vec![Complex64::new(0.0, 0.0); coaxial_offset(p, p + 1)];
        for m in 0..=p {
            let w = p + 1 - m;
            let off = coaxial_offset(p, m);
            for np in m..=p {
                for n in m..=p {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let lo = n.abs_diff(np);
                    let mut l = lo;
                    while l <= n + np {
                        let e = (np + l) as i64 - n as i64;
                        let sign = if e.rem_euclid(4) == 0 { 1.0 } else { -1.0 };
                        let norm = math::sqrt((2 * l + 1) as f64 / math::FOUR_PI);
                        acc += f[l] * (sign * norm * self.gaunt(m, n, np, l));
                        l += 2;
                    }
                    out[off + (np - m) * w + (n - m)] = acc * math::FOUR_PI;
                }
            }
        }
        out
    }

    /// Operator translating an expansion by `t = new_centre - old_centre`.
    pub fn operator(&mut self, kind: TranslationKind, t: Point3) -> Result<Arc<TranslationOp>> {
        let q = |x: f64| math::round(x / self.quantum) as i64;
        let key = (kind, [q(t[0]), q(t[1]), q(t[2])]);
        if let Some(op) = self.ops.get(&key) {
            return Ok(op.clone());
        }
        let tau = vec3::norm(t);
        if tau == 0.0 {
            return Err(Error::Precondition("zero-length translation".into()));
        }
        let rho = math::sqrt(t[0] * t[0] + t[1] * t[1]);
        let (ct, st) = (t[2] / tau, rho / tau);
        let e = if rho > 0.0 {
            Complex64::new(t[0] / rho, t[1] / rho)
        } else {
            Complex64::new(1.0, 0.0)
        };
        let mut phase = vec![Complex64::new(1.0, 0.0); self.order + 1];
        for m in 1..=self.order {
            phase[m] = phase[m - 1] * e;
        }
        let rotation = self.rotation(ct, st);
        let coaxial = self.coaxial(kind, tau);
        let op = Arc::new(TranslationOp {
            kind,
            order: self.order,
            phase,
            rotation,
            coaxial,
        });
        self.ops.insert(key, op.clone());
        Ok(op)
    }
}

/// Scratch space for [`TranslationOp::apply`].
#[derive(Clone, Debug)]
pub struct TranslationScratch {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

impl TranslationScratch {
    pub fn new(order: usize) -> Self {
        Self {
            a: vec![Complex64::new(0.0, 0.0); coeff_len(order)],
            b: vec![Complex64::new(0.0, 0.0); coeff_len(order)],
        }
    }
}

impl TranslationOp {
    pub fn order(&self) -> usize {
        self.order
    }

    /// `output += T · input`.
    pub fn apply(&self, input: &[Complex64], output: &mut [Complex64], scratch: &mut TranslationScratch) {
        let p = self.order;
        let phase_of = |m: isize| {
            let e = self.phase[m.unsigned_abs()];
            if m < 0 {
                e.conj()
            } else {
                e
            }
        };
        let (a, b) = (&mut scratch.a, &mut scratch.b);
        // Rotate so that the translation points along +z.
        for n in 0..=p {
            let w2 = 2 * n + 1;
            let off = rotation_offset(n);
            let base = n * n;
            for mp in 0..w2 {
                a[base + mp] = Complex64::new(0.0, 0.0);
            }
            for mi in 0..w2 {
                let v = input[base + mi] * phase_of(mi as isize - n as isize);
                if v.re == 0.0 && v.im == 0.0 {
                    continue;
                }
                let row = &self.rotation[off + mi * w2..off + (mi + 1) * w2];
                for mp in 0..w2 {
                    a[base + mp] += v * row[mp];
                }
            }
        }
        // Coaxial shift, one m at a time.
        for x in b.iter_mut() {
            *x = Complex64::new(0.0, 0.0);
        }
        for m in 0..=p {
            let w = p + 1 - m;
            let off = coaxial_offset(p, m);
            for sgn in [1isize, -1] {
                if m == 0 && sgn < 0 {
                    continue;
                }
                let mm = sgn * m as isize;
                for np in m..=p {
                    let row = &self.coaxial[off + (np - m) * w..off + (np - m + 1) * w];
                    let mut acc = Complex64::new(0.0, 0.0);
                    for n in m..=p {
                        acc += row[n - m] * a[((n * n + n) as isize + mm) as usize];
                    }
                    b[((np * np + np) as isize + mm) as usize] = acc;
                }
            }
        }
        // Rotate back and undo the azimuthal phase.
        for n in 0..=p {
            let w2 = 2 * n + 1;
            let off = rotation_offset(n);
            let base = n * n;
            for mi in 0..w2 {
                let row = &self.rotation[off + mi * w2..off + (mi + 1) * w2];
                let mut acc = Complex64::new(0.0, 0.0);
                for mp in 0..w2 {
                    acc += b[base + mp] * row[mp];
                }
                output[base + mi] += acc * phase_of(mi as isize - n as isize).conj();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fmm::expansion::Workspace;
    use crate::fmm::expansion::{l2p, m2p, p2l, p2m};
    use crate::kernel::{green, WaveNumber};

    fn zeros(p: usize) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); coeff_len(p)]
    }

    #[test]
    fn m2m_matches_child_evaluation() {
        let p = 10;
        let k = 1.0;
        let mut tr = Translator::new(p, k, 1e-12).unwrap();
        let mut ws = Workspace::new(p);
        let child = [0.25, -0.25, 0.25];
        let parent = [0.0; 3];
        let mut mc = zeros(p);
        p2m(k, child, [0.3, -0.2, 0.22], Complex64::new(1.0, 0.5), &mut mc, &mut ws);
        p2m(k, child, [0.2, -0.31, 0.27], Complex64::new(-0.3, 0.1), &mut mc, &mut ws);
        let op = tr.operator(TranslationKind::MultipoleToMultipole, vec3::sub(parent, child)).unwrap();
        let mut mp = zeros(p);
        op.apply(&mc, &mut mp, &mut TranslationScratch::new(p));
        let x = [3.0, 2.5, -4.0];
        let a = m2p(k, child, x, &mc, &mut ws);
        let b = m2p(k, parent, x, &mp, &mut ws);
        assert!((a - b).norm() / a.norm() < 1e-10, "{}", (a - b).norm() / a.norm());
    }

    #[test]
    fn m2l_single_pair_matches_green() {
        let k = 0.5;
        let mut errs = Vec::new();
        for p in [4, 8, 12] {
            let mut tr = Translator::new(p, k, 1e-12).unwrap();
            let mut ws = Workspace::new(p);
            let cs = [0.0; 3];
            let ct = [2.1, 1.3, -1.7];
            let y = [0.3, -0.25, 0.35];
            let x = vec3::add(ct, [-0.3, 0.4, 0.2]);
            let mut m = zeros(p);
            p2m(k, cs, y, Complex64::new(1.0, 0.0), &mut m, &mut ws);
            let op = tr.operator(TranslationKind::MultipoleToLocal, vec3::sub(ct, cs)).unwrap();
            let mut l = zeros(p);
            op.apply(&m, &mut l, &mut TranslationScratch::new(p));
            let v = l2p(k, ct, x, &l, &mut ws);
            let exact = green(x, y, WaveNumber::real(k)).unwrap();
            errs.push((v - exact).norm() / exact.norm());
        }
        assert!(errs[1] < 1e-3, "{errs:?}");
        assert!(errs[2] < errs[1] && errs[1] < errs[0], "{errs:?}");
    }

    #[test]
    fn l2l_matches_parent_evaluation() {
        let p = 10;
        let k = 1.3;
        let mut tr = Translator::new(p, k, 1e-12).unwrap();
        let mut ws = Workspace::new(p);
        let parent = [0.0; 3];
        let child = [-0.25, 0.25, 0.25];
        let mut lp = zeros(p);
        p2l(k, parent, [3.0, 2.0, -2.5], Complex64::new(1.0, -1.0), &mut lp, &mut ws);
        let op = tr.operator(TranslationKind::LocalToLocal, vec3::sub(child, parent)).unwrap();
        let mut lc = zeros(p);
        op.apply(&lp, &mut lc, &mut TranslationScratch::new(p));
        let x = vec3::add(child, [0.1, -0.05, 0.08]);
        let a = l2p(k, parent, x, &lp, &mut ws);
        let b = l2p(k, child, x, &lc, &mut ws);
        assert!((a - b).norm() / a.norm() < 1e-9, "{}", (a - b).norm() / a.norm());
    }

    #[test]
    fn axis_aligned_and_reversed_translations() {
        let p = 8;
        let k = 0.9;
        let mut tr = Translator::new(p, k, 1e-12).unwrap();
        let mut ws = Workspace::new(p);
        for t in [[0.0, 0.0, 2.5], [0.0, 0.0, -2.5], [2.5, 0.0, 0.0]] {
            let y = [0.1, 0.2, -0.15];
            let x = vec3::add(t, [0.05, -0.1, 0.12]);
            let mut m = zeros(p);
            p2m(k, [0.0; 3], y, Complex64::new(1.0, 0.0), &mut m, &mut ws);
            let op = tr.operator(TranslationKind::MultipoleToLocal, t).unwrap();
            let mut l = zeros(p);
            op.apply(&m, &mut l, &mut TranslationScratch::new(p));
            let v = l2p(k, t, x, &l, &mut ws);
            let exact = green(x, y, WaveNumber::real(k)).unwrap();
            assert!((v - exact).norm() / exact.norm() < 1e-4, "t={t:?}");
        }
    }

    #[test]
    fn operators_are_linear_and_cached() {
        let p = 6;
        let mut tr = Translator::new(p, 1.0, 1e-12).unwrap();
        let op = tr.operator(TranslationKind::MultipoleToLocal, [1.0, 2.0, 2.0]).unwrap();
        let _ = tr.operator(TranslationKind::MultipoleToLocal, [1.0, 2.0, 2.0]).unwrap();
        assert_eq!(tr.cached_operators(), 1);
        let m: Vec<Complex64> = (0..coeff_len(p)).map(|i| Complex64::new(i as f64 * 0.1, 1.0 - i as f64 * 0.05)).collect();
        let alpha = Complex64::new(0.7, -1.3);
        let scaled: Vec<Complex64> = m.iter().map(|c| c * alpha).collect();
        let mut s = TranslationScratch::new(p);
        let mut a = zeros(p);
        let mut b = zeros(p);
        op.apply(&m, &mut a, &mut s);
        op.apply(&scaled, &mut b, &mut s);
        for (x, y) in a.iter().zip(&b) {
            assert!((x * alpha - y).norm() <= 1e-14 * y.norm().max(1.0));
        }
        let mut z = zeros(p);
        op.apply(&zeros(p), &mut z, &mut s);
        assert!(z.iter().all(|c| c.norm() == 0.0));
    }
}
