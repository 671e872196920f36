//! Truncated multipole and local expansions of the Helmholtz kernel.
//!
//! With `R_n^m(r) = j_n(k|r|) Y_n^m(r̂)` and `S_n^m(r) = h_n(k|r|) Y_n^m(r̂)`
//! the addition theorem reads, for `|x - c| > |y - c|`,
//!
//! `G(x, y) = ik Σ_{n,m} S_n^m(x - c) conj(R_n^m(y - c))`.
//!
//! A multipole expansion about `c` stores `M_n^m = Σ_q Q_q conj(R_n^m(y_q - c))`
//! and is evaluated as `ik Σ M_n^m S_n^m(x - c)`. A local expansion stores
//! `L_n^m = Σ_q Q_q h_n(k|y_q - c|) conj(Y_n^m)` and is evaluated as
//! `ik Σ L_n^m R_n^m(x - c)`. The factor `ik` is applied only at evaluation.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math;
use crate::special::{coeff_len, spherical_harmonics_into, spherical_jn_into, spherical_yn_into};
use crate::vec3::{self, Point3};

/// Coefficients `C_n^m`, `0 <= n <= order`, stored at `n² + n + m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Expansion {
    pub order: usize,
    pub coeffs: Vec<Complex64>,
}

impl Expansion {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            coeffs: vec![Complex64::new(0.0, 0.0); coeff_len(order)],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }
}

/// Reusable buffers for basis evaluations of one order.
#[derive(Clone, Debug)]
pub struct Workspace {
    order: usize,
    legendre: Vec<f64>,
    harmonics: Vec<Complex64>,
    jn: Vec<f64>,
    yn: Vec<f64>,
    scratch: Vec<f64>,
}

impl Workspace {
    pub fn new(order: usize) -> Self {
        Self {
            order,
            legendre: vec![0.0; (order + 1) * (order + 2) / 2],
            harmonics: vec![Complex64::new(0.0, 0.0); coeff_len(order)],
            jn: vec![0.0; order + 1],
            yn: vec![0.0; order + 1],
            scratch: Vec::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Harmonics of the direction of `rel` into the internal buffer; returns `|rel|`.
    fn harmonics(&mut self, rel: Point3) -> f64 {
        let r = vec3::norm(rel);
        let rho = math::sqrt(rel[0] * rel[0] + rel[1] * rel[1]);
        let (ct, st) = if r > 0.0 { (rel[2] / r, rho / r) } else { (1.0, 0.0) };
        let e = if rho > 0.0 {
            Complex64::new(rel[0] / rho, rel[1] / rho)
        } else {
            Complex64::new(1.0, 0.0)
        };
        spherical_harmonics_into(self.order, ct, st, e, &mut self.legendre, &mut self.harmonics);
        r
    }
}

/// Regular basis `R_n^m(rel)` for `n <= order`.
pub fn regular_basis(k: f64, rel: Point3, order: usize) -> Vec<Complex64> {
    let mut ws = Workspace::new(order);
    let r = ws.harmonics(rel);
    spherical_jn_into(order, k * r, &mut ws.jn, &mut ws.scratch);
    let mut out = ws.harmonics.clone();
    for n in 0..=order {
        for m in 0..(2 * n + 1) {
            out[n * n + m] *= ws.jn[n];
        }
    }
    out
}

/// Singular basis `S_n^m(rel)` for `n <= order`; `rel` must be non-zero.
pub fn singular_basis(k: f64, rel: Point3, order: usize) -> Result<Vec<Complex64>> {
    let mut ws = Workspace::new(order);
    let r = ws.harmonics(rel);
    if r == 0.0 || k == 0.0 {
        return Err(Error::SingularEvaluation);
    }
    spherical_jn_into(order, k * r, &mut ws.jn, &mut ws.scratch);
    spherical_yn_into(order, k * r, &mut ws.yn);
    let mut out = ws.harmonics.clone();
    for n in 0..=order {
        let h = Complex64::new(ws.jn[n], ws.yn[n]);
        for m in 0..(2 * n + 1) {
            out[n * n + m] *= h;
        }
    }
    Ok(out)
}

/// Both basis sets at once.
pub fn basis_functions(k: f64, rel: Point3, order: usize) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    Ok((regular_basis(k, rel, order), singular_basis(k, rel, order)?))
}

/// Add a source of strength `q` at `y` to the multipole `m` about `center`.
pub fn p2m(k: f64, center: Point3, y: Point3, q: Complex64, m: &mut [Complex64], ws: &mut Workspace) {
    let p = ws.order;
    let r = ws.harmonics(vec3::sub(y, center));
    spherical_jn_into(p, k * r, &mut ws.jn, &mut ws.scratch);
    for n in 0..=p {
        let a = q * ws.jn[n];
        let base = n * n + n;
        for mm in -(n as isize)..=(n as isize) {
            let i = (base as isize + mm) as usize;
            m[i] += a * ws.harmonics[i].conj();
        }
    }
}

/// Evaluate the multipole `m` about `center` at `x`, including the `ik` factor.
pub fn m2p(k: f64, center: Point3, x: Point3, m: &[Complex64], ws: &mut Workspace) -> Complex64 {
    let p = ws.order;
    let r = ws.harmonics(vec3::sub(x, center));
    spherical_jn_into(p, k * r, &mut ws.jn, &mut ws.scratch);
    spherical_yn_into(p, k * r, &mut ws.yn);
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..=p {
        let h = Complex64::new(ws.jn[n], ws.yn[n]);
        let mut s = Complex64::new(0.0, 0.0);
        for i in n * n..(n + 1) * (n + 1) {
            s += m[i] * ws.harmonics[i];
        }
        acc += h * s;
    }
    Complex64::new(0.0, k) * acc
}

/// Add a source of strength `q` at `y` to the local expansion `l` about `center`.
pub fn p2l(k: f64, center: Point3, y: Point3, q: Complex64, l: &mut [Complex64], ws: &mut Workspace) {
    let p = ws.order;
    let r = ws.harmonics(vec3::sub(y, center));
    spherical_jn_into(p, k * r, &mut ws.jn, &mut ws.scratch);
    spherical_yn_into(p, k * r, &mut ws.yn);
    for n in 0..=p {
        let a = q * Complex64::new(ws.jn[n], ws.yn[n]);
        for i in n * n..(n + 1) * (n + 1) {
            l[i] += a * ws.harmonics[i].conj();
        }
    }
}

/// Evaluate the local expansion `l` about `center` at `x`, including the `ik` factor.
pub fn l2p(k: f64, center: Point3, x: Point3, l: &[Complex64], ws: &mut Workspace) -> Complex64 {
    let p = ws.order;
    let r = ws.harmonics(vec3::sub(x, center));
    spherical_jn_into(p, k * r, &mut ws.jn, &mut ws.scratch);
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..=p {
        let mut s = Complex64::new(0.0, 0.0);
        for i in n * n..(n + 1) * (n + 1) {
            s += l[i] * ws.harmonics[i];
        }
        acc += s * ws.jn[n];
    }
    Complex64::new(0.0, k) * acc
}
