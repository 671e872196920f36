//! Spherical Bessel/Hankel functions, Legendre functions, spherical harmonics
//! and Gauss–Legendre nodes.
//!
//! Spherical harmonics use the orthonormal convention without the
//! Condon–Shortley phase, so that `Y_n^{-m} = conj(Y_n^m)`:
//!
//! `Y_n^m(θ, φ) = sqrt((2n+1)/(4π) (n-|m|)!/(n+|m|)!) P_n^{|m|}(cos θ) e^{imφ}`.
//!
//! Coefficient arrays of order `P` are stored flat with index `n² + n + m`.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::math;

/// Flat index of `(n, m)` in a `(P+1)²` coefficient array.
#[inline]
pub const fn nm_index(n: usize, m: i64) -> usize {
    ((n * n + n) as i64 + m) as usize
}

/// Number of `(n, m)` pairs with `n <= order`.
#[inline]
pub const fn coeff_len(order: usize) -> usize {
    (order + 1) * (order + 1)
}

/// Spherical Bessel functions of the first kind `j_0(x) ..= j_nmax(x)` for `x >= 0`.
///
/// Upward recurrence when every order is below the argument, Miller's
/// backward recurrence with rescaling otherwise.
pub fn spherical_jn(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    spherical_jn_into(nmax, x, &mut out, &mut Vec::new());
    out
}

/// In-place form of [`spherical_jn`]; `scratch` is reused between calls.
pub fn spherical_jn_into(nmax: usize, x: f64, out: &mut [f64], scratch: &mut Vec<f64>) {
    out[..=nmax].fill(0.0);
    if x == 0.0 {
        out[0] = 1.0;
        return;
    }
    let (s, c) = math::sin_cos(x);
    let j0 = s / x;
    if nmax == 0 {
        out[0] = j0;
        return;
    }
    let j1 = (j0 - c) / x;
    if (nmax as f64) <= x {
        out[0] = j0;
        out[1] = j1;
        for n in 1..nmax {
            out[n + 1] = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
        }
        return;
    }
    // Miller: recur downward from well above both nmax and x.
    let start = nmax + 20 + math::sqrt(40.0 * (nmax as f64 + x)) as usize + x as usize;
    scratch.clear();
    scratch.resize(start + 2, 0.0);
    let f = scratch;
    f[start] = 1.0e-280;
    for n in (1..=start).rev() {
        f[n - 1] = (2 * n + 1) as f64 / x * f[n] - f[n + 1];
        if f[n - 1].abs() > 1.0e250 {
            for v in f[n - 1..].iter_mut() {
                *v *= 1.0e-250;
            }
        }
    }
    let scale = if j0.abs() >= j1.abs() { j0 / f[0] } else { j1 / f[1] };
    for (o, v) in out[..=nmax].iter_mut().zip(f.iter()) {
        *o = v * scale;
    }
}

/// Spherical Bessel functions of the second kind `y_0(x) ..= y_nmax(x)` for `x > 0`.
pub fn spherical_yn(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    spherical_yn_into(nmax, x, &mut out);
    out
}

/// In-place form of [`spherical_yn`].
pub fn spherical_yn_into(nmax: usize, x: f64, out: &mut [f64]) {
    let (s, c) = math::sin_cos(x);
    out[0] = -c / x;
    if nmax >= 1 {
        out[1] = -c / (x * x) - s / x;
    }
    for n in 1..nmax {
        out[n + 1] = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
    }
}

/// Spherical Hankel functions of the first kind `h_n = j_n + i y_n`.
pub fn spherical_hn(nmax: usize, x: f64) -> Vec<Complex64> {
    let j = spherical_jn(nmax, x);
    let y = spherical_yn(nmax, x);
    j.iter().zip(&y).map(|(&a, &b)| Complex64::new(a, b)).collect()
}

/// Derivatives `f_n'(x)` from values `f_0..=f_{nmax+1}` of any spherical Bessel family.
///
/// Uses `f_n' = f_{n-1} - (n+1)/x f_n` and `f_0' = -f_1`.
pub fn bessel_derivative<T>(values: &[T], x: f64) -> Vec<T>
where
    T: Copy + core::ops::Sub<Output = T> + core::ops::Mul<f64, Output = T> + core::ops::Neg<Output = T>,
{
    let nmax = values.len() - 2;
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(-values[1]);
    for n in 1..=nmax {
        out.push(values[n - 1] - values[n] * ((n + 1) as f64 / x));
    }
    out
}

/// Legendre polynomials `P_0(x) ..= P_nmax(x)`.
pub fn legendre(nmax: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; nmax + 1];
    p[0] = 1.0;
    if nmax >= 1 {
        p[1] = x;
    }
    for n in 1..nmax {
        p[n + 1] = ((2 * n + 1) as f64 * x * p[n] - n as f64 * p[n - 1]) / (n + 1) as f64;
    }
    p
}

/// Orthonormal associated Legendre values `P̄_n^m(cos θ)` for `0 <= m <= n <= nmax`,
/// stored at `n(n+1)/2 + m`. `P̄_n^m(cos θ) e^{imφ}` is the harmonic `Y_n^m`.
pub fn normalized_legendre(nmax: usize, cos_theta: f64, sin_theta: f64) -> Vec<f64> {
    let mut p = vec![0.0; (nmax + 1) * (nmax + 2) / 2];
    normalized_legendre_into(nmax, cos_theta, sin_theta, &mut p);
    p
}

/// In-place form of [`normalized_legendre`]; `p` needs `(nmax+1)(nmax+2)/2` slots.
pub fn normalized_legendre_into(nmax: usize, cos_theta: f64, sin_theta: f64, p: &mut [f64]) {
    let tri = |n: usize, m: usize| n * (n + 1) / 2 + m;
    p[0] = math::sqrt(1.0 / math::FOUR_PI);
    for m in 1..=nmax {
        p[tri(m, m)] = math::sqrt((2 * m + 1) as f64 / (2 * m) as f64) * sin_theta * p[tri(m - 1, m - 1)];
    }
    for m in 0..nmax {
        p[tri(m + 1, m)] = math::sqrt((2 * m + 3) as f64) * cos_theta * p[tri(m, m)];
    }
    for m in 0..=nmax {
        for n in (m + 2)..=nmax {
            let nf = n as f64;
            let mf = m as f64;
            let a = math::sqrt((4.0 * nf * nf - 1.0) / (nf * nf - mf * mf));
            let b = math::sqrt(((nf - 1.0) * (nf - 1.0) - mf * mf) / (4.0 * (nf - 1.0) * (nf - 1.0) - 1.0));
            p[tri(n, m)] = a * (cos_theta * p[tri(n - 1, m)] - b * p[tri(n - 2, m)]);
        }
    }
}

/// Spherical harmonics `Y_n^m(θ, φ)` for `n <= nmax`, flat `n² + n + m` layout.
pub fn spherical_harmonics(nmax: usize, theta: f64, phi: f64) -> Vec<Complex64> {
    let (st, ct) = math::sin_cos(theta);
    let (sp, cp) = math::sin_cos(phi);
    let mut p = vec![0.0; (nmax + 1) * (nmax + 2) / 2];
    let mut out = vec![Complex64::new(0.0, 0.0); coeff_len(nmax)];
    spherical_harmonics_into(nmax, ct, st, Complex64::new(cp, sp), &mut p, &mut out);
    out
}

/// Harmonics from `cos θ`, `sin θ` and `e^{iφ}` into caller-provided buffers.
pub fn spherical_harmonics_into(
    nmax: usize,
    cos_theta: f64,
    sin_theta: f64,
    e_iphi: Complex64,
    p: &mut [f64],
    out: &mut [Complex64],
) {
    normalized_legendre_into(nmax, cos_theta, sin_theta, p);
    let mut phase = Complex64::new(1.0, 0.0);
    for m in 0..=nmax {
        for n in m..=nmax {
            let v = phase * p[n * (n + 1) / 2 + m];
            out[n * n + n + m] = v;
            if m > 0 {
                out[n * n + n - m] = v.conj();
            }
        }
        phase *= e_iphi;
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = math::cos(math::PI * (i as f64 + 0.75) / (nf + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}
