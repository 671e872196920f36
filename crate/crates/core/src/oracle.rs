//! Reference solutions: the partial-wave series for a sound-soft sphere and
//! the exhaustive dense matrix-vector product.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::{green_distance, WaveNumber};
use crate::math;
use crate::solver::system::{DiscreteSystem, SingularityMode};
use crate::special::{legendre, spherical_jn, spherical_yn};
use crate::vec3::{self, Point3};

/// Largest system handed to [`dense_matvec`].
pub const DENSE_LIMIT: usize = 50_000;

/// Plane wave `e^{ikz}` scattered by a sound-soft sphere centred at the origin.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MieConfig {
    pub radius: f64,
    pub k: WaveNumber,
    /// Number of partial waves; chosen automatically when `None`.
    pub terms: Option<usize>,
}

impl MieConfig {
    pub fn new(radius: f64, k: WaveNumber) -> Self {
        Self { radius, k, terms: None }
    }

    /// Default truncation `ka + 10·(ka)^{1/3} + 20`.
    pub fn default_terms(&self) -> usize {
        let ka = self.k.wave_r * self.radius;
        (ka + 10.0 * math::exp(math::ln(ka.max(1e-3)) / 3.0) + 20.0) as usize
    }
}

/// Scattered pressure at each observation point.
pub fn mie_soft_sphere(cfg: &MieConfig, points: &[Point3]) -> Result<Vec<Complex64>> {
    let k = cfg.k.wave_r;
    if !(cfg.radius > 0.0) || !(k > 0.0) {
        return Err(Error::Config("Mie series needs a > 0 and k > 0".into()));
    }
    let nt = cfg.terms.unwrap_or_else(|| cfg.default_terms());
    if nt < 2 {
        return Err(Error::Config("Mie series needs at least two terms".into()));
    }
    let ka = k * cfg.radius;
    let ja = spherical_jn(nt, ka);
    let ya = spherical_yn(nt, ka);
    // -(2n+1) i^n j_n(ka) / h_n(ka)
    let coeff: Vec<Complex64> = (0..=nt)
        .map(|n| {
            let ipow = match n % 4 {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, 1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, -1.0),
            };
            -ipow * (2 * n + 1) as f64 * ja[n] / Complex64::new(ja[n], ya[n])
        })
        .collect();
    points
        .iter()
        .map(|x| {
            let r = vec3::norm(*x);
            if !(r > cfg.radius * (1.0 - 1e-12)) {
                return Err(Error::Precondition("observation point inside the sphere".into()));
            }
            let ct = x[2] / r;
            let jr = spherical_jn(nt, k * r);
            let yr = spherical_yn(nt, k * r);
            let pl = legendre(nt, ct);
            let mut sum = Complex64::new(0.0, 0.0);
            let mut last = 0.0;
            for n in 0..=nt {
                let term = coeff[n] * Complex64::new(jr[n], yr[n]) * pl[n];
                sum += term;
                last = term.norm();
            }
            if !(last <= 1e-12 * sum.norm().max(1e-300)) || !sum.re.is_finite() {
                return Err(Error::Accuracy(alloc::format!("Mie series not converged with {nt} terms")));
            }
            Ok(sum)
        })
        .collect()
}

/// Points at radius `r` in the `xz` half-plane (`φ = 0`), `θ` spaced evenly over `[0°, 180°]`.
pub fn meridian_points(r: f64, count: usize) -> Vec<Point3> {
    (0..count)
        .map(|i| {
            let theta = if count > 1 { math::PI * i as f64 / (count - 1) as f64 } else { 0.0 };
            let (s, c) = math::sin_cos(theta);
            [r * s, 0.0, r * c]
        })
        .collect()
}

/// `max |a − b| / max |b|`.
pub fn max_relative_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let den = b.iter().map(|y| y.norm()).fold(0.0, f64::max);
    num / den
}

/// `Z·x` by exhaustive double loops with the same quadrature rules as
/// [`DiscreteSystem::apply_operator`].
pub fn dense_matvec(system: &DiscreteSystem, x: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = system.len();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { n, limit: DENSE_LIMIT });
    }
    if x.len() != n {
        return Err(Error::Dimension { expected: n, got: x.len() });
    }
    let k = system.wavenumber();
    let ni = system.points_per_patch();
    let mode = system.config().mode;
    let pts = system.points();
    let pos = system.positions();
    let w = system.weights();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let pi = pts[i].patch_id;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut j = 0;
        while j < n {
            let pj = pts[j].patch_id;
            if pj == pi {
                if mode == SingularityMode::None {
                    for jj in j..j + ni {
                        if jj != i {
                            acc += w[jj] * green_distance(vec3::dist(pos[i], pos[jj]), k) * x[jj];
                        }
                    }
                } else {
                    let row = system.self_row(i)?;
                    for m in 0..ni {
                        acc += row[m] * x[j + m];
                    }
                }
            } else {
                let mut near_row = None;
                for jj in j..j + ni {
                    if system.is_near(i, jj) {
                        if near_row.is_none() {
                            near_row = Some(system.near_row(i, pj)?);
                        }
                        acc += near_row.as_ref().unwrap()[pts[jj].interp_index] * x[jj];
                    } else {
                        acc += w[jj] * green_distance(vec3::dist(pos[i], pos[jj]), k) * x[jj];
                    }
                }
            }
            j += ni;
        }
        out[i] = acc;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_boundary_is_satisfied() {
        let k = WaveNumber::real(2.0);
        let cfg = MieConfig::new(1.0, k);
        let pts = meridian_points(1.0, 37);
        let ps = mie_soft_sphere(&cfg, &pts).unwrap();
        for (p, s) in pts.iter().zip(&ps) {
            let inc = (Complex64::i() * 2.0 * p[2]).exp();
            assert!((inc + s).norm() < 1e-8, "{}", (inc + s).norm());
        }
    }

    #[test]
    fn axisymmetric_and_self_converged() {
        let k = WaveNumber::real(2.0);
        let cfg = MieConfig::new(1.0, k);
        let a = mie_soft_sphere(&cfg, &[[4.0 * 0.6, 0.0, 4.0 * 0.8]]).unwrap()[0];
        let b = mie_soft_sphere(&cfg, &[[0.0, 4.0 * 0.6, 4.0 * 0.8]]).unwrap()[0];
        assert!((a - b).norm() < 1e-14);
        let double = MieConfig {
            terms: Some(2 * cfg.default_terms()),
            ..cfg
        };
        let c = mie_soft_sphere(&double, &[[4.0 * 0.6, 0.0, 4.0 * 0.8]]).unwrap()[0];
        assert!((a - c).norm() / a.norm() < 1e-10);
    }

    #[test]
    fn too_few_terms_is_an_accuracy_error() {
        let cfg = MieConfig {
            terms: Some(3),
            ..MieConfig::new(1.0, WaveNumber::real(6.0))
        };
        assert!(matches!(mie_soft_sphere(&cfg, &[[0.0, 0.0, 1.5]]), Err(Error::Accuracy(_))));
    }
}
