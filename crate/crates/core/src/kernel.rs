//! The Helmholtz Green's function and particle-to-particle interactions.
//!
//! Pairs are split in three regimes: samples on the same patch are skipped
//! (their contribution comes from singular quadrature elsewhere), samples
//! within the near-patch distance are re-integrated over the source patch,
//! and everything else uses the one-point approximation
//! `strength · G(r_target, r_source)`.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{duffy_rule, subdivided_gauss_rule, CurvilinearPatch, LagrangeBasis, ReferencePoint};
use crate::math;
use crate::vec3::{self, Point3};

/// Complex wavenumber `k = wave_r + i·wave_i`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WaveNumber {
    pub wave_r: f64,
    pub wave_i: f64,
}

/// Speed of sound in air used to convert frequencies, m/s.
pub const SOUND_SPEED: f64 = 343.0;

impl WaveNumber {
    pub const fn new(wave_r: f64, wave_i: f64) -> Self {
        Self { wave_r, wave_i }
    }

    pub const fn real(k: f64) -> Self {
        Self::new(k, 0.0)
    }

    /// `k = 2πf / c`.
    pub fn from_frequency(frequency: f64, sound_speed: f64) -> Result<Self> {
        if !(frequency > 0.0) || !(sound_speed > 0.0) {
            return Err(Error::Config("frequency and sound speed must be positive".into()));
        }
        Ok(Self::real(2.0 * math::PI * frequency / sound_speed))
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.wave_r, self.wave_i)
    }

    pub fn is_real(&self) -> bool {
        self.wave_i == 0.0
    }
}

/// `e^{ikR} / (4πR)` for a distance `R > 0`.
#[inline(always)]
pub fn green_distance(r: f64, k: WaveNumber) -> Complex64 {
    let (s, c) = math::sin_cos(k.wave_r * r);
    let amp = if k.wave_i == 0.0 {
        1.0 / (math::FOUR_PI * r)
    } else {
        math::exp(-k.wave_i * r) / (math::FOUR_PI * r)
    };
    Complex64::new(amp * c, amp * s)
}

/// Free-space Helmholtz Green's function between two points.
pub fn green(r: Point3, r_src: Point3, k: WaveNumber) -> Result<Complex64> {
    let d = vec3::dist(r, r_src);
    if d == 0.0 {
        return Err(Error::SingularEvaluation);
    }
    Ok(green_distance(d, k))
}

/// A discretisation sample acting as source or target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceSample {
    pub position: Point3,
    /// Quadrature-weighted strength used by the one-point approximation.
    pub strength: Complex64,
    /// Density coefficient used when the owning patch is re-integrated.
    pub density: Complex64,
    pub patch_id: usize,
    pub interp_index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelConfig {
    /// Pairs closer than this are re-integrated over the source patch.
    pub near_patch_distance: f64,
    /// Points per dimension of the near-patch rule.
    pub near_rule: usize,
    /// Points per dimension of the self-patch Duffy rule.
    pub self_rule: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            near_patch_distance: 0.0,
            near_rule: 8,
            self_rule: 8,
        }
    }
}

/// Near-patch distance of two circumscribed diameters of `patch`.
pub fn default_near_distance(patch: &CurvilinearPatch) -> f64 {
    2.0 * patch.diameter()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    SamePatch,
    Near,
    Far,
}

pub fn classify(target: &SourceSample, source: &SourceSample, cfg: &KernelConfig) -> Regime {
    let r = vec3::dist(target.position, source.position);
    if target.patch_id == source.patch_id || r == 0.0 {
        Regime::SamePatch
    } else if r <= cfg.near_patch_distance {
        Regime::Near
    } else {
        Regime::Far
    }
}

/// Patch geometry needed to re-integrate near pairs.
pub struct NearContext<'a> {
    pub patches: &'a [CurvilinearPatch],
    pub basis: &'a LagrangeBasis,
}

/// Three-regime particle-to-particle accumulation, one value per target.
///
/// Near pairs need `near`; without it they fall back to the one-point rule.
pub fn p2p(
    targets: &[SourceSample],
    sources: &[SourceSample],
    k: WaveNumber,
    cfg: &KernelConfig,
    near: Option<&NearContext<'_>>,
) -> Result<Vec<Complex64>> {
    let mut out = vec![Complex64::new(0.0, 0.0); targets.len()];
    for (t, acc) in targets.iter().zip(out.iter_mut()) {
        for s in sources {
            match classify(t, s, cfg) {
                Regime::SamePatch => {}
                Regime::Near if near.is_some() => {
                    let ctx = near.unwrap();
                    let row = near_patch_row(t.position, &ctx.patches[s.patch_id], ctx.basis, k, cfg.near_rule)?;
                    *acc += s.density * row[s.interp_index];
                }
                _ => {
                    *acc += s.strength * green_distance(vec3::dist(t.position, s.position), k);
                }
            }
        }
    }
    Ok(out)
}

/// `∫ G(obs, r(ζ,η)) L_i(ζ,η) J(ζ,η) dζ dη` for every basis function `i`.
///
/// The rule is an elevated Gauss rule refined as `obs` approaches the patch:
/// beyond 1.5 diameters from the centroid the 12-point rule on 4
/// sub-triangles, beyond 0.9 diameters on 16 sub-triangles, and closer than
/// that a Duffy rule with `npoints_per_dim` points per direction centred on
/// the reference point nearest to `obs`.
pub fn near_patch_row(
    obs: Point3,
    patch: &CurvilinearPatch,
    basis: &LagrangeBasis,
    k: WaveNumber,
    npoints_per_dim: usize,
) -> Result<[Complex64; 12]> {
    let ratio = vec3::dist(obs, patch.centroid()) / patch.diameter();
    let rule = if ratio >= 1.5 {
        subdivided_gauss_rule(1)
    } else if ratio >= 0.9 {
        subdivided_gauss_rule(2)
    } else {
        duffy_rule(patch.closest_reference_point(obs), npoints_per_dim)?
    };
    integrate_row(obs, patch, basis, k, &rule)
}

fn integrate_row(
    obs: Point3,
    patch: &CurvilinearPatch,
    basis: &LagrangeBasis,
    k: WaveNumber,
    rule: &[(ReferencePoint, f64)],
) -> Result<[Complex64; 12]> {
    let mut row = [Complex64::new(0.0, 0.0); 12];
    let mut l = [0.0; 12];
    let n = basis.len();
    for &(p, w) in rule {
        let x = patch.map_to_physical(p);
        let r = vec3::dist(obs, x);
        if r == 0.0 {
            return Err(Error::SingularEvaluation);
        }
        let (jac, _) = patch.jacobian(p)?;
        let g = green_distance(r, k) * (w * jac);
        basis.eval_all(p, &mut l);
        for i in 0..n {
            row[i] += g * l[i];
        }
    }
    Ok(row)
}

/// Near-patch integral of the density `Σ_i density_i L_i` seen from `obs`.
pub fn near_patch_integral(
    obs: Point3,
    patch: &CurvilinearPatch,
    density: &[Complex64],
    basis: &LagrangeBasis,
    k: WaveNumber,
    npoints_per_dim: usize,
) -> Result<Complex64> {
    if density.len() != basis.len() {
        return Err(Error::Dimension {
            expected: basis.len(),
            got: density.len(),
        });
    }
    let row = near_patch_row(obs, patch, basis, k, npoints_per_dim)?;
    Ok(density.iter().zip(&row).map(|(d, r)| d * r).sum())
}

/// Singular integrals from the interpolation point `node` of `patch` to every
/// basis function of the same patch.
pub fn self_patch_row(
    node: usize,
    patch: &CurvilinearPatch,
    basis: &LagrangeBasis,
    k: WaveNumber,
    npoints_per_dim: usize,
) -> Result<[Complex64; 12]> {
    let nodes = basis.order().nodes();
    let (centre, _) = *nodes.get(node).ok_or_else(|| {
        Error::Precondition(alloc::format!("interpolation index {node} not on the patch"))
    })?;
    let obs = patch.map_to_physical(centre);
    integrate_row(obs, patch, basis, k, &duffy_rule(centre, npoints_per_dim)?)
}

/// Self-patch integral of the density `Σ_i density_i L_i` at interpolation point `node`.
pub fn self_patch_integral(
    node: usize,
    patch: &CurvilinearPatch,
    density: &[Complex64],
    basis: &LagrangeBasis,
    k: WaveNumber,
    npoints_per_dim: usize,
) -> Result<Complex64> {
    if density.len() != basis.len() {
        return Err(Error::Dimension {
            expected: basis.len(),
            got: density.len(),
        });
    }
    let row = self_patch_row(node, patch, basis, k, npoints_per_dim)?;
    Ok(density.iter().zip(&row).map(|(d, r)| d * r).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{gauss_rule, BasisOrder};

    fn flat() -> CurvilinearPatch {
        CurvilinearPatch::flat([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 0)
    }

    /// `∫_T 1/|x-y| dA` for `x` in the plane of the flat triangle `T`.
    fn laplace_flat_in_plane(x: Point3, v: [Point3; 3]) -> f64 {
        let mut sum = 0.0;
        for e in 0..3 {
            let a = v[e];
            let b = v[(e + 1) % 3];
            let t = vec3::sub(b, a);
            let len = vec3::norm(t);
            let tu = vec3::scale(t, 1.0 / len);
            // outward in-plane normal of the edge for a counter-clockwise triangle in z = 0
            let nu = [tu[1], -tu[0], 0.0];
            let d = vec3::dot(vec3::sub(a, x), nu);
            let sm = vec3::dot(vec3::sub(a, x), tu);
            let sp = vec3::dot(vec3::sub(b, x), tu);
            let rm = vec3::dist(a, x);
            let rp = vec3::dist(b, x);
            sum += d * ((rp + sp) / (rm + sm)).ln();
        }
        sum
    }

    fn adaptive(f: &dyn Fn(Point3) -> f64, v: [Point3; 3], depth: u32) -> f64 {
        let area = 0.5 * vec3::norm(vec3::cross(vec3::sub(v[1], v[0]), vec3::sub(v[2], v[0])));
        let rule = gauss_rule(12).unwrap();
        let q = |v: [Point3; 3]| -> f64 {
            let area = 0.5 * vec3::norm(vec3::cross(vec3::sub(v[1], v[0]), vec3::sub(v[2], v[0])));
            rule.iter()
                .map(|(p, w)| {
                    let l = p.lambda();
                    let x = [0, 1, 2].map(|d| l * v[0][d] + p.zeta * v[1][d] + p.eta * v[2][d]);
                    2.0 * area * w * f(x)
                })
                .sum()
        };
        let _ = area;
        let m = |a: Point3, b: Point3| vec3::scale(vec3::add(a, b), 0.5);
        let (m01, m12, m20) = (m(v[0], v[1]), m(v[1], v[2]), m(v[2], v[0]));
        let kids = [[v[0], m01, m20], [m01, v[1], m12], [m20, m12, v[2]], [m01, m12, m20]];
        let coarse = q(v);
        let fine: f64 = kids.iter().map(|k| q(*k)).sum();
        if depth == 0 || (coarse - fine).abs() < 1e-13 {
            fine
        } else {
            kids.iter().map(|k| adaptive(f, *k, depth - 1)).sum()
        }
    }

    #[test]
    fn green_limits() {
        let g = green([0.0; 3], [1.0, 0.0, 0.0], WaveNumber::real(0.0)).unwrap();
        assert!((g.re - 0.0795774715459477).abs() < 1e-15 && g.im == 0.0);
        let g = green([0.0; 3], [1.0, 0.0, 0.0], WaveNumber::real(2.0 * math::PI)).unwrap();
        assert!((g - Complex64::new(1.0 / math::FOUR_PI, 0.0)).norm() < 1e-15);
        assert!(matches!(green([1.0; 3], [1.0; 3], WaveNumber::real(1.0)), Err(Error::SingularEvaluation)));
    }

    #[test]
    fn green_matches_complex_exponential() {
        let k = WaveNumber::new(3.1, 0.4);
        let a = [0.3, -0.2, 1.1];
        let b = [-0.7, 0.5, 0.2];
        let r = vec3::dist(a, b);
        let expected = (Complex64::i() * k.as_complex() * r).exp() / (4.0 * core::f64::consts::PI * r);
        let g = green(a, b, k).unwrap();
        assert!((g - expected).norm() / expected.norm() < 1e-14);
        assert_eq!(g, green(b, a, k).unwrap());
    }

    fn sample(pos: Point3, patch: usize) -> SourceSample {
        SourceSample {
            position: pos,
            strength: Complex64::new(1.0, 0.0),
            density: Complex64::new(1.0, 0.0),
            patch_id: patch,
            interp_index: 0,
        }
    }

    #[test]
    fn p2p_regimes() {
        let cfg = KernelConfig::default();
        let k = WaveNumber::real(0.0);
        let same = p2p(&[sample([0.0; 3], 0)], &[sample([1.0, 0.0, 0.0], 0)], k, &cfg, None).unwrap();
        assert_eq!(same[0], Complex64::new(0.0, 0.0));
        let far = p2p(&[sample([0.0; 3], 0)], &[sample([1.0, 0.0, 0.0], 1)], k, &cfg, None).unwrap();
        assert!((far[0].re - 1.0 / math::FOUR_PI).abs() < 1e-15);
    }

    #[test]
    fn self_integral_matches_flat_laplace_formula() {
        let p = flat();
        let basis = LagrangeBasis::new(BasisOrder::Quadratic);
        let ones = vec![Complex64::new(1.0, 0.0); 6];
        let v = [p.nodes[0], p.nodes[1], p.nodes[2]];
        for node in 0..6 {
            let s = self_patch_integral(node, &p, &ones, &basis, WaveNumber::real(0.0), 8).unwrap();
            let x = p.map_to_physical(BasisOrder::Quadratic.nodes()[node].0);
            let exact = laplace_flat_in_plane(x, v) / math::FOUR_PI;
            assert!((s.re - exact).abs() < 1e-5, "node {node}: {} vs {exact}", s.re);
            let s16 = self_patch_integral(node, &p, &ones, &basis, WaveNumber::real(0.0), 16).unwrap();
            assert!((s16.re - exact).abs() < 1e-9, "n16 {}", (s16.re - exact).abs());
        }
    }

    #[test]
    fn self_integral_is_converged_at_default_rule() {
        let p = CurvilinearPatch::new(
            [
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.1],
                [0.0, 1.0, -0.05],
                [0.5, 0.0, 0.12],
                [0.5, 0.5, 0.15],
                [0.0, 0.5, 0.05],
            ],
            0,
        );
        let basis = LagrangeBasis::new(BasisOrder::Quadratic);
        let d: Vec<Complex64> = (0..6).map(|i| Complex64::new(1.0 + i as f64 * 0.1, -0.2)).collect();
        let k = WaveNumber::real(2.0);
        for node in 0..6 {
            let a = self_patch_integral(node, &p, &d, &basis, k, 8).unwrap();
            let b = self_patch_integral(node, &p, &d, &basis, k, 16).unwrap();
            assert!(a.re.is_finite() && a.im.is_finite());
            assert!((a - b).norm() < 1e-6, "{}", (a - b).norm());
        }
    }

    #[test]
    fn near_integral_matches_adaptive_laplace() {
        let p = flat();
        let basis = LagrangeBasis::new(BasisOrder::Quadratic);
        let ones = vec![Complex64::new(1.0, 0.0); 6];
        let obs = vec3::add(p.centroid(), [0.0, 0.0, 0.1 * p.diameter()]);
        let v = [p.nodes[0], p.nodes[1], p.nodes[2]];
        let exact = adaptive(&|y| 1.0 / (math::FOUR_PI * vec3::dist(obs, y)), v, 8);
        let s = near_patch_integral(obs, &p, &ones, &basis, WaveNumber::real(0.0), 8).unwrap();
        assert!((s.re - exact).abs() < 1e-4, "{} {exact}", s.re);
        let mut prev = f64::INFINITY;
        for n in [4, 8, 16] {
            let a = near_patch_integral(obs, &p, &ones, &basis, WaveNumber::real(0.0), n).unwrap();
            let err = (a.re - exact).abs();
            assert!(err < prev);
            prev = err;
        }
    }

    #[test]
    fn near_integral_far_limit_is_one_point_rule() {
        let p = flat();
        let basis = LagrangeBasis::new(BasisOrder::Quadratic);
        let k = WaveNumber::real(1.0);
        let obs = [30.0, 20.0, 10.0];
        let row = near_patch_row(obs, &p, &basis, k, 8).unwrap();
        for (i, (r, w)) in BasisOrder::Quadratic.nodes().iter().enumerate() {
            let one_point = green(obs, p.map_to_physical(*r), k).unwrap() * *w;
            assert!((row[i] - one_point).norm() / one_point.norm() < 1e-2);
        }
    }

    #[test]
    fn near_rule_tiers_agree_with_fine_duffy() {
        let p = CurvilinearPatch::new(
            [
                [0.0, 0.0, 0.0],
                [0.1, 0.0, 0.01],
                [0.0, 0.1, -0.005],
                [0.05, 0.0, 0.012],
                [0.05, 0.05, 0.015],
                [0.0, 0.05, 0.005],
            ],
            0,
        );
        let basis = LagrangeBasis::new(BasisOrder::Quadratic);
        let k = WaveNumber::real(2.0);
        let c = p.centroid();
        let d = p.diameter();
        for (dir, ratio) in [([0.3, 0.2, 1.0], 0.3), ([1.0, 0.4, 0.2], 0.95), ([-1.0, 0.2, 0.3], 1.2), ([0.2, -1.0, 0.5], 1.6), ([1.0, 1.0, 0.1], 3.0)] {
            let obs = vec3::add(c, vec3::scale(dir, ratio * d / vec3::norm(dir)));
            let row = near_patch_row(obs, &p, &basis, k, 8).unwrap();
            let fine = integrate_row(obs, &p, &basis, k, &duffy_rule(p.closest_reference_point(obs), 32).unwrap()).unwrap();
            let scale = fine[..6].iter().map(|v| v.norm()).fold(0.0, f64::max);
            for i in 0..6 {
                assert!((row[i] - fine[i]).norm() / scale < 1e-6, "ratio {ratio}, i {i}: {}", (row[i] - fine[i]).norm() / scale);
            }
        }
    }
}
