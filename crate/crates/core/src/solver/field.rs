//! Single-layer potentials of a solved density.
//!
//! With the density `q` solving `∫ G q = p_inc` on the surface, the field
//! `p_s = −∫ G q` cancels the incident wave on the boundary.

use alloc::vec::Vec;
use num_complex::Complex64;

use super::system::DiscreteSystem;
use crate::error::{Error, Result};
use crate::kernel::green_distance;
use crate::vec3::{self, Point3};

/// `Σ_j w_j q_j G(x, r_j)` at every observation point.
pub fn single_layer(system: &DiscreteSystem, density: &[Complex64], observations: &[Point3]) -> Result<Vec<Complex64>> {
    if density.len() != system.len() {
        return Err(Error::Dimension {
            expected: system.len(),
            got: density.len(),
        });
    }
    let k = system.wavenumber();
    let strengths: Vec<Complex64> = density.iter().zip(system.weights()).map(|(q, w)| q * w).collect();
    observations
        .iter()
        .map(|x| {
            check_off_surface(system, *x)?;
            let mut acc = Complex64::new(0.0, 0.0);
            for (y, s) in system.positions().iter().zip(&strengths) {
                let r = vec3::dist(*x, *y);
                if r == 0.0 {
                    return Err(Error::SingularEvaluation);
                }
                acc += s * green_distance(r, k);
            }
            Ok(acc)
        })
        .collect()
}

/// Scattered pressure `−Σ_j w_j q_j G(x, r_j)`.
pub fn evaluate_scattered_field(
    system: &DiscreteSystem,
    density: &[Complex64],
    observations: &[Point3],
) -> Result<Vec<Complex64>> {
    Ok(single_layer(system, density, observations)?.into_iter().map(|v| -v).collect())
}

fn check_off_surface(system: &DiscreteSystem, x: Point3) -> Result<()> {
    for patch in system.patches() {
        let d = patch.diameter();
        if vec3::dist(x, patch.centroid()) > d {
            continue;
        }
        let p = patch.closest_reference_point(x);
        if vec3::dist(x, patch.map_to_physical(p)) <= 1e-9 * d {
            return Err(Error::SingularEvaluation);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::WaveNumber;
    use crate::mesh::icosphere;
    use crate::solver::system::{Backend, SystemConfig};

    #[test]
    fn zero_density_and_surface_rejection() {
        let mesh = icosphere(1.0, 1).unwrap();
        let cfg = SystemConfig {
            backend: Backend::Direct,
            ..Default::default()
        };
        let s = DiscreteSystem::new(&mesh, WaveNumber::real(1.0), cfg).unwrap();
        let zero = alloc::vec![Complex64::new(0.0, 0.0); s.len()];
        let v = evaluate_scattered_field(&s, &zero, &[[0.0, 0.0, 4.0]]).unwrap();
        assert_eq!(v[0], Complex64::new(0.0, 0.0));
        let on = s.patches()[3].map_to_physical(crate::geometry::ReferencePoint::new(0.2, 0.3));
        assert!(matches!(evaluate_scattered_field(&s, &zero, &[on]), Err(Error::SingularEvaluation)));
    }

    #[test]
    fn one_sample_gives_green() {
        let mesh = icosphere(1.0, 1).unwrap();
        let cfg = SystemConfig {
            backend: Backend::Direct,
            ..Default::default()
        };
        let s = DiscreteSystem::new(&mesh, WaveNumber::real(1.5), cfg).unwrap();
        let mut q = alloc::vec![Complex64::new(0.0, 0.0); s.len()];
        q[7] = Complex64::new(1.0 / s.weights()[7], 0.0);
        let x = [0.5, -1.0, 3.0];
        let v = single_layer(&s, &q, &[x]).unwrap();
        let g = crate::kernel::green(x, s.positions()[7], WaveNumber::real(1.5)).unwrap();
        assert!((v[0] - g).norm() < 1e-15);
    }
}
