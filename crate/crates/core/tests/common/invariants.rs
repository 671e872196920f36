//! Randomized invariant checks shared by the property tests and the
//! acceptance suite. Each check pairs a strategy with a function returning
//! a proptest case result.

use helmfmm_core::fmm::{FmmConfig, FmmPlan, TraversalConfig};
use helmfmm_core::fmm::tree::{build_tree, Body};
use helmfmm_core::fmm::dual_tree_traversal;
use helmfmm_core::geometry::{duffy_rule, subdivided_gauss_rule, CurvilinearPatch, ReferencePoint};
use helmfmm_core::kernel::{green, WaveNumber};
use helmfmm_core::solver::{gmres, DenseMatrix, GmresConfig, LinearOperator, NoClock};
use helmfmm_core::{Complex64, Point3};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Randomized cases per invariant.
pub const CASES: u32 = 1000;

fn point(span: f64) -> impl Strategy<Value = Point3> {
    [-span..span, -span..span, -span..span]
}

fn c64(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn reciprocity_cases() -> impl Strategy<Value = (Point3, Point3, f64, f64)> {
    (point(10.0), point(10.0), 0.0..20.0f64, prop_oneof![Just(0.0), 0.0..2.0f64])
}

/// `G(a, b) = G(b, a)` bit for bit.
pub fn check_reciprocity((a, b, kr, ki): (Point3, Point3, f64, f64)) -> Result<(), TestCaseError> {
    let k = WaveNumber::new(kr, ki);
    match (green(a, b, k), green(b, a, k)) {
        (Ok(x), Ok(y)) => {
            prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
            prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
            prop_assert!(x.re.is_finite() && x.im.is_finite());
        }
        (Err(_), Err(_)) => prop_assert_eq!(a, b),
        _ => return Err(TestCaseError::fail("only one direction failed")),
    }
    Ok(())
}

pub fn linearity_cases() -> impl Strategy<Value = (u64, usize, usize, [f64; 4])> {
    (any::<u64>(), 10usize..90, 2usize..7, [-2.0..2.0f64, -2.0..2.0, -2.0..2.0, -2.0..2.0])
}

/// `F(αx + βy) = αF(x) + βF(y)` for the FMM sum.
pub fn check_linearity((seed, n, order, ab): (u64, usize, usize, [f64; 4])) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos: Vec<Point3> = (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen::<f64>().powi(2)]).collect();
    let ids: Vec<usize> = (0..n).collect();
    let mut vec = || -> Vec<Complex64> { (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect() };
    let (x, y) = (vec(), vec());
    let (alpha, beta) = (Complex64::new(ab[0], ab[1]), Complex64::new(ab[2], ab[3]));
    let cfg = FmmConfig {
        order: Some(order),
        traversal: TraversalConfig {
            ncrit: 4,
            grain: 16,
            ..Default::default()
        },
        ..Default::default()
    };
    let plan = FmmPlan::new(&pos, &ids, WaveNumber::real(2.0), &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let fx = plan.evaluate(&x).unwrap();
    let fy = plan.evaluate(&y).unwrap();
    let mixed: Vec<Complex64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
    let fm = plan.evaluate(&mixed).unwrap();
    let diff: Vec<Complex64> = (0..n).map(|i| fm[i] - alpha * fx[i] - beta * fy[i]).collect();
    let scale = alpha.norm() * c64(&fx) + beta.norm() * c64(&fy);
    prop_assert!(c64(&diff) <= 1e-12 * scale.max(f64::MIN_POSITIVE), "{} vs {}", c64(&diff), scale);
    Ok(())
}

pub fn cover_cases() -> impl Strategy<Value = (u64, usize, usize, f64, bool)> {
    (any::<u64>(), 1usize..150, 1usize..20, 0.2..1.0f64, any::<bool>())
}

/// Every ordered body pair is covered by exactly one M2L or P2P entry.
pub fn check_once_cover((seed, n, ncrit, theta, clustered): (u64, usize, usize, f64, bool)) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bodies: Vec<Body> = (0..n)
        .map(|i| {
            let mut p: Point3 = [rng.gen(), rng.gen(), rng.gen()];
            if clustered {
                p = p.map(|c: f64| c.powi(4));
            }
            Body::new(p, Complex64::new(1.0, 0.0), i, i)
        })
        .collect();
    let tree = build_tree(bodies, ncrit, None).unwrap();
    let cfg = TraversalConfig {
        ncrit,
        grain: ncrit.max(8),
        theta,
        deterministic: true,
    };
    let lists = dual_tree_traversal(&tree.cells, 0, &tree.cells, 0, &cfg).unwrap();
    let mut hits = vec![0u32; n * n];
    for &(t, s) in lists.m2l.iter().chain(&lists.p2p) {
        for i in tree.cells[t].body_span.range() {
            for j in tree.cells[s].body_span.range() {
                hits[i * n + j] += 1;
            }
        }
    }
    prop_assert!(hits.iter().all(|&h| h == 1), "cover counts {:?}", hits.iter().max());
    for &(t, s) in &lists.p2p {
        prop_assert!(tree.cells[t].is_leaf() && tree.cells[s].is_leaf());
    }
    Ok(())
}

pub fn gmres_cases() -> impl Strategy<Value = (u64, usize, usize, f64)> {
    (any::<u64>(), 1usize..25, 1usize..30, -10.0..-2.0f64)
}

/// The reported exit residual agrees with an independent recomputation.
pub fn check_true_residual((seed, n, restart, log_rtol): (u64, usize, usize, f64)) -> Result<(), TestCaseError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = 1.0 + 3.0 * rng.gen::<f64>();
    let data: Vec<Complex64> = (0..n * n)
        .map(|idx| {
            let off = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) / (n as f64).sqrt();
            if idx / n == idx % n {
                off + shift
            } else {
                off
            }
        })
        .collect();
    let a = DenseMatrix { n, data };
    let b: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    let rtol = 10f64.powf(log_rtol);
    let cfg = GmresConfig {
        rtol,
        restart,
        max_iterations: 400,
    };
    let (x, report) = gmres(&a, &b, None, &cfg, &NoClock).unwrap();
    let ax = a.apply(&x).unwrap();
    let r: f64 = b.iter().zip(&ax).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
    let bn: f64 = b.iter().map(|p| p.norm_sqr()).sum::<f64>().sqrt();
    let truth = r / bn;
    prop_assert!((report.true_residual - truth).abs() <= 1e-12 + 1e-9 * truth);
    let last = *report.residual_history.last().unwrap();
    prop_assert!((last - truth).abs() <= 10.0 * rtol, "estimate {last} truth {truth}");
    if report.converged {
        prop_assert!(truth <= rtol);
    }
    prop_assert!(report.converged, "not converged: {truth}");
    Ok(())
}

/// Exact `∫_T dA / |x − p|` over a flat triangle `v` containing `p`.
pub fn flat_inverse_distance_integral(v: [[f64; 2]; 3], p: [f64; 2]) -> f64 {
    let mut total = 0.0;
    for e in 0..3 {
        let (a, b) = (v[e], v[(e + 1) % 3]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let u = [d[0] / len, d[1] / len];
        let ra = [a[0] - p[0], a[1] - p[1]];
        let rb = [b[0] - p[0], b[1] - p[1]];
        let h = (ra[0] * u[1] - ra[1] * u[0]).abs();
        if h == 0.0 {
            continue;
        }
        let (s1, s2) = (ra[0] * u[0] + ra[1] * u[1], rb[0] * u[0] + rb[1] * u[1]);
        total += h * ((s2 / h).asinh() - (s1 / h).asinh());
    }
    total
}

pub fn quadrature_cases() -> impl Strategy<Value = (f64, f64, u64)> {
    (0.0..1.0f64, 0.0..1.0f64, any::<u64>())
}

/// Duffy error for `1/R` falls as the rule doubles, on a fixed flat patch;
/// subdivided Gauss error falls for a smooth kernel on a random curved patch.
pub fn check_quadrature_convergence((u, v, seed): (f64, f64, u64)) -> Result<(), TestCaseError> {
    let (zeta, eta) = if u + v > 1.0 { (1.0 - u, 1.0 - v) } else { (u, v) };
    let corners = [[0.0, 0.0], [1.0, 0.0], [0.3, 0.8]];
    let patch = CurvilinearPatch::flat([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.3, 0.8, 0.0], 0);
    let obs = patch.map_to_physical(ReferencePoint::new(zeta, eta));
    let exact = flat_inverse_distance_integral(corners, [obs[0], obs[1]]);
    let mut prev = f64::INFINITY;
    for n in [2, 4, 8, 16] {
        let rule = duffy_rule(ReferencePoint::new(zeta, eta), n).unwrap();
        let mut acc = 0.0;
        for (p, w) in rule {
            let x = patch.map_to_physical(p);
            let r = ((x[0] - obs[0]).powi(2) + (x[1] - obs[1]).powi(2)).sqrt();
            if r > 0.0 {
                acc += w * patch.jacobian(p).unwrap().0 / r;
            }
        }
        let err = (acc - exact).abs() / exact;
        prop_assert!(err < prev || err < 1e-13, "n={n}: {err} after {prev}");
        prev = err;
    }
    prop_assert!(prev < 1e-6, "final Duffy error {prev}");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.5, 0.0, 0.0], [0.5, 0.5, 0.0], [0.0, 0.5, 0.0]];
    for node in nodes.iter_mut().skip(3) {
        node[2] = 0.15 * (rng.gen::<f64>() - 0.5);
    }
    let curved = CurvilinearPatch::new(nodes, 0);
    let dir: Point3 = [rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5];
    let len = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt().max(1e-3);
    let dist = 1.5 + 2.0 * rng.gen::<f64>();
    let far = [0.33 + dist * dir[0] / len, 0.33 + dist * dir[1] / len, dist * dir[2] / len];
    let k = WaveNumber::real(0.5 + 3.0 * rng.gen::<f64>());
    let integrate = |levels: u32| -> Complex64 {
        subdivided_gauss_rule(levels)
            .into_iter()
            .map(|(p, w)| green(far, curved.map_to_physical(p), k).unwrap() * (w * curved.jacobian(p).unwrap().0))
            .sum()
    };
    let reference = integrate(4);
    let mut prev = f64::INFINITY;
    for levels in 0..3 {
        let err = (integrate(levels) - reference).norm() / reference.norm();
        prop_assert!(err < prev || err < 1e-13, "levels={levels}: {err} after {prev}");
        prev = err;
    }
    Ok(())
}
