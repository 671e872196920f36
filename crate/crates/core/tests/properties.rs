use helmfmm_core::fmm::{FmmConfig, FmmPlan, TraversalConfig};
use helmfmm_core::geometry::{BasisOrder, CurvilinearPatch, LagrangeBasis, ReferencePoint};
use helmfmm_core::kernel::{classify, green, p2p, KernelConfig, Regime, SourceSample, WaveNumber};
use helmfmm_core::partition::exchange::required_deliveries;
use helmfmm_core::partition::{
    alltoall_baseline, dragonfly_hops, hsdx_exchange, orb_partition, CommGraph, Demand, DistributedFmm, DragonflyMap, Item,
};
use helmfmm_core::{Complex64, Point3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference_point() -> impl Strategy<Value = ReferencePoint> {
    (0.0..1.0f64, 0.0..1.0f64).prop_map(|(u, v)| if u + v > 1.0 { ReferencePoint::new(1.0 - u, 1.0 - v) } else { ReferencePoint::new(u, v) })
}

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3> {
    (0..n).map(|_| [rng.gen(), rng.gen::<f64>() * 0.7, rng.gen::<f64>().powi(2)]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn lagrange_bases_interpolate(p in reference_point(), degree in 1u32..4) {
        let basis = LagrangeBasis::new(BasisOrder::from_degree(degree).unwrap());
        let nodes = basis.order().nodes();
        for (i, (node, _)) in nodes.iter().enumerate() {
            for j in 0..basis.len() {
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((basis.eval(j, *node) - expected).abs() < 1e-10);
            }
        }
        let sum: f64 = (0..basis.len()).map(|j| basis.eval(j, p)).sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences(p in reference_point(), bumps in prop::array::uniform3(-0.2..0.2f64)) {
        let mut nodes = [[0.0, 0.0, 0.0], [1.0, 0.1, 0.0], [0.1, 1.0, 0.2], [0.5, 0.0, 0.0], [0.55, 0.55, 0.1], [0.0, 0.5, 0.1]];
        for (n, b) in nodes.iter_mut().skip(3).zip(bumps) {
            n[2] += b;
        }
        let patch = CurvilinearPatch::new(nodes, 0);
        let h = 1e-6;
        let x0 = patch.map_to_physical(p);
        let dz = patch.map_to_physical(ReferencePoint::new(p.zeta + h, p.eta));
        let de = patch.map_to_physical(ReferencePoint::new(p.zeta, p.eta + h));
        let a: Vec<f64> = (0..3).map(|d| (dz[d] - x0[d]) / h).collect();
        let b: Vec<f64> = (0..3).map(|d| (de[d] - x0[d]) / h).collect();
        let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        let fd = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        let (j, _) = patch.jacobian(p).unwrap();
        prop_assert!((j - fd).abs() <= 1e-5 * j, "{j} vs {fd}");
    }

    #[test]
    fn far_p2p_matches_double_loop(seed in any::<u64>(), nt in 1usize..40, ns in 1usize..40, near in 0.0..0.3f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sample = |patch: usize| SourceSample {
            position: [rng.gen(), rng.gen(), rng.gen()],
            strength: Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5),
            density: Complex64::new(0.0, 0.0),
            patch_id: patch,
            interp_index: 0,
        };
        let targets: Vec<SourceSample> = (0..nt).map(|i| sample(i % 7)).collect();
        let sources: Vec<SourceSample> = (0..ns).map(|i| sample(i % 5)).collect();
        let k = WaveNumber::real(3.0);
        let cfg = KernelConfig { near_patch_distance: near, ..Default::default() };
        let got = p2p(&targets, &sources, k, &cfg, None).unwrap();
        for (t, g) in targets.iter().zip(&got) {
            let mut want = Complex64::new(0.0, 0.0);
            let mut scale = 0.0;
            for s in &sources {
                let regimes = [Regime::SamePatch, Regime::Near, Regime::Far];
                let hits = regimes.iter().filter(|r| classify(t, s, &cfg) == **r).count();
                prop_assert_eq!(hits, 1);
                if t.patch_id != s.patch_id {
                    let term = s.strength * green(t.position, s.position, k).unwrap();
                    want += term;
                    scale += term.norm();
                }
            }
            prop_assert!((g - want).norm() <= 1e-13 * scale.max(1e-300));
        }
    }

    #[test]
    fn orb_assignment_is_consistent(seed in any::<u64>(), n in 1usize..400, ranks in 1usize..40) {
        prop_assume!(ranks <= n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos = cloud(&mut rng, n);
        let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.01).collect();
        let plan = orb_partition(&pos, &w, ranks).unwrap();
        let vol: f64 = plan.boxes.iter().map(|b| b.volume()).sum();
        prop_assert!((vol - plan.domain.volume()).abs() <= 1e-9 * plan.domain.volume().max(1e-300));
        let mut count = vec![0usize; ranks];
        for (i, &r) in plan.assignment.iter().enumerate() {
            prop_assert!(plan.boxes[r].contains(pos[i]));
            count[r] += 1;
        }
        prop_assert!(count.iter().all(|&c| c >= 1));
        let total: f64 = plan.weights.iter().sum();
        prop_assert!((total - w.iter().sum::<f64>()).abs() < 1e-9 * total);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hsdx_delivers_exactly_what_is_required(seed in any::<u64>(), ranks in 1usize..1025, groups in 1usize..40, density in 0.001..0.05f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..ranks).map(|_| rng.gen_range(0..groups)).collect();
        let graph = CommGraph::from_groups(&labels).unwrap();
        for r in 0..ranks.min(50) {
            for o in graph.neighbours(r) {
                prop_assert!(graph.is_neighbour(o, r));
            }
        }
        let mut demands = Vec::new();
        for s in 0..ranks {
            for d in 0..ranks {
                if s != d && rng.gen::<f64>() < density {
                    let items = (0..rng.gen_range(1..5)).map(|_| Item { id: rng.gen_range(0..20), bytes: rng.gen_range(1..500) }).collect();
                    demands.push(Demand { src: s, dst: d, items });
                }
            }
        }
        let map = DragonflyMap::spread(ranks, groups).unwrap();
        let hops = |a, b| dragonfly_hops(&map, a, b);
        let ex = hsdx_exchange(&graph, &demands, hops).unwrap();
        prop_assert_eq!(&ex.delivered, &required_deliveries(ranks, &demands));
        for t in &ex.trace {
            prop_assert!(t.src != t.dst);
            prop_assert!(t.stage == 2 || graph.is_neighbour(t.src, t.dst));
        }
        let total: u64 = ex.trace.iter().map(|t| t.bytes).sum();
        prop_assert_eq!(total, ex.stats.bytes);
        if ranks <= 200 {
            let base = alltoall_baseline(ranks, &demands, hops).unwrap();
            prop_assert_eq!(base.stats.messages as usize, ranks * (ranks - 1));
            prop_assert_eq!(&base.delivered, &ex.delivered);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn distributed_sum_matches_single_domain(seed in any::<u64>(), n in 200usize..1200, ranks in 2usize..20, weighted in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos = cloud(&mut rng, n);
        let ids: Vec<usize> = (0..n).collect();
        let q: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen())).collect();
        let w: Vec<f64> = (0..n).map(|i| if weighted { 1.0 + (i % 5) as f64 } else { 1.0 }).collect();
        let plan = orb_partition(&pos, &w, ranks).unwrap();
        let cfg = FmmConfig {
            order: Some(5),
            traversal: TraversalConfig { ncrit: 12, grain: 48, ..Default::default() },
            ..Default::default()
        };
        let k = WaveNumber::real(2.5);
        let single = FmmPlan::new(&pos, &ids, k, &cfg).unwrap().evaluate(&q).unwrap();
        let dist = DistributedFmm::new(&pos, &ids, k, &cfg, &plan).unwrap().evaluate(&q).unwrap();
        let scale = single.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = single.iter().zip(&dist).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-10 * scale, "{}", err / scale);
    }
}

#[test]
fn dragonfly_hops_take_table_values() {
    let map = DragonflyMap::new(8000, 1, 1).unwrap();
    for (a, b) in [(0, 3), (0, 100), (0, 383), (0, 384), (0, 2303), (0, 2304), (10, 7000)] {
        let h = dragonfly_hops(&map, a, b).unwrap();
        assert!((1..=3).contains(&h));
    }
    assert_eq!(dragonfly_hops(&map, 5, 5).unwrap(), 0);
}
