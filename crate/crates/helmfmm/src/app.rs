//! The commands behind the CLI, callable as library functions.

use std::path::{Path, PathBuf};
use std::time::Instant;

use helmfmm_core::fmm::traversal::dual_tree_traversal;
use helmfmm_core::fmm::tree::{build_tree, Body};
use helmfmm_core::fmm::tuning::{near_optimal, select_grain};
use helmfmm_core::fmm::{CachePlan, FmmConfig, FmmPlan, Precision, TraversalConfig};
use helmfmm_core::geometry::BasisOrder;
use helmfmm_core::kernel::{WaveNumber, SOUND_SPEED};
use helmfmm_core::mesh::{icosphere, SurfaceMesh};
use helmfmm_core::oracle::{max_relative_error, meridian_points, mie_soft_sphere, MieConfig};
use helmfmm_core::partition::balance::rebalance;
use helmfmm_core::partition::distributed::let_demands;
use helmfmm_core::partition::{alltoall_baseline, dragonfly_hops, hsdx_exchange, orb_partition, CommGraph, DragonflyMap};
use helmfmm_core::solver::{
    evaluate_scattered_field, gmres, Backend, Clock, DiscreteSystem, GmresConfig, IncidentWave, SingularityMode, SolveReport,
    SystemConfig,
};
use helmfmm_core::{Complex64, Point3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh_io::{load_mesh, parse_gmsh, write_binary};
use crate::report::*;
use crate::stats::fit_loglog;

/// Wall-clock seconds since construction.
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        Self(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "HELMFMM_THREADS";

/// Thread count from the environment, default 1.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::Usage(format!("{THREADS_ENV}={v} is not a positive integer"))),
        },
        Err(_) => Ok(1),
    }
}

/// Wavenumber from exactly one of a frequency (Hz) or a wavenumber (1/m).
pub fn resolve_wavenumber(frequency: Option<f64>, wavenumber: Option<f64>, default: f64) -> Result<WaveNumber> {
    let k = match (frequency, wavenumber) {
        (Some(_), Some(_)) => return Err(Error::Usage("give a frequency or a wavenumber, not both".into())),
        (Some(f), None) => {
            if !(f > 0.0) || !f.is_finite() {
                return Err(Error::Usage(format!("frequency {f} must be positive")));
            }
            WaveNumber::from_frequency(f, SOUND_SPEED)?
        }
        (None, Some(k)) => WaveNumber::real(k),
        (None, None) => WaveNumber::real(default),
    };
    if !(k.wave_r > 0.0) || !k.wave_r.is_finite() {
        return Err(Error::Usage(format!("wavenumber {} must be positive", k.wave_r)));
    }
    Ok(k)
}

/// Where the geometry comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    File(PathBuf),
    /// Icosphere of the given radius and subdivision count.
    Sphere { radius: f64, subdivisions: usize },
}

impl MeshSource {
    pub fn load(&self) -> Result<SurfaceMesh> {
        match self {
            MeshSource::File(p) => load_mesh(p),
            MeshSource::Sphere { radius, subdivisions } => Ok(icosphere(*radius, *subdivisions)?),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub mesh: MeshSource,
    pub k: WaveNumber,
    pub order: BasisOrder,
    pub mode: SingularityMode,
    pub backend: Backend,
    pub precision: Precision,
    pub fmm_order: Option<usize>,
    pub fmm_tolerance: f64,
    /// `(s, c)`; tuned from `cache_plan` when absent.
    pub grain: Option<(usize, usize)>,
    pub cache_plan: CachePlan,
    pub theta: f64,
    pub gmres: GmresConfig,
    pub observation_radius: f64,
    pub observation_points: usize,
    pub threads: usize,
}

impl SolveOptions {
    pub fn new(mesh: MeshSource, k: WaveNumber) -> Self {
        Self {
            mesh,
            k,
            order: BasisOrder::Quadratic,
            mode: SingularityMode::SelfAndNear,
            backend: Backend::Fmm,
            precision: Precision::Double,
            fmm_order: None,
            fmm_tolerance: 1e-5,
            grain: None,
            cache_plan: CachePlan::skylake(),
            theta: 0.5,
            gmres: GmresConfig::default(),
            observation_radius: 4.0,
            observation_points: 181,
            threads: 1,
        }
    }
}

/// Result of one solve.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub summary: SolveSummary,
    pub report: SolveReport,
    pub density: Vec<Complex64>,
    pub theta: Vec<f64>,
    pub field: Vec<Complex64>,
    pub observations: Vec<Point3>,
}

fn tuned_grain(opts: &SolveOptions) -> Result<(usize, usize)> {
    match opts.grain {
        Some(g) => Ok(g),
        None => {
            let choice = select_grain(&opts.cache_plan, &helmfmm_core::fmm::tuning::default_grid())?;
            Ok((choice.s, choice.c))
        }
    }
}

/// Tune, assemble, solve with GMRES and evaluate the scattered field.
pub fn run_solve(opts: &SolveOptions) -> Result<SolveOutcome> {
    opts.gmres.validate()?;
    let mesh = opts.mesh.load()?;
    let (s, c) = tuned_grain(opts)?;
    let traversal = TraversalConfig {
        grain: s,
        ncrit: c,
        theta: opts.theta,
        deterministic: true,
    };
    traversal.validate()?;
    let cfg = SystemConfig {
        basis: opts.order,
        mode: opts.mode,
        backend: opts.backend,
        fmm: FmmConfig {
            order: opts.fmm_order,
            tolerance: opts.fmm_tolerance,
            traversal,
            precision: opts.precision,
        },
        ..Default::default()
    };
    let clock = WallClock::new();
    let system = DiscreteSystem::new(&mesh, opts.k, cfg)?;
    let assembly_seconds = clock.now();
    let wave = IncidentWave::plus_z(opts.k);
    let rhs = system.assemble_rhs(&wave);
    let solve_clock = WallClock::new();
    let (density, report) = gmres(&system, &rhs, None, &opts.gmres, &solve_clock)?;
    let solve_seconds = solve_clock.now();
    let observations = meridian_points(opts.observation_radius, opts.observation_points);
    let field = evaluate_scattered_field(&system, &density, &observations)?;
    let theta: Vec<f64> = (0..observations.len())
        .map(|i| std::f64::consts::PI * i as f64 / (observations.len().max(2) - 1) as f64)
        .collect();
    let mut summary = SolveSummary {
        mesh: MeshSummary {
            elements: mesh.len(),
            unknowns: system.len(),
        },
        wavenumber: opts.k.wave_r,
        frequency: opts.k.wave_r * SOUND_SPEED / (2.0 * std::f64::consts::PI),
        basis_order: opts.order.degree(),
        singularity: opts.mode.name().to_string(),
        backend: match opts.backend {
            Backend::Fmm => "fmm".into(),
            Backend::Direct => "direct".into(),
        },
        precision: match opts.precision {
            Precision::Double => "double".into(),
            Precision::Single => "single".into(),
        },
        grain: s,
        ncrit: c,
        theta: opts.theta,
        fmm: system.fmm_stats(),
        corrections_nnz: system.corrections().nnz(),
        rtol: opts.gmres.rtol,
        restart: opts.gmres.restart,
        iterations: 0,
        converged: false,
        breakdown: false,
        final_residual: 1.0,
        true_residual: 1.0,
        assembly_seconds,
        solve_seconds,
        oracle_error: None,
        threads: opts.threads,
    };
    summary.absorb(&report);
    Ok(SolveOutcome {
        summary,
        report,
        density,
        theta,
        field,
        observations,
    })
}

/// Write `report.json`, `residuals.csv` and `field.csv` into `dir`.
pub fn write_solve_outputs(dir: &Path, out: &SolveOutcome, reference: Option<&[Complex64]>, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join(format!("{stem}report.json")), &out.summary)?;
    write_residuals(&dir.join(format!("{stem}residuals.csv")), &out.report)?;
    write_field(&dir.join(format!("{stem}field.csv")), &out.theta, &out.field, reference)?;
    Ok(())
}

/// Solve for each basis order and compare the far field with the Mie series
/// for a sphere of `radius` centred at the origin.
pub fn run_verify(base: &SolveOptions, orders: &[BasisOrder], radius: f64, dir: Option<&Path>) -> Result<VerifyReport> {
    if orders.is_empty() {
        return Err(Error::Usage("no basis orders given".into()));
    }
    let mut rows = Vec::new();
    for &order in orders {
        let opts = SolveOptions { order, ..base.clone() };
        let mut out = run_solve(&opts)?;
        let mie = mie_soft_sphere(&MieConfig::new(radius, opts.k), &out.observations)?;
        let err = max_relative_error(&out.field, &mie);
        out.summary.oracle_error = Some(err);
        if let Some(d) = dir {
            write_solve_outputs(d, &out, Some(&mie), &format!("order{}_", order.degree()))?;
        }
        rows.push(VerifyRow {
            order: order.degree(),
            unknowns: out.summary.mesh.unknowns,
            iterations: out.summary.iterations,
            converged: out.summary.converged,
            max_relative_error: err,
        });
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].max_relative_error < w[0].max_relative_error);
    Ok(VerifyReport {
        radius,
        wavenumber: base.k.wave_r,
        observation_radius: base.observation_radius,
        observation_points: base.observation_points,
        rows,
        strictly_decreasing,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvertReport {
    pub elements: usize,
    pub skipped: usize,
    pub bytes: u64,
}

pub fn run_convert(input: &Path, output: &Path) -> Result<ConvertReport> {
    let parsed = parse_gmsh(std::io::BufReader::new(std::fs::File::open(input)?))?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(output)?);
    let bytes = write_binary(&parsed.mesh, &mut w)?;
    Ok(ConvertReport {
        elements: parsed.mesh.len(),
        skipped: parsed.skipped,
        bytes,
    })
}

#[derive(Clone, Debug)]
pub struct ScalingOptions {
    pub sizes: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub k: f64,
    pub theta: f64,
    pub ncrit: usize,
    pub order: usize,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            sizes: vec![10_000, 30_000, 100_000, 300_000, 1_000_000],
            repeats: 5,
            seed: 1,
            k: 1.0,
            theta: 0.5,
            ncrit: 32,
            order: 4,
        }
    }
}

/// Uniform random points in the unit cube.
pub fn uniform_points(n: usize, seed: u64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect()
}

/// Time FMM evaluations on uniform random points and fit `time ∝ N^slope`.
/// Every size is measured `repeats` times; repeated sizes are pooled.
pub fn run_scaling(opts: &ScalingOptions) -> Result<(ScalingReport, Vec<(usize, f64)>)> {
    if opts.sizes.is_empty() || opts.repeats == 0 {
        return Err(Error::Usage("need at least one size and one repetition".into()));
    }
    let cfg = FmmConfig {
        order: Some(opts.order),
        traversal: TraversalConfig {
            ncrit: opts.ncrit,
            grain: 4 * opts.ncrit,
            theta: opts.theta,
            deterministic: true,
        },
        ..Default::default()
    };
    let mut samples = Vec::new();
    for &n in &opts.sizes {
        if n < 2 {
            return Err(Error::Usage(format!("size {n} is too small")));
        }
        let pos = uniform_points(n, opts.seed ^ n as u64);
        let ids: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let q: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
        let plan = FmmPlan::new(&pos, &ids, WaveNumber::real(opts.k), &cfg)?;
        for _ in 0..opts.repeats {
            let t = Instant::now();
            let out = plan.evaluate(&q)?;
            samples.push((n, t.elapsed().as_secs_f64()));
            std::hint::black_box(out);
        }
    }
    let mut rows: Vec<ScalingRow> = Vec::new();
    for &(n, t) in &samples {
        match rows.iter_mut().find(|r| r.n == n) {
            Some(r) => {
                r.seconds += t;
                r.count += 1;
            }
            None => rows.push(ScalingRow { n, seconds: t, count: 1 }),
        }
    }
    for r in rows.iter_mut() {
        r.seconds /= r.count as f64;
    }
    rows.sort_by_key(|r| r.n);
    let points: Vec<(f64, f64)> = samples.iter().map(|&(n, t)| ((n as f64).ln(), t.ln())).collect();
    let fit = fit_loglog(&points);
    Ok((
        ScalingReport {
            rows,
            slope: fit.map(|f| f.slope),
            slope_ci95: fit.and_then(|f| f.ci95),
            seed: opts.seed,
        },
        samples,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Distribution {
    /// Thin spherical shell of radii 0.9 to 1.
    Shell,
    /// Unit cube.
    Cube,
}

impl Distribution {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "shell" => Ok(Self::Shell),
            "cube" => Ok(Self::Cube),
            _ => Err(Error::Usage(format!("unknown distribution `{s}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Shell => "shell",
            Self::Cube => "cube",
        }
    }

    pub fn sample(self, n: usize, seed: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| match self {
                Self::Cube => [rng.gen(), rng.gen(), rng.gen()],
                Self::Shell => {
                    let z: f64 = rng.gen_range(-1.0..1.0);
                    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    let inner: f64 = 0.9f64.powi(3);
                    let r = (inner + (1.0 - inner) * rng.gen::<f64>()).cbrt();
                    let s = (1.0 - z * z).sqrt();
                    [r * s * phi.cos(), r * s * phi.sin(), r * z]
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct PartitionOptions {
    pub ranks: usize,
    pub bodies_per_rank: usize,
    pub distribution: Distribution,
    /// Dragonfly groups the ranks are spread over.
    pub groups: usize,
    pub seed: u64,
    /// Fixed `α`; searched when absent.
    pub alpha: Option<f64>,
    pub balance: bool,
    pub ncrit: usize,
    pub theta: f64,
    pub order: usize,
    pub comm_factor: f64,
}

impl PartitionOptions {
    pub fn new(ranks: usize) -> Self {
        Self {
            ranks,
            bodies_per_rank: 48,
            distribution: Distribution::Shell,
            groups: (ranks / 8).max(2).min(ranks.max(1)),
            seed: 1,
            alpha: None,
            balance: true,
            ncrit: 32,
            theta: 0.5,
            order: 6,
            comm_factor: 0.1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PartitionOutcome {
    pub report: PartitionReport,
    pub hsdx_trace: Vec<helmfmm_core::partition::TraceRecord>,
    pub unweighted: Option<helmfmm_core::partition::balance::BalanceReport>,
}

/// Partition a synthetic body set, derive every rank's LET traffic, and
/// compare HSDX with all-to-all; optionally simulate weighted repartitioning.
pub fn run_partition_sim(opts: &PartitionOptions) -> Result<PartitionOutcome> {
    if opts.ranks == 0 || opts.bodies_per_rank == 0 {
        return Err(Error::Usage("ranks and bodies per rank must be positive".into()));
    }
    let n = opts.ranks * opts.bodies_per_rank;
    let pos = opts.distribution.sample(n, opts.seed);
    let cfg = TraversalConfig {
        ncrit: opts.ncrit,
        grain: 4 * opts.ncrit,
        theta: opts.theta,
        deterministic: true,
    };
    cfg.validate()?;
    let bodies: Vec<Body> = pos.iter().enumerate().map(|(i, p)| Body::new(*p, Complex64::new(1.0, 0.0), i, i)).collect();
    let tree = build_tree(bodies, opts.ncrit, None)?;
    let plan = orb_partition(&pos, &vec![1.0; n], opts.ranks)?;
    let demands = let_demands(&tree, &plan, opts.order, &cfg)?;
    let map = DragonflyMap::spread(opts.ranks, opts.groups)?;
    let labels: Vec<usize> = (0..opts.ranks).map(|r| map.group(r)).collect::<std::result::Result<_, _>>()?;
    let graph = CommGraph::from_groups(&labels)?;
    let hops = |a, b| dragonfly_hops(&map, a, b);
    let hsdx = hsdx_exchange(&graph, &demands, hops)?;
    let all = alltoall_baseline(opts.ranks, &demands, hops)?;
    let cost_ratio = if all.stats.hop_bytes > 0 {
        hsdx.stats.hop_bytes as f64 / all.stats.hop_bytes as f64
    } else {
        1.0
    };
    let (balance, unweighted) = if opts.balance && opts.ranks > 1 {
        let lists = dual_tree_traversal(&tree.cells, 0, &tree.cells, 0, &cfg)?;
        let outcome = match opts.alpha {
            None => rebalance(&pos, &tree, &lists, opts.ranks, opts.comm_factor)?,
            Some(a) => fixed_alpha(&pos, &tree, &lists, opts, a)?,
        };
        let alpha = outcome.best.alpha.unwrap_or(1.0);
        (
            Some(BalanceSummary {
                unweighted_imbalance: outcome.unweighted.imbalance,
                weighted_imbalance: outcome.best.imbalance,
                alpha,
                imbalance_ratio: outcome.best.imbalance / outcome.unweighted.imbalance,
                probes: outcome.probes,
            }),
            Some(outcome.unweighted),
        )
    } else {
        (None, None)
    };
    Ok(PartitionOutcome {
        report: PartitionReport {
            ranks: opts.ranks,
            bodies: n,
            distribution: opts.distribution.name().into(),
            groups_spanned: map.groups_spanned(),
            hsdx: hsdx.stats,
            alltoall: all.stats,
            cost_ratio,
            balance,
            seed: opts.seed,
        },
        hsdx_trace: hsdx.trace,
        unweighted,
    })
}

fn fixed_alpha(
    pos: &[Point3],
    tree: &helmfmm_core::fmm::Octree,
    lists: &helmfmm_core::fmm::InteractionLists,
    opts: &PartitionOptions,
    alpha: f64,
) -> Result<helmfmm_core::partition::balance::BalanceOutcome> {
    use helmfmm_core::partition::balance::{assess, interaction_counts, BalanceOutcome};
    use helmfmm_core::partition::compute_weight;
    let first = orb_partition(pos, &vec![1.0; pos.len()], opts.ranks)?;
    let unweighted = assess(tree, lists, &first, opts.comm_factor, None)?;
    let counts = interaction_counts(tree, lists, &first.assignment)?;
    let w: Vec<f64> = counts.local.iter().zip(&counts.remote).map(|(&l, &r)| compute_weight(l, r, alpha)).collect();
    let plan = orb_partition(pos, &w, opts.ranks)?;
    let best = assess(tree, lists, &plan, opts.comm_factor, Some(alpha))?;
    Ok(BalanceOutcome {
        unweighted,
        probes: vec![best.clone()],
        best,
    })
}

/// Pick `(s, c)` over `grid` for `plan`.
pub fn run_tune(plan: &CachePlan, grid: &[(usize, usize)]) -> Result<TuneReport> {
    let choice = select_grain(plan, grid)?;
    let warning = (!choice.feasible).then(|| "no grid point fits in the last-level cache; closest point returned".to_string());
    Ok(TuneReport {
        s: choice.s,
        c: choice.c,
        fit: choice.fit,
        feasible: choice.feasible,
        warning,
        near_optimal: near_optimal(plan, grid, 0.0)?.into_iter().map(|(s, c)| [s, c]).collect(),
    })
}
