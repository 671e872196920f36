//! Argument parsing and exit codes of the `helmfmm` binary.
//!
//! Exit codes: 0 on success or convergence, 1 on runtime failure, 2 when
//! GMRES stops without converging, 64 on usage errors.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use helmfmm_core::fmm::tuning::default_grid;
use helmfmm_core::fmm::{CachePlan, Precision};
use helmfmm_core::geometry::BasisOrder;
use helmfmm_core::solver::{Backend, GmresConfig, SingularityMode};

use crate::app::{self, Distribution, MeshSource, PartitionOptions, ScalingOptions, SolveOptions};
use crate::error::{Error, Result};
use crate::report::{write_balance, write_json, write_scaling, write_trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "helmfmm", version, about = "FMM-accelerated Helmholtz boundary-integral solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert an ASCII Gmsh mesh of 6-node triangles to the binary format.
    Convert {
        input: PathBuf,
        output: PathBuf,
    },
    /// Solve the sound-soft scattering problem and evaluate the far field.
    Solve(SolveArgs),
    /// Compare far fields against the series solution for a sphere.
    Verify {
        #[command(flatten)]
        solve: SolveArgs,
        /// Comma-separated basis orders.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        orders: Vec<u32>,
    },
    /// Time FMM evaluations on uniform random points and fit the log-log slope.
    Scaling {
        #[arg(long, value_delimiter = ',', default_value = "10000,30000,100000,300000,1000000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        fmm_order: usize,
        #[arg(long, default_value_t = 32)]
        ncrit: usize,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long, default_value_t = 1.0)]
        wavenumber: f64,
        #[arg(long, default_value = "scaling-out")]
        out: PathBuf,
    },
    /// Simulate the distributed exchange and partition balancing.
    PartitionSim {
        #[arg(long, default_value_t = 64)]
        ranks: usize,
        #[arg(long, default_value_t = 48)]
        bodies_per_rank: usize,
        #[arg(long, value_enum, default_value_t = DistributionArg::Shell)]
        distribution: DistributionArg,
        /// Dragonfly groups the ranks are spread over; defaults to ranks / 8.
        #[arg(long)]
        groups: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// `auto` searches the weight, `none` skips rebalancing, or a number.
        #[arg(long, default_value = "auto")]
        alpha: String,
        #[arg(long, default_value_t = 6)]
        fmm_order: usize,
        #[arg(long, default_value_t = 32)]
        ncrit: usize,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long, default_value_t = 0.1)]
        comm_factor: f64,
        #[arg(long, default_value = "partition-out")]
        out: PathBuf,
    },
    /// Choose the task grain and leaf size from a cache plan.
    Tune {
        #[arg(long, value_enum, default_value_t = PresetArg::Skylake)]
        preset: PresetArg,
        #[arg(long)]
        llc_bytes: Option<u64>,
        #[arg(long)]
        threads_per_core: Option<u64>,
        /// Candidate grains; defaults to powers of two from 16 to 1024.
        #[arg(long, value_delimiter = ',')]
        grains: Vec<usize>,
        /// Candidate leaf sizes; defaults to the same powers of two.
        #[arg(long, value_delimiter = ',')]
        ncrits: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DistributionArg {
    Shell,
    Cube,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PresetArg {
    Skylake,
    Knl,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SingularityArg {
    None,
    #[value(name = "self")]
    SelfOnly,
    #[value(name = "self+near")]
    SelfAndNear,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BackendArg {
    Fmm,
    Direct,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PrecisionArg {
    Double,
    Single,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Mesh file, ASCII Gmsh or binary.
    #[arg(long, conflicts_with = "sphere")]
    pub mesh: Option<PathBuf>,
    /// Use a built-in icosphere with this many edge subdivisions.
    #[arg(long)]
    pub sphere: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Frequency in Hz, converted with a sound speed of 343 m/s.
    #[arg(long)]
    pub frequency: Option<f64>,
    /// Wavenumber in 1/m; 2 when neither this nor a frequency is given.
    #[arg(long)]
    pub wavenumber: Option<f64>,
    #[arg(long, default_value_t = 2)]
    pub order: u32,
    #[arg(long, value_enum, default_value_t = SingularityArg::SelfAndNear)]
    pub singularity: SingularityArg,
    #[arg(long, value_enum, default_value_t = BackendArg::Fmm)]
    pub backend: BackendArg,
    /// Expansion order; calibrated for 1e-5 when absent.
    #[arg(long)]
    pub fmm_order: Option<usize>,
    /// Task grain `s`; tuned together with `--ncrit` when both are absent.
    #[arg(long, requires = "ncrit")]
    pub grain: Option<usize>,
    #[arg(long, requires = "grain")]
    pub ncrit: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub rtol: f64,
    #[arg(long, default_value_t = 50)]
    pub restart: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iterations: usize,
    #[arg(long, value_enum, default_value_t = PrecisionArg::Double)]
    pub precision: PrecisionArg,
    #[arg(long, default_value_t = 4.0)]
    pub observation_radius: f64,
    #[arg(long, default_value_t = 181)]
    pub observation_count: usize,
    #[arg(long, default_value = "solve-out")]
    pub out: PathBuf,
}

impl SolveArgs {
    pub fn to_options(&self) -> Result<SolveOptions> {
        let mesh = match (&self.mesh, self.sphere) {
            (Some(p), None) => MeshSource::File(p.clone()),
            (None, Some(n)) => MeshSource::Sphere {
                radius: self.radius,
                subdivisions: n,
            },
            (None, None) => return Err(Error::Usage("give --mesh or --sphere".into())),
            (Some(_), Some(_)) => return Err(Error::Usage("--mesh and --sphere are exclusive".into())),
        };
        if self.observation_count == 0 {
            return Err(Error::Usage("--observation-count must be positive".into()));
        }
        let k = app::resolve_wavenumber(self.frequency, self.wavenumber, 2.0)?;
        let mut opts = SolveOptions::new(mesh, k);
        opts.order = BasisOrder::from_degree(self.order).map_err(|e| Error::Usage(e.to_string()))?;
        opts.mode = match self.singularity {
            SingularityArg::None => SingularityMode::None,
            SingularityArg::SelfOnly => SingularityMode::SelfOnly,
            SingularityArg::SelfAndNear => SingularityMode::SelfAndNear,
        };
        opts.backend = match self.backend {
            BackendArg::Fmm => Backend::Fmm,
            BackendArg::Direct => Backend::Direct,
        };
        opts.precision = match self.precision {
            PrecisionArg::Double => Precision::Double,
            PrecisionArg::Single => Precision::Single,
        };
        opts.fmm_order = self.fmm_order;
        opts.grain = self.grain.zip(self.ncrit);
        opts.theta = self.theta;
        opts.gmres = GmresConfig {
            rtol: self.rtol,
            restart: self.restart,
            max_iterations: self.max_iterations,
        };
        opts.gmres.validate().map_err(|e| Error::Usage(e.to_string()))?;
        opts.observation_radius = self.observation_radius;
        opts.observation_points = self.observation_count;
        opts.threads = app::threads_from_env()?;
        Ok(opts)
    }
}

fn cache_plan(preset: PresetArg, llc: Option<u64>, tpc: Option<u64>) -> CachePlan {
    let mut plan = match preset {
        PresetArg::Skylake => CachePlan::skylake(),
        PresetArg::Knl => CachePlan::knl(),
    };
    if let Some(b) = llc {
        plan.llc_bytes = b;
    }
    if let Some(t) = tpc {
        plan.threads_per_core = t;
    }
    plan
}

fn tune_grid(grains: &[usize], ncrits: &[usize]) -> Result<Vec<(usize, usize)>> {
    if grains.is_empty() && ncrits.is_empty() {
        return Ok(default_grid());
    }
    let powers: Vec<usize> = (4..=10).map(|e| 1usize << e).collect();
    let gs = if grains.is_empty() { &powers[..] } else { grains };
    let cs = if ncrits.is_empty() { &powers[..] } else { ncrits };
    let grid: Vec<(usize, usize)> = gs.iter().flat_map(|&s| cs.iter().map(move |&c| (s, c))).filter(|&(s, c)| c >= 1 && s >= c).collect();
    if grid.is_empty() {
        return Err(Error::Usage("no grid point satisfies grain >= ncrit >= 1".into()));
    }
    Ok(grid)
}

fn parse_alpha(s: &str) -> Result<(bool, Option<f64>)> {
    match s {
        "auto" => Ok((true, None)),
        "none" => Ok((false, None)),
        v => match v.parse::<f64>() {
            Ok(a) if a.is_finite() && a >= 0.0 => Ok((true, Some(a))),
            _ => Err(Error::Usage(format!("--alpha `{v}` is not auto, none or a non-negative number"))),
        },
    }
}

/// Run one parsed command, returning the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Convert { input, output } => {
            let r = app::run_convert(&input, &output)?;
            println!("{} elements, {} bytes, {} skipped", r.elements, r.bytes, r.skipped);
            Ok(EXIT_OK)
        }
        Command::Solve(args) => {
            let opts = args.to_options()?;
            let out = app::run_solve(&opts)?;
            app::write_solve_outputs(&args.out, &out, None, "")?;
            println!(
                "{} unknowns, {} iterations, residual {:.3e}, converged {}",
                out.summary.mesh.unknowns, out.summary.iterations, out.summary.true_residual, out.summary.converged
            );
            Ok(if out.summary.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Command::Verify { solve, orders } => {
            let opts = solve.to_options()?;
            let radius = match opts.mesh {
                MeshSource::Sphere { radius, .. } => radius,
                MeshSource::File(_) => solve.radius,
            };
            let orders = orders
                .iter()
                .map(|&o| BasisOrder::from_degree(o).map_err(|e| Error::Usage(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            let report = app::run_verify(&opts, &orders, radius, Some(&solve.out))?;
            write_json(&solve.out.join("verify.json"), &report)?;
            for r in &report.rows {
                println!("order {}: {} unknowns, error {:.3e}", r.order, r.unknowns, r.max_relative_error);
            }
            Ok(if report.rows.iter().all(|r| r.converged) { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Command::Scaling {
            sizes,
            repeats,
            seed,
            fmm_order,
            ncrit,
            theta,
            wavenumber,
            out,
        } => {
            let opts = ScalingOptions {
                sizes,
                repeats,
                seed,
                k: wavenumber,
                theta,
                ncrit,
                order: fmm_order,
            };
            let (report, _) = app::run_scaling(&opts)?;
            std::fs::create_dir_all(&out)?;
            write_scaling(&out.join("scaling.csv"), &report.rows)?;
            write_json(&out.join("scaling.json"), &report)?;
            if let Some(s) = report.slope {
                println!("slope {s:.3}");
            }
            Ok(EXIT_OK)
        }
        Command::PartitionSim {
            ranks,
            bodies_per_rank,
            distribution,
            groups,
            seed,
            alpha,
            fmm_order,
            ncrit,
            theta,
            comm_factor,
            out,
        } => {
            let (balance, alpha) = parse_alpha(&alpha)?;
            let mut opts = PartitionOptions::new(ranks);
            opts.bodies_per_rank = bodies_per_rank;
            opts.distribution = match distribution {
                DistributionArg::Shell => Distribution::Shell,
                DistributionArg::Cube => Distribution::Cube,
            };
            if let Some(g) = groups {
                opts.groups = g;
            }
            opts.seed = seed;
            opts.balance = balance;
            opts.alpha = alpha;
            opts.order = fmm_order;
            opts.ncrit = ncrit;
            opts.theta = theta;
            opts.comm_factor = comm_factor;
            let res = app::run_partition_sim(&opts)?;
            std::fs::create_dir_all(&out)?;
            write_json(&out.join("partition.json"), &res.report)?;
            write_trace(&out.join("trace.csv"), &res.hsdx_trace)?;
            if let (Some(u), Some(b)) = (&res.unweighted, &res.report.balance) {
                write_balance(&out.join("balance.csv"), u, &b.probes)?;
            }
            println!("hop-byte ratio {:.3}", res.report.cost_ratio);
            Ok(EXIT_OK)
        }
        Command::Tune {
            preset,
            llc_bytes,
            threads_per_core,
            grains,
            ncrits,
            out,
        } => {
            let plan = cache_plan(preset, llc_bytes, threads_per_core);
            let grid = tune_grid(&grains, &ncrits)?;
            let report = app::run_tune(&plan, &grid)?;
            match out {
                Some(p) => write_json(&p, &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
            if let Some(w) = &report.warning {
                eprintln!("warning: {w}");
            }
            Ok(EXIT_OK)
        }
    }
}

fn is_usage(e: &Error) -> bool {
    matches!(
        e,
        Error::Usage(_) | Error::Core(helmfmm_core::Error::Config(_)) | Error::Core(helmfmm_core::Error::Domain(_))
    )
}

/// Parse `args`, run, print diagnostics to stderr and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if is_usage(&e) {
                EXIT_USAGE
            } else {
                EXIT_FAILURE
            }
        }
    }
}
