//! Discretised boundary-integral system, restarted GMRES and field evaluation.

pub mod field;
pub mod gmres;
pub mod system;

pub use field::{evaluate_scattered_field, single_layer};
pub use gmres::{gmres, Clock, DenseMatrix, GmresConfig, LinearOperator, NoClock, SolveReport};
pub use system::{
    relative_error, Backend, DiscreteSystem, IncidentWave, QuadraturePoint, SingularityMode, SparseMatrix, SystemConfig,
};

use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::Result;

/// Assemble `V^inc` and solve `Z q = V^inc`.
pub fn solve(
    system: &DiscreteSystem,
    wave: &IncidentWave,
    cfg: &GmresConfig,
    clock: &dyn Clock,
) -> Result<(Vec<Complex64>, SolveReport)> {
    let rhs = system.assemble_rhs(wave);
    gmres(system, &rhs, None, cfg, clock)
}
