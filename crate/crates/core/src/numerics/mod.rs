//! Discretized oscillatory operators and their operator norms.

mod cutoff;
mod diagnostics;
mod grid;
mod kernel;
mod norms;
mod partition;
mod phase;
mod rng;

pub use cutoff::{build_cutoff, BoxRegion, Cutoff, CutoffSpec};
pub use diagnostics::{vdc_diagnostics, VdcDiagnostics};
pub use grid::{auto_grid, grid_from_probe, probe_derivatives, GridCaps, GridSpec};
pub use kernel::{
    build_kernel, build_kernel_with, Damping, DampingFactor, KernelMatrix, Storage, DENSE_ENTRY_LIMIT,
};
pub use norms::{
    opnorm_l2, opnorm_l2_vector, opnorm_l2_with, opnorm_lp_lower, opnorm_lp_lower_from, opnorm_lp_upper, opnorm_lp_upper_with,
    schur_bound, L2Options, LpUpperOptions, NormBracket,
};
pub use partition::{dyadic_partition, smooth_step, DyadicPartition};
pub use phase::{FracPhase, Phase};
pub use rng::task_rng;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("unsupported cutoff kind {0:?}")]
    UnsupportedKind(String),
    #[error("invalid cutoff: {0}")]
    InvalidCutoff(String),
    #[error("damping factor vanishes at ({x}, {y}) with Re z = {re_z} < 0 and no floor")]
    DampingSingular { x: f64, y: f64, re_z: f64 },
    #[error("iteration did not converge after {iterations} steps (bracket [{lower}, {upper}])")]
    NoConvergence { iterations: usize, lower: f64, upper: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}
