//! Decay sweeps, uniformity runs, atom tests and the radial counterexample.

mod atoms;
mod counterexample;
mod fit;
mod radial;
mod report;
mod sweep;
mod uniformity;

pub use atoms::{
    atom_image_l1, make_atom, oscillatory_moment, AtomSeriesConfig, AtomSeriesReport, AtomSpec,
    BaseProfile, SampledAtom,
};
pub use counterexample::{counterexample_growth, CounterexampleConfig, CounterexampleResult};
pub use fit::{fit_slope, LinearFit};
pub use radial::{radial_reduce, RadialPhase, RadialTerm};
pub use report::{config_hash, sweep_csv, sweep_json, sweep_svg, CsvHeader};
pub use sweep::{
    decay_sweep, decay_sweep_with, predicted_decay, sweep_probe, summarize, DampingConfig, DampingFactorSpec, DecayFitResult,
    LambdaRange, PhaseSpec, SweepConfig, SweepPoint, Verdict,
};
pub use uniformity::{uniformity_sweep, UniformityConfig, UniformityReport};

use thiserror::Error;

use crate::numerics::NumericsError;
use crate::predict::PredictError;
use crate::wpoly::WPolyError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("fit needs at least 3 points with distinct abscissae")]
    DegenerateAbscissae,
    #[error("no decay prediction for this phase: {0}")]
    NoPrediction(String),
    #[error("interval {interval:?} is not inside [{lo}, {hi}]")]
    IntervalOutOfRange { interval: [f64; 2], lo: f64, hi: f64 },
    #[error("(j, k) outside the comparable regime: {0}")]
    RegimeViolation(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("sphere factor vanishes for term {0}")]
    NonIntegrableSphereFactor(usize),
    #[error("grid at lambda = {0} hit the sample cap")]
    UnderResolvedGrid(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    WPoly(#[from] WPolyError),
    #[error(transparent)]
    Predict(#[from] PredictError),
}
