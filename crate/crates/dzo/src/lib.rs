//! Distributed zero-order stochastic optimization over communication graphs.
//!
//! A network of agents minimizes the average of local objectives using only
//! noisy function evaluations. Each agent perturbs its iterate along a random
//! sphere direction, forms a kernel-smoothed two-point gradient estimate, and
//! the network averages proposals through a doubly stochastic Metropolis
//! matrix. The crate provides the building blocks (labeled random streams,
//! smoothing kernels, graph mixing, objective families, noise models) plus an
//! experiment harness: schedules, traces, rate fits, and a config layer used
//! by the `dzo` CLI.
//!
//! Monte-Carlo heavy paths (probes, seed sweeps) run data-parallel under the
//! default `parallel` feature and fall back to sequential execution without
//! it; results are bit-identical either way.

// Validation guards are written as negated comparisons (`!(x > 0.0)`) on
// purpose: NaN must fail every check, which the un-negated form lets through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod estimator;
pub mod exec;
pub mod hard;
pub mod kernel;
pub mod metrics;
pub mod network;
pub mod noise;
pub mod objective;
pub mod optimizer;
pub mod rng;

pub(crate) mod vecmath;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 1")]
    InvalidDimension,
    #[error("smoothness order must be at least 2, got {0}")]
    UnsupportedSmoothness(f64),
    #[error("kernel moment system is singular")]
    KernelConstruction,
    #[error("kernel argument {0} lies outside [-1, 1]")]
    KernelDomain(f64),
    #[error("node count must be at least 1")]
    EmptyGraph,
    #[error("grid topology needs a square node count, got {0}")]
    GridShape(usize),
    #[error("edge probability must lie in (0, 1], got {0}")]
    EdgeProbability(f64),
    #[error("no connected graph found after {0} attempts")]
    Connectivity(usize),
    #[error("graph kind {0} takes no edge probability")]
    UnexpectedParam(&'static str),
    #[error("mixing matrix: {0}")]
    Mixing(String),
    #[error("spectrum bounds need 0 < alpha <= lbar, got alpha={alpha} lbar={lbar}")]
    Spectrum { alpha: f64, lbar: f64 },
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("objective does not expose an optimum")]
    MissingOptimum,
    #[error("probe smoothness must be an integer at least 2")]
    ProbeOrder,
    #[error("sign pattern entries must be +1 or -1, got {0}")]
    SignPattern(i8),
    #[error("scale parameter must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("pre-committed noise sequence exhausted at index {0}")]
    SequenceExhausted(usize),
    #[error("pre-committed noise value {value} exceeds sigma = {sigma}")]
    SequenceScale { value: f64, sigma: f64 },
    #[error("schedules start at t = 1")]
    ScheduleUndefined,
    #[error("schedule parameter out of range: {0}")]
    ScheduleParam(&'static str),
    #[error("kernel estimator requires a constructed kernel")]
    MissingKernel,
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("rate fit needs at least {need} positive points in the window, found {found}")]
    FitWindow { need: usize, found: usize },
    #[error("tail fraction must lie in (0, 1], got {0}")]
    TailFraction(f64),
    #[error("initial point lies outside the constraint set by {0:.3e}")]
    Infeasible(f64),
    #[error("iterates diverged at step {t}")]
    Divergence { t: u64 },
    #[error("duplicate seed {0} in sweep")]
    DuplicateSeed(u64),
    #[error("csv: {0}")]
    Csv(String),
    #[error("config: {0} problem(s) found")]
    Config(usize),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Caps the global rayon pool from the `DZO_THREADS` environment variable.
///
/// Call once at process start, before any parallel work. Ignored when the
/// variable is unset, unparsable, or the pool is already built; a no-op in
/// sequential builds.
pub fn init_threads_from_env() {
    #[cfg(feature = "parallel")]
    {
        if let Ok(v) = std::env::var("DZO_THREADS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n >= 1 {
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    }
}
