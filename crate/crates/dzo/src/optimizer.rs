//! The synchronous distributed loop: per-agent two-point estimation, a
//! consensus-weighted gradient step through the mixing matrix, projection
//! onto the feasible set, and trace recording.
//!
//! Time starts at t = 1 so the bandwidth h_t = t^{-1/(2 beta)} is defined at
//! every step. Within a step all agents read the same snapshot; agent-level
//! work may run in parallel because randomness is fixed by stream labels and
//! each consensus reduction runs in index order, so traces are bit-identical
//! regardless of thread count.

use crate::estimator::{zo_gradient_kernel, zo_gradient_plain, GradientEstimate};
use crate::exec;
use crate::kernel::Kernel;
use crate::metrics::{
    consensus_error, mean_iterate, record_steps, RecordSpec, RunningAverage, Trace, TraceRow,
};
use crate::network::{GraphTopology, MixingMatrix};
use crate::noise::NoiseModel;
use crate::objective::{Objective, ProjectionSet};
use crate::rng::{Purpose, StreamFactory};
use crate::vecmath;
use crate::{Error, Result};

/// Step-size and bandwidth sequences. All variants are positive and
/// nonincreasing in t.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// eta_t = 2/(alpha t), h_t = t^{-1/(2 beta)}: the base choice for
    /// strongly convex and gradient-dominant objectives.
    StronglyConvexPl { alpha: f64, beta: f64 },
    /// eta_t = 1/(alpha t), h_t = sqrt(d) t^{-1/4}: pairs with the plain
    /// beta = 2 estimator.
    ImprovedBeta2 { alpha: f64, d: usize },
    /// Explicit power laws eta_t = eta0 t^{-eta_exponent},
    /// h_t = h0 t^{-h_exponent}.
    Custom { eta0: f64, eta_exponent: f64, h0: f64, h_exponent: f64 },
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Schedule::StronglyConvexPl { alpha, beta } => {
                if !(alpha > 0.0) || !alpha.is_finite() {
                    return Err(Error::NonPositiveScale(alpha));
                }
                if !(beta >= 2.0) || !beta.is_finite() {
                    return Err(Error::UnsupportedSmoothness(beta));
                }
            }
            Schedule::ImprovedBeta2 { alpha, d } => {
                if !(alpha > 0.0) || !alpha.is_finite() {
                    return Err(Error::NonPositiveScale(alpha));
                }
                if d == 0 {
                    return Err(Error::InvalidDimension);
                }
            }
            Schedule::Custom { eta0, eta_exponent, h0, h_exponent } => {
                if !(eta0 > 0.0) || !eta0.is_finite() {
                    return Err(Error::NonPositiveScale(eta0));
                }
                if !(h0 > 0.0) || !h0.is_finite() {
                    return Err(Error::NonPositiveScale(h0));
                }
                if !(eta_exponent >= 0.0) || !eta_exponent.is_finite() {
                    return Err(Error::ScheduleParam("eta exponent must be nonnegative"));
                }
                if !(h_exponent >= 0.0) || !h_exponent.is_finite() {
                    return Err(Error::ScheduleParam("h exponent must be nonnegative"));
                }
            }
        }
        Ok(())
    }

    /// (eta_t, h_t) at step t >= 1.
    pub fn values(&self, t: u64) -> Result<(f64, f64)> {
        if t == 0 {
            return Err(Error::ScheduleUndefined);
        }
        let tf = t as f64;
        Ok(match *self {
            Schedule::StronglyConvexPl { alpha, beta } => {
                (2.0 / (alpha * tf), tf.powf(-1.0 / (2.0 * beta)))
            }
            Schedule::ImprovedBeta2 { alpha, d } => {
                (1.0 / (alpha * tf), (d as f64).sqrt() * tf.powf(-0.25))
            }
            Schedule::Custom { eta0, eta_exponent, h0, h_exponent } => {
                (eta0 * tf.powf(-eta_exponent), h0 * tf.powf(-h_exponent))
            }
        })
    }
}

/// Which two-point estimator the agents use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorVariant {
    /// Kernel-smoothed: queries x +- h r zeta with a radial draw.
    Kernel,
    /// Plain beta = 2 variant: queries x +- h zeta, no kernel.
    PlainBeta2,
}

/// How agents are initialized.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    /// All agents start at the same feasible point; `None` uses a
    /// deterministic boundary point of the feasible set.
    SharedPoint(Option<Vec<f64>>),
    /// Each agent starts at an independent uniform draw from the set.
    Uniform,
}

/// Fully constructed description of one experiment.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub horizon: u64,
    pub objective: Objective,
    pub topology: GraphTopology,
    pub mixing: MixingMatrix,
    /// Required for the kernel estimator variant, ignored by the plain one.
    pub kernel: Option<Kernel>,
    pub estimator: EstimatorVariant,
    pub noise: NoiseModel,
    pub schedule: Schedule,
    pub init: InitSpec,
    pub record: RecordSpec,
    /// Hash of the declarative config, copied into the trace for auditing.
    pub config_hash: String,
}

/// One synchronous consensus update: z_j = x_j - eta g_j, then
/// x_i <- Proj(sum_j W_ij z_j). All agents read the same pre-step snapshot.
pub fn consensus_step(
    states: &[Vec<f64>],
    grads: &[Vec<f64>],
    w: &MixingMatrix,
    eta: f64,
    theta: &ProjectionSet,
) -> Result<Vec<Vec<f64>>> {
    let n = w.n();
    if states.len() != n {
        return Err(Error::Shape { expected: n, got: states.len() });
    }
    if grads.len() != n {
        return Err(Error::Shape { expected: n, got: grads.len() });
    }
    let d = theta.dim();
    for v in states.iter().chain(grads) {
        if v.len() != d {
            return Err(Error::Shape { expected: d, got: v.len() });
        }
    }
    let z: Vec<Vec<f64>> = states
        .iter()
        .zip(grads)
        .map(|(x, g)| x.iter().zip(g).map(|(xi, gi)| xi - eta * gi).collect())
        .collect();
    exec::indexed_map(n, |i| {
        let row = w.row(i);
        let mut acc = vec![0.0; d];
        for (j, zj) in z.iter().enumerate() {
            let wij = row[j];
            if wij != 0.0 {
                for (a, v) in acc.iter_mut().zip(zj) {
                    *a += wij * v;
                }
            }
        }
        theta.project(&acc)
    })
    .into_iter()
    .collect()
}

fn init_states(
    cfg: &RunConfig,
    n: usize,
    d: usize,
    streams: &StreamFactory,
) -> Result<Vec<Vec<f64>>> {
    let theta = cfg.objective.theta();
    match &cfg.init {
        InitSpec::SharedPoint(point) => {
            let x0 = match point {
                Some(p) => {
                    if p.len() != d {
                        return Err(Error::Shape { expected: d, got: p.len() });
                    }
                    let proj = theta.project(p)?;
                    let gap = vecmath::dist_sq(p, &proj).sqrt();
                    if gap > 1e-9 {
                        return Err(Error::Infeasible(gap));
                    }
                    proj
                }
                None => theta.boundary_point(),
            };
            Ok(vec![x0; n])
        }
        InitSpec::Uniform => {
            (0..n).map(|i| theta.sample(&mut streams.stream(Purpose::Init, i as u32, 0))).collect()
        }
    }
}

/// Executes the configured run for t = 1..=horizon and returns its trace.
///
/// Per step: every agent forms a gradient estimate at the current snapshot,
/// the row metrics of the snapshot are recorded (optimization error of the
/// mean iterate and of its running average, cumulative regret, consensus
/// disagreement, mean estimate norm), then the consensus step produces the
/// next snapshot. Deterministic given the config, including its seed.
pub fn run(cfg: &RunConfig) -> Result<Trace> {
    let obj = &cfg.objective;
    let d = obj.dim();
    let n = cfg.mixing.n();
    if cfg.topology.n() != n {
        return Err(Error::Shape { expected: n, got: cfg.topology.n() });
    }
    if cfg.horizon == 0 {
        return Err(Error::EmptyHorizon);
    }
    cfg.schedule.validate()?;
    let kernel: Option<&Kernel> = match cfg.estimator {
        EstimatorVariant::Kernel => Some(cfg.kernel.as_ref().ok_or(Error::MissingKernel)?),
        EstimatorVariant::PlainBeta2 => None,
    };
    let fstar = obj.fstar()?;
    let theta = obj.theta();
    let guard = 1e6 * theta.diameter();
    let streams = StreamFactory::new(cfg.seed);
    let mut states = init_states(cfg, n, d, &streams)?;
    let record = record_steps(cfg.record, cfg.horizon)?;
    let mut next_record = 0usize;
    let mut avg = RunningAverage::new(d);
    let mut cum_regret = 0.0;
    let mut rows = Vec::with_capacity(record.len());

    for t in 1..=cfg.horizon {
        let (eta, h) = cfg.schedule.values(t)?;
        let estimates: Vec<GradientEstimate> = exec::indexed_map(n, |i| match cfg.estimator {
            EstimatorVariant::Kernel => zo_gradient_kernel(
                obj,
                &states[i],
                h,
                kernel.expect("checked above"),
                &cfg.noise,
                &streams,
                i as u32,
                t,
            ),
            EstimatorVariant::PlainBeta2 => {
                zo_gradient_plain(obj, &states[i], h, &cfg.noise, &streams, i as u32, t)
            }
        })
        .into_iter()
        .collect::<Result<_>>()?;

        let xbar = mean_iterate(&states);
        if !vecmath::is_finite(&xbar) || vecmath::norm(&xbar) > guard {
            return Err(Error::Divergence { t });
        }
        let f_mean_err = obj.value(&xbar) - fstar;
        cum_regret += f_mean_err;
        avg.push(&xbar);

        if next_record < record.len() && record[next_record] == t {
            let f_avg_err = obj.value(avg.value()) - fstar;
            let grad_norm_mean =
                estimates.iter().map(|e| vecmath::norm(&e.g)).sum::<f64>() / n as f64;
            rows.push(TraceRow {
                t,
                eta,
                h,
                f_mean_err,
                f_avg_err,
                cum_regret,
                consensus_e: consensus_error(&states),
                grad_norm_mean: Some(grad_norm_mean),
            });
            next_record += 1;
        }

        let grads: Vec<Vec<f64>> = estimates.into_iter().map(|e| e.g).collect();
        states = consensus_step(&states, &grads, &cfg.mixing, eta, theta)?;
        debug_assert!(states.iter().all(|x| theta.contains(x, 1e-12)));
    }

    Ok(Trace { seed: cfg.seed, config_hash: cfg.config_hash.clone(), rows })
}
