//! Two-point zero-order gradient estimators and Monte-Carlo probes.
//!
//! The kernel variant draws a radial r ~ U[-1, 1] and a sphere direction
//! zeta, queries f at x +- h r zeta, and returns
//!
//!   g = (d / 2h) (y_fwd - y_bwd) K(r) zeta,
//!
//! whose conditional mean tracks grad f with bias O(h^(beta-1)) when K has
//! matching smoothness order. The plain variant drops the radial draw and
//! the kernel (queries at x +- h zeta); it is exactly unbiased for the
//! gradient of the ball-smoothed surrogate f_h(x) = E f(x + h u), u uniform
//! in the unit ball.
//!
//! Probes measure bias and second moments by batched Monte-Carlo with
//! per-sample stream labels, so they are reproducible and thread-count
//! independent.

use crate::exec;
use crate::kernel::Kernel;
use crate::noise::{NoiseModel, QuerySide};
use crate::objective::Objective;
use crate::rng::{Purpose, StreamFactory};
use crate::{vecmath, Error, Result};

/// One gradient estimate with its audit trail. The query points are
/// x +- h r zeta (r = 1 for the plain variant), reconstructable from the
/// recorded fields.
#[derive(Debug, Clone)]
pub struct GradientEstimate {
    pub g: Vec<f64>,
    /// Noisy forward and backward observations.
    pub y_fwd: f64,
    pub y_bwd: f64,
    /// Radial draw; `None` for the plain variant.
    pub r: Option<f64>,
    pub zeta: Vec<f64>,
}

fn check_query(obj: &Objective, x: &[f64], h: f64) -> Result<()> {
    if x.len() != obj.dim() {
        return Err(Error::Shape { expected: obj.dim(), got: x.len() });
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::NonPositiveScale(h));
    }
    Ok(())
}

/// Kernel-smoothed two-point estimate for agent `agent` at step `t`.
#[allow(clippy::too_many_arguments)]
pub fn zo_gradient_kernel(
    obj: &Objective,
    x: &[f64],
    h: f64,
    kernel: &Kernel,
    noise: &NoiseModel,
    streams: &StreamFactory,
    agent: u32,
    t: u64,
) -> Result<GradientEstimate> {
    check_query(obj, x, h)?;
    let d = obj.dim();
    let r = streams.stream(Purpose::Radial, agent, t).sample_interval();
    let zeta = streams.stream(Purpose::Direction, agent, t).sample_sphere(d)?;
    let step = h * r;
    let up: Vec<f64> = x.iter().zip(&zeta).map(|(xi, zi)| xi + step * zi).collect();
    let dn: Vec<f64> = x.iter().zip(&zeta).map(|(xi, zi)| xi - step * zi).collect();
    let y_fwd = obj.value(&up) + noise.sample(streams, agent, t, QuerySide::Forward)?;
    let y_bwd = obj.value(&dn) + noise.sample(streams, agent, t, QuerySide::Backward)?;
    let scale = d as f64 / (2.0 * h) * (y_fwd - y_bwd) * kernel.eval(r)?;
    let g = zeta.iter().map(|zi| scale * zi).collect();
    Ok(GradientEstimate { g, y_fwd, y_bwd, r: Some(r), zeta })
}

/// Plain two-point estimate (no radial draw, no kernel).
pub fn zo_gradient_plain(
    obj: &Objective,
    x: &[f64],
    h: f64,
    noise: &NoiseModel,
    streams: &StreamFactory,
    agent: u32,
    t: u64,
) -> Result<GradientEstimate> {
    check_query(obj, x, h)?;
    let d = obj.dim();
    let zeta = streams.stream(Purpose::Direction, agent, t).sample_sphere(d)?;
    let up: Vec<f64> = x.iter().zip(&zeta).map(|(xi, zi)| xi + h * zi).collect();
    let dn: Vec<f64> = x.iter().zip(&zeta).map(|(xi, zi)| xi - h * zi).collect();
    let y_fwd = obj.value(&up) + noise.sample(streams, agent, t, QuerySide::Forward)?;
    let y_bwd = obj.value(&dn) + noise.sample(streams, agent, t, QuerySide::Backward)?;
    let scale = d as f64 / (2.0 * h) * (y_fwd - y_bwd);
    let g = zeta.iter().map(|zi| scale * zi).collect();
    Ok(GradientEstimate { g, y_fwd, y_bwd, r: None, zeta })
}

/// Monte-Carlo estimate of the ball-smoothed surrogate
/// f_h(x) = E f(x + h u), u uniform in the unit ball. Returns (mean, se).
pub fn surrogate_value(
    obj: &Objective,
    x: &[f64],
    h: f64,
    n_samples: u64,
    streams: &StreamFactory,
) -> Result<(f64, f64)> {
    check_query(obj, x, h)?;
    let d = obj.dim();
    let acc = exec::mc_moments(n_samples, 1, |i, out| {
        let mut s = streams.stream(Purpose::Probe, 0, i);
        let u = s.sample_ball(d).expect("d >= 1");
        let y: Vec<f64> = x.iter().zip(&u).map(|(xi, ui)| xi + h * ui).collect();
        out[0] = obj.value(&y);
    });
    Ok((acc.mean()[0], acc.std_err()[0]))
}

/// Bias measurement at one smoothing radius.
#[derive(Debug, Clone, Copy)]
pub struct BiasPoint {
    pub h: f64,
    /// || E[g] - grad f(x) || over `n` samples.
    pub bias: f64,
    /// Aggregate standard error of the mean-vector estimate.
    pub se: f64,
    pub n: u64,
}

/// Bias of the estimator across a grid of smoothing radii, with the fitted
/// log-log slope (expected: beta - 1) when the grid has at least two radii.
#[derive(Debug, Clone)]
pub struct BiasProbe {
    pub points: Vec<BiasPoint>,
    pub slope: Option<f64>,
}

/// Measures || E[g] - grad f || at each h by noise-free Monte-Carlo.
/// `variant` picks the estimator; the kernel is ignored by the plain one.
pub fn probe_bias(
    obj: &Objective,
    x: &[f64],
    kernel: &Kernel,
    hs: &[f64],
    n_samples: u64,
    streams: &StreamFactory,
) -> Result<BiasProbe> {
    if hs.is_empty() || n_samples < 2 {
        return Err(Error::FitWindow { need: 1, found: 0 });
    }
    let d = obj.dim();
    let exact = obj.grad(x);
    let noise = NoiseModel::zero();
    let mut points = Vec::with_capacity(hs.len());
    for &h in hs {
        check_query(obj, x, h)?;
        let acc = exec::mc_moments(n_samples, d, |i, out| {
            let est =
                zo_gradient_kernel(obj, x, h, kernel, &noise, streams, 0, i).expect("probe query");
            out.copy_from_slice(&est.g);
        });
        let mean = acc.mean();
        let bias_vec: Vec<f64> = mean.iter().zip(&exact).map(|(m, e)| m - e).collect();
        let se = acc.std_err().iter().map(|s| s * s).sum::<f64>().sqrt();
        points.push(BiasPoint { h, bias: vecmath::norm(&bias_vec), se, n: n_samples });
    }
    let slope = if points.len() >= 2 {
        let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.h, p.bias)).collect();
        Some(log_log_slope(&pts)?)
    } else {
        None
    };
    Ok(BiasProbe { points, slope })
}

/// Second-moment measurement E||g||^2 at one (h, noise) setting.
#[derive(Debug, Clone, Copy)]
pub struct SecondMomentProbe {
    pub mean: f64,
    pub se: f64,
    pub n: u64,
}

pub fn probe_second_moment(
    obj: &Objective,
    x: &[f64],
    h: f64,
    kernel: &Kernel,
    noise: &NoiseModel,
    n_samples: u64,
    streams: &StreamFactory,
) -> Result<SecondMomentProbe> {
    check_query(obj, x, h)?;
    let acc = exec::mc_moments(n_samples, 1, |i, out| {
        let est = zo_gradient_kernel(obj, x, h, kernel, noise, streams, 0, i).expect("probe query");
        out[0] = vecmath::norm_sq(&est.g);
    });
    Ok(SecondMomentProbe { mean: acc.mean()[0], se: acc.std_err()[0], n: n_samples })
}

/// Least-squares slope of ln(y) against ln(x); points with y <= 0 are
/// rejected rather than dropped, a bias measurement of zero means the
/// grid or sample size is wrong.
pub(crate) fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::FitWindow { need: 2, found: points.len() });
    }
    for &(x, y) in points {
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::FitWindow { need: points.len(), found: 0 });
        }
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    Ok((n * sxy - sx * sy) / (n * sxx - sx * sx))
}
