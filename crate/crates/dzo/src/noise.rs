//! Observation-noise models for the two-point oracle.
//!
//! Each query pair (forward, backward) receives its own noise draw; the two
//! draws come from distinct stream purposes so they are independent of each
//! other and of the agent's randomization. Every model satisfies
//! E[xi^2] <= sigma^2, with equality information kept exact for the
//! deterministic kinds so adversarial-noise experiments stay calibrated.

use crate::rng::{Purpose, StreamFactory};
use crate::{Error, Result};

/// Which of the two queries in a pair the noise applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuerySide {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    Zero,
    /// N(0, sigma^2), independent across labels.
    Gaussian,
    /// U[-sigma sqrt3, sigma sqrt3], variance sigma^2.
    Uniform,
    /// Deterministic sigma * (-1)^(t + agent): adversarial but bounded.
    SignAlternating,
    /// Constant offset sigma on every query; cancels in the two-point
    /// difference, which is what experiments use it to demonstrate.
    ConstantBias,
    /// A fixed sequence consumed by time index: entry 2(t-1) feeds the
    /// forward query, 2(t-1)+1 the backward one, shared by all agents.
    Precommitted(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct NoiseModel {
    kind: NoiseKind,
    sigma: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, sigma: f64) -> Result<Self> {
        if sigma < 0.0 || !sigma.is_finite() {
            return Err(Error::NonPositiveScale(sigma));
        }
        if let NoiseKind::Precommitted(seq) = &kind {
            // The sequence must respect the advertised second-moment budget.
            for &v in seq {
                if v.abs() > sigma {
                    return Err(Error::SequenceScale { value: v, sigma });
                }
            }
        }
        Ok(Self { kind, sigma })
    }

    pub fn zero() -> Self {
        Self { kind: NoiseKind::Zero, sigma: 0.0 }
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Noise for one query of agent `agent` at step `t` (t >= 1).
    pub fn sample(
        &self,
        streams: &StreamFactory,
        agent: u32,
        t: u64,
        side: QuerySide,
    ) -> Result<f64> {
        let purpose = match side {
            QuerySide::Forward => Purpose::NoiseFirst,
            QuerySide::Backward => Purpose::NoiseSecond,
        };
        Ok(match &self.kind {
            NoiseKind::Zero => 0.0,
            NoiseKind::Gaussian => self.sigma * streams.stream(purpose, agent, t).sample_normal(),
            NoiseKind::Uniform => {
                3.0f64.sqrt() * self.sigma * streams.stream(purpose, agent, t).sample_interval()
            }
            NoiseKind::SignAlternating => {
                if (t + agent as u64).is_multiple_of(2) {
                    self.sigma
                } else {
                    -self.sigma
                }
            }
            NoiseKind::ConstantBias => self.sigma,
            NoiseKind::Precommitted(seq) => {
                let idx = 2 * (t as usize - 1)
                    + match side {
                        QuerySide::Forward => 0,
                        QuerySide::Backward => 1,
                    };
                *seq.get(idx).ok_or(Error::SequenceExhausted(idx))?
            }
        })
    }
}
