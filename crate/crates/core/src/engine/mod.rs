//! Decentralized gradient methods: DGD, DGD^t, NEAR-DGD^t and NEAR-DGD^+.

mod bounds;
mod operators;
mod runner;
mod schedule;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::objectives::ObjectiveError;
use crate::topology::TopologyError;

pub use bounds::{max_stepsize, theory_bounds, BoundKind, TheoryBounds};
pub use operators::{consensus_operator, dgd_step, dgdt_step, gradient_operator, near_dgd_step};
pub use runner::{run, RunDiagnostics, RunOutcome, DIVERGENCE_THRESHOLD};
pub use schedule::ConsensusSchedule;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("invalid method configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite gradient at agent {agent}")]
    NonFiniteGradient { agent: usize },
    #[error("diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: u64, reason: String },
    #[error("stepsize {alpha} violates the theory precondition (bound {bound})")]
    StepsizeTooLarge { alpha: f64, bound: f64 },
    #[error("relative error undefined for x* = 0")]
    ZeroOptimum,
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Dgd,
    DgdT,
    NearDgd,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Dgd => "dgd",
            Method::DgdT => "dgd_t",
            Method::NearDgd => "near_dgd",
        })
    }
}

impl FromStr for Method {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dgd" => Ok(Method::Dgd),
            "dgd_t" | "dgdt" => Ok(Method::DgdT),
            "near_dgd" | "near-dgd" | "neardgd" => Ok(Method::NearDgd),
            other => Err(EngineError::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    #[default]
    Zeros,
    Shared(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub label: String,
    pub method: Method,
    pub schedule: ConsensusSchedule,
    /// Gradient substeps per iteration (`a` in NEAR-DGD(a,b,c)).
    pub gradient_steps: u32,
    pub alpha: f64,
    pub max_iters: u64,
    pub init: Init,
    /// Record every `stride`-th iteration (and always the last).
    pub stride: u64,
}

impl MethodConfig {
    pub fn dgd(alpha: f64, max_iters: u64) -> Self {
        Self {
            label: "DGD".into(),
            method: Method::Dgd,
            schedule: ConsensusSchedule::Fixed(1),
            gradient_steps: 1,
            alpha,
            max_iters,
            init: Init::Zeros,
            stride: 1,
        }
    }

    pub fn dgd_t(t: u64, alpha: f64, max_iters: u64) -> Self {
        Self {
            label: format!("DGD^{t}"),
            method: Method::DgdT,
            schedule: ConsensusSchedule::Fixed(t),
            ..Self::dgd(alpha, max_iters)
        }
    }

    pub fn near_dgd(schedule: ConsensusSchedule, alpha: f64, max_iters: u64) -> Self {
        Self {
            label: format!("NEAR-DGD[{schedule}]"),
            method: Method::NearDgd,
            schedule,
            ..Self::dgd(alpha, max_iters)
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// True when the configuration lies outside the convergence theory.
    pub fn outside_theory(&self) -> bool {
        self.gradient_steps > 1
    }

    /// Consensus rounds for the fixed-`t` methods.
    pub fn fixed_rounds(&self) -> Option<u64> {
        match self.schedule {
            ConsensusSchedule::Fixed(t) => Some(t),
            _ => None,
        }
    }

    pub fn validate(&self, p: usize) -> Result<(), EngineError> {
        let bad = |msg: String| Err(EngineError::InvalidConfig(format!("{}: {msg}", self.label)));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive and finite, got {}", self.alpha));
        }
        if self.gradient_steps == 0 {
            return bad("gradient_steps must be >= 1".into());
        }
        if self.stride == 0 {
            return bad("stride must be >= 1".into());
        }
        self.schedule.validate()?;
        match self.method {
            Method::Dgd | Method::DgdT => {
                if self.init != Init::Zeros {
                    return bad("dgd and dgd_t start from zeros".into());
                }
                if self.gradient_steps != 1 {
                    return bad("dgd and dgd_t take one gradient step per iteration".into());
                }
                match (self.method, self.schedule) {
                    (Method::Dgd, ConsensusSchedule::Fixed(1)) => {}
                    (Method::Dgd, _) => return bad("dgd uses one consensus round".into()),
                    (_, ConsensusSchedule::Fixed(_)) => {}
                    _ => return bad("dgd_t needs a fixed schedule".into()),
                }
            }
            Method::NearDgd => {
                if let Init::Shared(point) = &self.init {
                    if point.len() != p {
                        return Err(EngineError::DimensionMismatch(format!(
                            "{}: initial point has dimension {}, expected {p}",
                            self.label,
                            point.len()
                        )));
                    }
                    if point.iter().any(|v| !v.is_finite()) {
                        return bad("initial point must be finite".into());
                    }
                }
            }
        }
        Ok(())
    }
}
