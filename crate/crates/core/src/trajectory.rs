//! Sampled paths produced by the flow integrators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::PhaseState;

/// Which parameter drives a trajectory: the Hamilton "mock time" `τ` or the
/// gradient-flow parameter `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParameterKind {
    Tau,
    T,
}

impl ParameterKind {
    pub fn label(self) -> &'static str {
        match self {
            ParameterKind::Tau => "tau",
            ParameterKind::T => "t",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub param: f64,
    pub state: PhaseState,
    /// `g^{μν} p_μ p_ν − E²` at this sample.
    pub eikonal_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub model: String,
    pub energy: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    kind: ParameterKind,
    samples: Vec<Sample>,
    meta: TrajectoryMeta,
}

impl Trajectory {
    /// Fails unless the sample parameters are strictly increasing.
    pub fn new(kind: ParameterKind, samples: Vec<Sample>, meta: TrajectoryMeta) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Config("trajectory needs at least one sample".into()));
        }
        if let Some(w) = samples.windows(2).find(|w| w[1].param <= w[0].param) {
            return Err(Error::Config(format!(
                "trajectory parameters must increase strictly ({} then {})",
                w[0].param, w[1].param
            )));
        }
        Ok(Self { kind, samples, meta })
    }

    pub fn kind(&self) -> ParameterKind {
        self.kind
    }

    pub fn meta(&self) -> &TrajectoryMeta {
        &self.meta
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("non-empty by construction")
    }

    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.param)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }
}

impl<'a> IntoIterator for &'a Trajectory {
    type Item = &'a Sample;
    type IntoIter = std::slice::Iter<'a, Sample>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}
