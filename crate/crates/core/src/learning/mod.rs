//! Policy learning: IPS estimators, the penalized stochastic gradient
//! update and the sequential driver over time steps.

mod driver;
mod estimators;
mod update;

pub use driver::{consequential_learning, Initialization, RunOutput, RunSetup, Strategy};
pub use estimators::{grad_objective, grad_objective_cross_fit, ips_gradient, ips_value, EstimatorSettings, GradientEstimate, IpsValue, TrainingData};
pub use update::{update_policy, UpdateReport};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// The benefit function `f(d, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenefitKind {
    /// `f = d`.
    DemographicParity,
    /// `f = d·y`.
    EqualOpportunity,
}

impl BenefitKind {
    pub fn f(&self, d: u8, y: u8) -> f64 {
        match self {
            BenefitKind::DemographicParity => d as f64,
            BenefitKind::EqualOpportunity => (d * y) as f64,
        }
    }

    /// `E[f]` when `d ~ Bernoulli(p)` and `y` has mean `y`.
    pub fn expected(&self, p: f64, y: f64) -> f64 {
        match self {
            BenefitKind::DemographicParity => p,
            BenefitKind::EqualOpportunity => p * y,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BenefitKind::DemographicParity => "demographic_parity",
            BenefitKind::EqualOpportunity => "equal_opportunity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceMode {
    /// Update from the data of the immediately preceding policy.
    Iterative,
    /// Update from the union of everything collected so far.
    Aggregated,
}

/// Denominator of the IPS estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the number of proposed individuals (per group for benefits).
    Proposed,
    /// Divide by the number of labeled positives.
    Positives,
}

/// How the penalty term `λ(b̂⁰ − b̂¹)(∇b̂⁰ − ∇b̂¹)` is formed per minibatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyEstimate {
    /// Gap and gradient from the same minibatch.
    PlugIn,
    /// Gap from one half of the minibatch, gradient from the other, symmetrized.
    CrossFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRateDecay {
    pub factor: f64,
    /// Time steps between successive decays.
    pub period: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub cost: f64,
    pub lambda: f64,
    pub timesteps: usize,
    /// Decisions per time step `N`.
    pub decisions: usize,
    /// SGA iterations per update `M`.
    pub iterations: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    pub decay: Option<LearningRateDecay>,
    pub benefit: BenefitKind,
    pub sequence_mode: SequenceMode,
    pub normalization: Normalization,
    pub weight_clip: Option<f64>,
    /// Use `E_d[f]` instead of a sampled decision in the benefit terms.
    pub exact_inner_expectation: bool,
    pub penalty_estimate: PenaltyEstimate,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            cost: 0.5,
            lambda: 0.0,
            timesteps: 200,
            decisions: 256 * 128,
            iterations: 128,
            minibatch: 256,
            learning_rate: 1.0,
            decay: None,
            benefit: BenefitKind::DemographicParity,
            sequence_mode: SequenceMode::Iterative,
            normalization: Normalization::Proposed,
            weight_clip: None,
            exact_inner_expectation: false,
            penalty_estimate: PenaltyEstimate::CrossFit,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cost > 0.0 && self.cost < 1.0) {
            return Err(Error::config(format!("cost must lie in (0, 1), got {}", self.cost)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be a finite value >= 0, got {}", self.lambda)));
        }
        for (name, v) in [
            ("timesteps", self.timesteps),
            ("decisions", self.decisions),
            ("iterations", self.iterations),
            ("minibatch", self.minibatch),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if self.penalty_estimate == PenaltyEstimate::CrossFit && self.lambda > 0.0 && self.minibatch < 2 {
            return Err(Error::config("cross-fit penalty estimates need a minibatch of at least 2"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("alpha must be positive, got {}", self.learning_rate)));
        }
        if let Some(d) = self.decay {
            if !(d.factor > 0.0 && d.factor <= 1.0) || d.period == 0 {
                return Err(Error::config("decay needs a factor in (0, 1] and a period >= 1"));
            }
        }
        if let Some(clip) = self.weight_clip {
            if !(clip > 1.0) {
                return Err(Error::config(format!("weight_clip must exceed 1, got {clip}")));
            }
        }
        Ok(())
    }

    /// Learning rate for the update after collection at step `t` (0-based).
    pub fn learning_rate_at(&self, t: usize) -> f64 {
        match self.decay {
            Some(d) => self.learning_rate * d.factor.powi((t / d.period) as i32),
            None => self.learning_rate,
        }
    }
}
