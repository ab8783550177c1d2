//! Decision policies `π(d=1|x,s)`.
//!
//! Stochastic policies (logistic and semi-logistic) are parameterized by
//! `θ` over a [`FeatureMap`]; threshold policies wrap a predictor or the
//! true conditional and only ever return 0 or 1. Ties at a threshold grant
//! the positive decision.

mod feature_map;
mod optimal;

pub use feature_map::FeatureMap;
pub use optimal::{make_optimal_policy, OptimalPolicy};

use crate::environments::Individual;
use crate::error::{Error, Result};
use crate::math::{dot, sigmoid};
use crate::predictors::Predictor;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Logistic,
    SemiLogistic,
}

impl PolicyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::Logistic => "logistic",
            PolicyKind::SemiLogistic => "semi_logistic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub kind: PolicyKind,
    pub theta: Vec<f64>,
}

impl PolicyParams {
    pub fn new(kind: PolicyKind, theta: Vec<f64>) -> Self {
        Self { kind, theta }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite())
    }

    /// `π(d=1)` as a function of the linear score `φᵀθ`.
    #[inline]
    pub fn prob_from_score(&self, z: f64) -> f64 {
        match self.kind {
            PolicyKind::Logistic => sigmoid(z),
            PolicyKind::SemiLogistic if z >= 0.0 => 1.0,
            PolicyKind::SemiLogistic => sigmoid(z),
        }
    }

    /// Scalar factor `a` with `∇θ log π(d=1) = a·φ`.
    #[inline]
    pub fn score_factor(&self, z: f64) -> f64 {
        match self.kind {
            PolicyKind::SemiLogistic if z >= 0.0 => 0.0,
            // 1 / (1 + e^z)
            _ => sigmoid(-z),
        }
    }
}

/// `∇θ log π(d=1|x,s)`.
pub fn score_positive(params: &PolicyParams, fmap: &FeatureMap, individual: &Individual) -> Vec<f64> {
    let phi = fmap.apply(individual);
    let a = params.score_factor(dot(&phi, &params.theta));
    phi.into_iter().map(|v| a * v).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticPolicy {
    pub params: PolicyParams,
    pub fmap: FeatureMap,
}

impl StochasticPolicy {
    pub fn linear_score(&self, individual: &Individual) -> f64 {
        dot(&self.fmap.apply(individual), &self.params.theta)
    }
}

/// `1[Q(y=1|x,s) ≥ c]` for a trained predictor `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub predictor: Predictor,
    pub fmap: FeatureMap,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub enum Policy {
    /// The same probability for everyone.
    Constant(f64),
    Stochastic(StochasticPolicy),
    Threshold(ThresholdPolicy),
    Optimal(OptimalPolicy),
    /// `1[x_feature > cutoff]` (strict) on a raw feature.
    Cutoff { feature: usize, cutoff: f64 },
}

impl Policy {
    pub fn logistic(theta: Vec<f64>, fmap: FeatureMap) -> Self {
        Policy::Stochastic(StochasticPolicy {
            params: PolicyParams::new(PolicyKind::Logistic, theta),
            fmap,
        })
    }

    pub fn semi_logistic(theta: Vec<f64>, fmap: FeatureMap) -> Self {
        Policy::Stochastic(StochasticPolicy {
            params: PolicyParams::new(PolicyKind::SemiLogistic, theta),
            fmap,
        })
    }

    pub fn threshold(predictor: Predictor, fmap: FeatureMap, cost: f64) -> Self {
        Policy::Threshold(ThresholdPolicy { predictor, fmap, cost })
    }

    /// `π(d=1|x,s)`.
    pub fn prob_positive(&self, individual: &Individual) -> f64 {
        match self {
            Policy::Constant(p) => *p,
            Policy::Stochastic(p) => p.params.prob_from_score(p.linear_score(individual)),
            Policy::Threshold(p) => {
                let q = p.predictor.predict_prob(&p.fmap, individual);
                if q >= p.cost {
                    1.0
                } else {
                    0.0
                }
            }
            Policy::Optimal(p) => p.decide(individual),
            Policy::Cutoff { feature, cutoff } => {
                if individual.x[*feature] > *cutoff {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Draw `d ~ Bernoulli(π(d=1|x,s))`, returning `(d, π(d=1|x,s))`.
    pub fn sample_decision<R: Rng + ?Sized>(&self, individual: &Individual, rng: &mut R) -> (u8, f64) {
        let p = self.prob_positive(individual);
        let d = if p >= 1.0 {
            1
        } else if p <= 0.0 {
            0
        } else {
            u8::from(rng.random::<f64>() < p)
        };
        (d, p)
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            Policy::Constant(p) => *p == 0.0 || *p == 1.0,
            Policy::Stochastic(_) => false,
            _ => true,
        }
    }

    /// Flat record (kind tag and parameter vector) for run output.
    pub fn record(&self) -> PolicyRecord {
        match self {
            Policy::Constant(p) => PolicyRecord::new("constant", vec![*p]),
            Policy::Stochastic(p) => PolicyRecord::new(p.params.kind.as_str(), p.params.theta.clone()),
            Policy::Threshold(p) => {
                let mut v = vec![p.cost];
                v.extend_from_slice(&p.predictor.weights);
                PolicyRecord::new("threshold", v)
            }
            Policy::Optimal(p) => PolicyRecord::new("optimal", p.group_thresholds.to_vec()),
            Policy::Cutoff { feature, cutoff } => PolicyRecord::new("cutoff", vec![*feature as f64, *cutoff]),
        }
    }
}

/// Serialized policy: `kind` plus a flat numeric array. For `threshold`
/// the first entry is the cost followed by the predictor weights; for
/// `optimal` it is the pair of group thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub kind: String,
    pub params: Vec<f64>,
}

impl PolicyRecord {
    pub fn new(kind: &str, params: Vec<f64>) -> Self {
        Self {
            kind: kind.to_string(),
            params,
        }
    }

    /// Rebuild the policy. `optimal` records need the environment and are
    /// rejected here.
    pub fn to_policy(&self, fmap: FeatureMap) -> Result<Policy> {
        let want = |n: usize| -> Result<()> {
            if self.params.len() == n {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "`{}` policy needs {n} parameters, got {}",
                    self.kind,
                    self.params.len()
                )))
            }
        };
        if self.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("policy parameters must be finite"));
        }
        match self.kind.as_str() {
            "constant" => {
                want(1)?;
                let p = self.params[0];
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config(format!("constant probability {p} outside [0, 1]")));
                }
                Ok(Policy::Constant(p))
            }
            "logistic" => Ok(Policy::logistic(self.params.clone(), fmap)),
            "semi_logistic" => Ok(Policy::semi_logistic(self.params.clone(), fmap)),
            "threshold" => {
                if self.params.len() < 2 {
                    return Err(Error::config("`threshold` policy needs the cost followed by predictor weights"));
                }
                Ok(Policy::threshold(
                    Predictor::new(self.params[1..].to_vec()),
                    fmap,
                    self.params[0],
                ))
            }
            "cutoff" => {
                want(2)?;
                let feature = self.params[0];
                if feature < 0.0 || feature.fract() != 0.0 {
                    return Err(Error::config(format!("cutoff feature index {feature} is not a valid index")));
                }
                Ok(Policy::Cutoff {
                    feature: feature as usize,
                    cutoff: self.params[1],
                })
            }
            other => Err(Error::config(format!("cannot rebuild a `{other}` policy from its record"))),
        }
    }
}
