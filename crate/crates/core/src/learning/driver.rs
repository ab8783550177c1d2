use super::estimators::TrainingData;
use super::update::update_policy;
use super::{BenefitKind, ExperimentConfig, SequenceMode};
use crate::diagnostics::{Diagnostic, Diagnostics};
use crate::environments::{collect_from, CollectedData, Environment, LabeledExample};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EffectiveUtility, EvalSample, MetricsRecord};
use crate::policies::{make_optimal_policy, FeatureMap, Policy, PolicyParams, StochasticPolicy};
use crate::predictors::{train_mle, Predictor, TrainSpec};
use crate::rng::Streams;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// `π_t = π*` using the true conditional.
    Optimal,
    /// Threshold rule on a predictor retrained from observed labels.
    Deterministic,
    Logistic,
    SemiLogistic,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Optimal,
        Strategy::Deterministic,
        Strategy::Logistic,
        Strategy::SemiLogistic,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Optimal => "optimal",
            Strategy::Deterministic => "deterministic",
            Strategy::Logistic => "logistic",
            Strategy::SemiLogistic => "semi_logistic",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown strategy `{s}`")))
    }
}

/// How `θ₀` (and the deterministic strategy's initial predictor) is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    Theta(Vec<f64>),
    /// Fit a logistic predictor on this many i.i.d. labeled examples.
    Bootstrap { examples: usize },
}

#[derive(Debug, Clone)]
pub struct RunSetup {
    pub fmap: FeatureMap,
    pub init: Initialization,
    /// Training protocol of the deterministic strategy's predictor.
    pub predictor: TrainSpec,
    /// Group thresholds of the optimal strategy equalize this benefit when set.
    pub optimal_benefit: Option<BenefitKind>,
    /// Keep every collected dataset (with its full decision log) in the output.
    pub keep_data: bool,
}

impl Default for RunSetup {
    fn default() -> Self {
        Self {
            fmap: FeatureMap::default(),
            init: Initialization::Theta(vec![0.0, 0.0]),
            predictor: TrainSpec::default(),
            optimal_benefit: None,
            keep_data: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub strategy: Strategy,
    pub initial_theta: Vec<f64>,
    /// `π_0, …, π_T`.
    pub policies: Vec<Policy>,
    /// Collected datasets per step (empty unless `keep_data`).
    pub data: Vec<CollectedData>,
    /// One record per step `t = 1..=T`, evaluating `π_t`.
    pub metrics: Vec<MetricsRecord>,
    /// Labeled examples consumed by each update.
    pub consumed: Vec<usize>,
    pub diagnostics: Diagnostics,
}

impl RunOutput {
    pub fn final_policy(&self) -> &Policy {
        self.policies.last().expect("a run holds at least the initial policy")
    }
}

fn initial_theta(env: &Environment, setup: &RunSetup, seed: u64, diagnostics: &mut Diagnostics) -> Result<Vec<f64>> {
    let dim = setup.fmap.output_dim(env.feature_dim());
    let theta = match &setup.init {
        Initialization::Theta(theta) => theta.clone(),
        Initialization::Bootstrap { examples } => {
            let mut rng = Streams::new(seed).init();
            let sample = env.sample_labeled(*examples, &mut rng)?;
            let spec = TrainSpec {
                init: None,
                ..setup.predictor.clone()
            };
            let fit = train_mle(&sample, &setup.fmap, &spec, &mut rng)?;
            diagnostics.extend(fit.diagnostics);
            fit.value.weights
        }
    };
    if theta.len() != dim {
        return Err(Error::config(format!(
            "initial parameters have length {}, feature map yields {dim}",
            theta.len()
        )));
    }
    Ok(theta)
}

struct History {
    mode: SequenceMode,
    keep_all: bool,
    data: Vec<CollectedData>,
    /// Labeled examples pooled so far, for the deterministic strategy.
    pool: Vec<LabeledExample>,
}

impl History {
    fn push(&mut self, data: CollectedData, track_pool: bool) {
        if track_pool {
            if self.mode == SequenceMode::Iterative {
                self.pool.clear();
            }
            self.pool.extend(data.labeled.iter().map(|p| p.example.clone()));
        }
        if self.mode == SequenceMode::Iterative && !self.keep_all {
            self.data.clear();
        }
        self.data.push(data);
    }

    fn training_data(&self, config: &ExperimentConfig) -> Result<TrainingData<'_>> {
        match self.mode {
            SequenceMode::Iterative => {
                TrainingData::iterative(self.data.last().expect("collected before update"), config.normalization)
            }
            SequenceMode::Aggregated => TrainingData::aggregated(&self.data, config.normalization),
        }
    }
}

/// Run `T` rounds of data collection and policy update for one strategy.
///
/// All strategies with the same seed see the same proposals at every step;
/// decision and update randomness is specific to `(strategy, λ)`.
pub fn consequential_learning(
    env: &Environment,
    strategy: Strategy,
    config: &ExperimentConfig,
    setup: &RunSetup,
    test: &EvalSample,
) -> Result<RunOutput> {
    config.validate()?;
    let streams = Streams::for_cell(config.seed, strategy.as_str(), config.lambda);
    let mut diagnostics = Diagnostics::default();
    let theta0 = initial_theta(env, setup, config.seed, &mut diagnostics)?;
    let fmap = &setup.fmap;
    let mut policy = match strategy {
        Strategy::Optimal => {
            let fit = make_optimal_policy(env, config.cost, setup.optimal_benefit, test)?;
            diagnostics.extend(fit.diagnostics);
            Policy::Optimal(fit.value)
        }
        Strategy::Deterministic => Policy::threshold(Predictor::new(theta0.clone()), fmap.clone(), config.cost),
        Strategy::Logistic => Policy::logistic(theta0.clone(), fmap.clone()),
        Strategy::SemiLogistic => Policy::semi_logistic(theta0.clone(), fmap.clone()),
    };

    let mut history = History {
        mode: config.sequence_mode,
        keep_all: setup.keep_data,
        data: Vec::new(),
        pool: Vec::new(),
    };
    let mut policies = vec![policy.clone()];
    let mut metrics = Vec::with_capacity(config.timesteps);
    let mut consumed = Vec::with_capacity(config.timesteps);
    let mut effective = EffectiveUtility::default();

    for t in 0..config.timesteps {
        let proposals = env.sample_individuals(config.decisions, &mut streams.proposals(t))?;
        let mut collected = collect_from(env, &policy, &proposals, t, &mut streams.decisions(t));
        effective.add(collected.realized_profit(config.cost), collected.proposed());
        let positives = collected.labeled.len();
        if !setup.keep_data {
            collected.log = Vec::new();
        }
        history.push(collected, strategy == Strategy::Deterministic);

        let mut rng = streams.updates(t);
        policy = match &policy {
            Policy::Optimal(_) => {
                consumed.push(0);
                policy
            }
            Policy::Threshold(current) => {
                consumed.push(history.pool.len());
                if history.pool.is_empty() {
                    diagnostics.push(Diagnostic::EmptyLabeledSet);
                    policy
                } else {
                    let spec = TrainSpec {
                        init: Some(current.predictor.weights.clone()),
                        ..setup.predictor.clone()
                    };
                    let fit = train_mle(&history.pool, fmap, &spec, &mut rng)?;
                    diagnostics.extend(fit.diagnostics);
                    Policy::threshold(fit.value, fmap.clone(), config.cost)
                }
            }
            Policy::Stochastic(current) => {
                let data = history.training_data(config)?;
                let report = update_policy(
                    &current.params,
                    &data,
                    fmap,
                    config,
                    config.learning_rate_at(t),
                    &mut rng,
                )
                .map_err(|e| match e {
                    Error::NonFinite { iteration, message } => Error::NonFinite {
                        iteration,
                        message: format!("time step {t}: {message}"),
                    },
                    other => other,
                })?;
                consumed.push(report.consumed);
                diagnostics.extend(report.diagnostics);
                let kind = current.params.kind;
                Policy::Stochastic(StochasticPolicy {
                    params: PolicyParams::new(kind, report.params.theta),
                    fmap: fmap.clone(),
                })
            }
            _ => unreachable!("strategies only produce optimal, threshold or stochastic policies"),
        };
        let e = evaluate(&policy, test, config.cost)?;
        metrics.push(MetricsRecord {
            t: t + 1,
            utility: e.utility,
            effective_utility: effective.value(),
            dp_violation: e.dp_violation(),
            eop_violation: e.eop_violation(),
            positives_collected: positives,
        });
        policies.push(policy.clone());
    }

    let data = if setup.keep_data { history.data } else { Vec::new() };
    Ok(RunOutput {
        strategy,
        initial_theta: theta0,
        policies,
        data,
        metrics,
        consumed,
        diagnostics,
    })
}
