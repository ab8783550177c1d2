//! Held-out evaluation: utility, group benefits, fairness violation and
//! effective utility accumulated on training decisions.
//!
//! All evaluations use `π(d=1|x,s)` analytically instead of sampling
//! decisions.

use crate::environments::{DecisionRecord, Environment, LabeledExample};
use crate::error::{Error, Result};
use crate::learning::BenefitKind;
use crate::policies::Policy;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A labeled test set drawn i.i.d. from the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSample {
    examples: Vec<LabeledExample>,
}

impl EvalSample {
    pub fn new(examples: Vec<LabeledExample>) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::EmptyData("evaluation sample is empty".into()));
        }
        Ok(Self { examples })
    }

    pub fn draw<R: Rng + ?Sized>(env: &Environment, n: usize, rng: &mut R) -> Result<Self> {
        Self::new(env.sample_labeled(n, rng)?)
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// `mean π(d=1|x,s)·(y − c)`.
pub fn utility_on_sample(policy: &Policy, sample: &EvalSample, cost: f64) -> f64 {
    let total: f64 = sample
        .examples
        .iter()
        .map(|e| policy.prob_positive(&e.individual) * (e.y as f64 - cost))
        .sum();
    total / sample.len() as f64
}

/// `mean over group s of π(d=1)` or `π(d=1)·y`.
pub fn benefit_on_sample(policy: &Policy, sample: &EvalSample, kind: BenefitKind, s: u8) -> Result<f64> {
    let (mut total, mut n) = (0.0, 0usize);
    for e in sample.examples.iter().filter(|e| e.individual.s == s) {
        total += kind.expected(policy.prob_positive(&e.individual), e.y as f64);
        n += 1;
    }
    if n == 0 {
        return Err(Error::GroupAbsent(s));
    }
    Ok(total / n as f64)
}

/// `Δb = b⁰ − b¹`.
pub fn fairness_violation(policy: &Policy, sample: &EvalSample, kind: BenefitKind) -> Result<f64> {
    Ok(benefit_on_sample(policy, sample, kind, 0)? - benefit_on_sample(policy, sample, kind, 1)?)
}

/// All held-out metrics from a single pass over the sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub utility: f64,
    pub dp_benefits: [f64; 2],
    pub eop_benefits: [f64; 2],
}

impl Evaluation {
    pub fn dp_violation(&self) -> f64 {
        self.dp_benefits[0] - self.dp_benefits[1]
    }

    pub fn eop_violation(&self) -> f64 {
        self.eop_benefits[0] - self.eop_benefits[1]
    }
}

pub fn evaluate(policy: &Policy, sample: &EvalSample, cost: f64) -> Result<Evaluation> {
    let mut utility = 0.0;
    let mut dp = [0.0; 2];
    let mut eop = [0.0; 2];
    let mut counts = [0usize; 2];
    for e in &sample.examples {
        let p = policy.prob_positive(&e.individual);
        let y = e.y as f64;
        let s = e.individual.s as usize;
        utility += p * (y - cost);
        dp[s] += p;
        eop[s] += p * y;
        counts[s] += 1;
    }
    for s in 0..2 {
        if counts[s] == 0 {
            return Err(Error::GroupAbsent(s as u8));
        }
        dp[s] /= counts[s] as f64;
        eop[s] /= counts[s] as f64;
    }
    Ok(Evaluation {
        utility: utility / sample.len() as f64,
        dp_benefits: dp,
        eop_benefits: eop,
    })
}

/// Profit `Σ_{d=1}(y − c)` accumulated on the log, per proposal.
pub fn effective_utility(log: &[DecisionRecord], cost: f64) -> f64 {
    if log.is_empty() {
        return 0.0;
    }
    let profit: f64 = log
        .iter()
        .filter(|r| r.d == 1)
        .map(|r| r.y.map_or(0.0, |y| y as f64) - cost)
        .sum();
    profit / log.len() as f64
}

/// Running accumulator for [`effective_utility`] across time steps.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EffectiveUtility {
    profit: f64,
    proposals: usize,
}

impl EffectiveUtility {
    pub fn add(&mut self, profit: f64, proposals: usize) {
        self.profit += profit;
        self.proposals += proposals;
    }

    pub fn value(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.profit / self.proposals as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub t: usize,
    pub utility: f64,
    pub effective_utility: f64,
    pub dp_violation: f64,
    pub eop_violation: f64,
    pub positives_collected: usize,
}
