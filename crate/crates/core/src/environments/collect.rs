use super::{DecisionRecord, Environment, Individual, LabeledExample};
use crate::error::Result;
use crate::policies::Policy;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A labeled example together with the collecting policy's propensity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedPositive {
    pub example: LabeledExample,
    pub propensity: f64,
    pub t: usize,
}

/// Everything observed while deploying one policy on one proposal batch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CollectedData {
    /// The `d = 1` subset of `log`, in log order.
    pub labeled: Vec<LoggedPositive>,
    pub log: Vec<DecisionRecord>,
    pub per_group_proposed: [usize; 2],
}

impl CollectedData {
    pub fn proposed(&self) -> usize {
        self.per_group_proposed[0] + self.per_group_proposed[1]
    }

    /// Sum of `y − c` over positive decisions.
    pub fn realized_profit(&self, cost: f64) -> f64 {
        self.labeled.iter().map(|p| p.example.y as f64 - cost).sum()
    }
}

/// Deploy `policy` on the given proposals. Labels are drawn only for
/// positive decisions.
pub fn collect_from<R: Rng + ?Sized>(
    env: &Environment,
    policy: &Policy,
    proposals: &[Individual],
    t: usize,
    rng: &mut R,
) -> CollectedData {
    let mut data = CollectedData {
        labeled: Vec::new(),
        log: Vec::with_capacity(proposals.len()),
        per_group_proposed: [0, 0],
    };
    for individual in proposals {
        data.per_group_proposed[individual.s as usize] += 1;
        let (d, propensity) = policy.sample_decision(individual, rng);
        let y = if d == 1 {
            let y = env.sample_label(individual, rng);
            data.labeled.push(LoggedPositive {
                example: LabeledExample {
                    individual: individual.clone(),
                    y,
                },
                propensity,
                t,
            });
            Some(y)
        } else {
            None
        };
        data.log.push(DecisionRecord {
            individual: individual.clone(),
            d,
            y,
            t,
            propensity,
        });
    }
    data
}

/// Sample `n` proposals from `env` and deploy `policy` on them.
pub fn collect_data<R: Rng + ?Sized>(
    env: &Environment,
    policy: &Policy,
    n: usize,
    t: usize,
    rng: &mut R,
) -> Result<CollectedData> {
    let proposals = env.sample_individuals(n, rng)?;
    Ok(collect_from(env, policy, &proposals, t, rng))
}
