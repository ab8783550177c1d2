//! Ground-truth distributions `P(x, s, y)` and the selective-label
//! collection process.
//!
//! Four families are provided: parametric synthetic settings, score tables
//! sampled by inverse transform, empirical datasets bootstrapped from a
//! training pool, and finite discrete supports (see [`crate::oracle`]).

mod collect;
mod empirical;
mod score_table;
mod synthetic;

pub use collect::{collect_data, collect_from, CollectedData, LoggedPositive};
pub use empirical::{make_empirical_env, Dataset, EmpiricalEnv};
pub use score_table::{make_score_table_env, ScoreTableEnv, ScoreTableSpec};
pub use synthetic::{
    make_synthetic_env, ConditionalCurve, SyntheticEnv, SyntheticSettingSpec, SETTING1_BOUNDARY, SETTING1_COST, SETTING2_COST,
};

use crate::error::{Error, Result};
use crate::oracle::DiscreteEnv;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A proposed individual: features and binary sensitive attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub x: Vec<f64>,
    pub s: u8,
    /// Index into the training pool when drawn from an empirical environment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_row: Option<usize>,
}

impl Individual {
    pub fn new(x: Vec<f64>, s: u8) -> Self {
        Self {
            x,
            s,
            source_row: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s > 1 {
            return Err(Error::config(format!("group {} is not binary", self.s)));
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("non-finite feature value"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub individual: Individual,
    pub y: u8,
}

/// One entry of the decision log. `y` is present iff `d == 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub individual: Individual,
    pub d: u8,
    pub y: Option<u8>,
    pub t: usize,
    /// `π(d=1|x,s)` under the collecting policy at decision time.
    pub propensity: f64,
}

#[derive(Debug, Clone)]
pub enum Environment {
    Synthetic(SyntheticEnv),
    ScoreTable(ScoreTableEnv),
    Empirical(EmpiricalEnv),
    Discrete(DiscreteEnv),
}

impl Environment {
    pub fn sample_individual<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Individual> {
        match self {
            Environment::Synthetic(e) => Ok(e.sample_individual(rng)),
            Environment::ScoreTable(e) => Ok(e.sample_individual(rng)),
            Environment::Empirical(e) => e.sample_individual(rng),
            Environment::Discrete(e) => Ok(e.sample_individual(rng)),
        }
    }

    /// `n` independent draws from the marginal `P(x, s)`.
    pub fn sample_individuals<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Individual>> {
        if n == 0 {
            return Err(Error::config("sample size must be at least 1"));
        }
        (0..n).map(|_| self.sample_individual(rng)).collect()
    }

    /// `P(y=1|x,s)`, where the environment knows it.
    pub fn true_conditional(&self, individual: &Individual) -> Result<f64> {
        match self {
            Environment::Synthetic(e) => Ok(e.conditional(individual)),
            Environment::ScoreTable(e) => e.conditional(individual),
            Environment::Empirical(_) => Err(Error::ConditionalUnavailable),
            Environment::Discrete(e) => e.conditional(individual),
        }
    }

    pub fn has_conditional(&self) -> bool {
        !matches!(self, Environment::Empirical(_))
    }

    /// Draw `y ~ P(y|x,s)`; empirical environments return the stored label.
    pub fn sample_label<R: Rng + ?Sized>(&self, individual: &Individual, rng: &mut R) -> u8 {
        match self {
            Environment::Empirical(e) => e.stored_label(individual),
            _ => {
                let p = self
                    .true_conditional(individual)
                    .expect("individual was not drawn from this environment");
                u8::from(rng.random::<f64>() < p)
            }
        }
    }

    pub fn sample_labeled<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<LabeledExample>> {
        let individuals = self.sample_individuals(n, rng)?;
        Ok(individuals
            .into_iter()
            .map(|individual| {
                let y = self.sample_label(&individual, rng);
                LabeledExample { individual, y }
            })
            .collect())
    }

    /// Number of raw feature components.
    pub fn feature_dim(&self) -> usize {
        match self {
            Environment::Synthetic(_) | Environment::ScoreTable(_) => 1,
            Environment::Empirical(e) => e.feature_dim(),
            Environment::Discrete(e) => e.feature_dim(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::DiscretePoint;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn point_env(p: f64) -> Environment {
        Environment::Discrete(
            DiscreteEnv::new(vec![DiscretePoint::new(vec![0.25], 1, 1.0, p)]).unwrap(),
        )
    }

    #[test]
    fn point_mass_samples_are_identical() {
        let env = point_env(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs = env.sample_individuals(1000, &mut rng).unwrap();
        assert!(xs.iter().all(|i| i == &xs[0]));
    }

    #[test]
    fn zero_samples_rejected() {
        let env = point_env(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(env.sample_individuals(0, &mut rng).is_err());
    }

    #[test]
    fn degenerate_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (p, expect) in [(1.0, 1u8), (0.0, 0u8)] {
            let env = point_env(p);
            let ind = env.sample_individual(&mut rng).unwrap();
            assert!((0..1000).all(|_| env.sample_label(&ind, &mut rng) == expect));
        }
    }

    #[test]
    fn bernoulli_label_rate() {
        let env = point_env(0.55);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ind = env.sample_individual(&mut rng).unwrap();
        let n = 100_000;
        let mean = (0..n).map(|_| env.sample_label(&ind, &mut rng) as f64).sum::<f64>() / n as f64;
        let bound = 3.0 * (0.55f64 * 0.45 / n as f64).sqrt();
        assert!((mean - 0.55).abs() <= bound, "mean {mean}");
    }

    #[test]
    fn individual_validation() {
        assert!(Individual::new(vec![f64::NAN], 0).validate().is_err());
        assert!(Individual::new(vec![0.0], 2).validate().is_err());
        assert!(Individual::new(vec![0.0], 1).validate().is_ok());
    }
}
