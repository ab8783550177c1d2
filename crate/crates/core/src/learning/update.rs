use super::estimators::{
    accumulate, grad_objective, grad_objective_cross_fit, scaled, EstimatorSettings, GradientEstimate, TrainingData,
    Workspace,
};
use super::{ExperimentConfig, Normalization, PenaltyEstimate};
use crate::diagnostics::{Diagnostic, Diagnostics};
use crate::error::{Error, Result};
use crate::math::axpy;
use crate::policies::{FeatureMap, PolicyParams};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct UpdateReport {
    pub params: PolicyParams,
    /// Iterations skipped because no sampled decision was positive.
    pub skipped: usize,
    /// Labeled examples available to the update.
    pub consumed: usize,
    pub diagnostics: Diagnostics,
}

/// `M` minibatch steps of penalized stochastic gradient ascent.
///
/// Each iteration draws `B` labeled examples uniformly with replacement.
/// In `proposed` mode the minibatch sum is rescaled by `n/B`, giving an
/// unbiased estimate of the full-data gradient; in `positives` mode it is
/// divided by the number of sampled positive decisions. With a cross-fit
/// penalty and `λ > 0` the two halves of the minibatch are estimated and
/// rescaled separately.
pub fn update_policy<R: Rng + ?Sized>(
    params: &PolicyParams,
    data: &TrainingData,
    fmap: &FeatureMap,
    config: &ExperimentConfig,
    learning_rate: f64,
    rng: &mut R,
) -> Result<UpdateReport> {
    let mut report = UpdateReport {
        params: params.clone(),
        skipped: 0,
        consumed: data.len(),
        diagnostics: Diagnostics::default(),
    };
    if config.iterations == 0 {
        return Ok(report);
    }
    if data.is_empty() {
        report.diagnostics.push(Diagnostic::EmptyLabeledSet);
        return Ok(report);
    }
    let settings = EstimatorSettings::from(config);
    let n = data.len();
    let b = config.minibatch;
    let mut work = Workspace::default();
    let mut batch = vec![0usize; b];
    let cross_fit = config.penalty_estimate == PenaltyEstimate::CrossFit && config.lambda > 0.0;
    for j in 0..config.iterations {
        for slot in batch.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        let grad = if cross_fit {
            let (left, right) = batch.split_at(b / 2);
            let first = accumulate(data, left.iter().copied(), &report.params, fmap, &settings, &mut work, rng);
            let first = normalize(first, data, left.len());
            let second = accumulate(data, right.iter().copied(), &report.params, fmap, &settings, &mut work, rng);
            let second = normalize(second, data, right.len());
            match (first, second) {
                (Some(a), Some(b)) => grad_objective_cross_fit(&a, &b, config.lambda),
                _ => {
                    report.skipped += 1;
                    continue;
                }
            }
        } else {
            let est = accumulate(data, batch.iter().copied(), &report.params, fmap, &settings, &mut work, rng);
            match normalize(est, data, b) {
                Some(est) => grad_objective(&est, config.lambda),
                None => {
                    report.skipped += 1;
                    continue;
                }
            }
        };
        axpy(&mut report.params.theta, learning_rate, &grad);
        if !report.params.is_finite() {
            return Err(Error::NonFinite {
                iteration: j + 1,
                message: format!("policy parameters became {:?}", report.params.theta),
            });
        }
    }
    if report.skipped > 0 {
        report.diagnostics.push(Diagnostic::SkippedIterations { count: report.skipped });
    }
    Ok(report)
}

/// Rescale a minibatch sum of `size` draws to a full-data estimate, or
/// `None` when no sampled decision was positive.
fn normalize(est: GradientEstimate, data: &TrainingData, size: usize) -> Option<GradientEstimate> {
    if est.positives_used == 0 {
        return None;
    }
    let n = data.len() as f64;
    let factor = match data.normalization() {
        Normalization::Proposed => n / size as f64,
        Normalization::Positives => n / est.positives_used as f64,
    };
    Some(scaled(est, factor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{CollectedData, Individual, LabeledExample, LoggedPositive};
    use crate::policies::PolicyKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn data() -> CollectedData {
        CollectedData {
            labeled: (0..10)
                .map(|i| LoggedPositive {
                    example: LabeledExample {
                        individual: Individual::new(vec![i as f64 / 10.0], (i % 2) as u8),
                        y: (i % 3 == 0) as u8,
                    },
                    propensity: 0.5,
                    t: 0,
                })
                .collect(),
            log: Vec::new(),
            per_group_proposed: [10, 10],
        }
    }

    #[test]
    fn zero_iterations_is_identity() {
        let d = data();
        let td = TrainingData::iterative(&d, Normalization::Proposed).unwrap();
        let p = PolicyParams::new(PolicyKind::Logistic, vec![0.1, 0.2]);
        let config = ExperimentConfig {
            iterations: 0,
            ..Default::default()
        };
        let r = update_policy(&p, &td, &FeatureMap::default(), &config, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(r.params, p);
    }

    #[test]
    fn empty_data_leaves_params() {
        let d = CollectedData {
            per_group_proposed: [5, 5],
            ..Default::default()
        };
        let td = TrainingData::iterative(&d, Normalization::Proposed).unwrap();
        let p = PolicyParams::new(PolicyKind::Logistic, vec![0.1, 0.2]);
        let r = update_policy(&p, &td, &FeatureMap::default(), &ExperimentConfig::default(), 1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(r.params, p);
        assert!(r.diagnostics.contains(|d| *d == Diagnostic::EmptyLabeledSet));
    }

    #[test]
    fn never_positive_minibatches_are_skipped() {
        let d = data();
        let td = TrainingData::iterative(&d, Normalization::Positives).unwrap();
        let p = PolicyParams::new(PolicyKind::Logistic, vec![-800.0, 0.0]);
        let config = ExperimentConfig {
            iterations: 5,
            minibatch: 4,
            ..Default::default()
        };
        let r = update_policy(&p, &td, &FeatureMap::default(), &config, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(r.skipped, 5);
        assert_eq!(r.params, p);
    }

    #[test]
    fn divergence_reports_iteration() {
        let d = data();
        let td = TrainingData::iterative(&d, Normalization::Proposed).unwrap();
        let p = PolicyParams::new(PolicyKind::Logistic, vec![0.0, 0.0]);
        let config = ExperimentConfig {
            iterations: 3,
            minibatch: 4,
            cost: 0.1,
            ..Default::default()
        };
        let err = update_policy(&p, &td, &FeatureMap::default(), &config, f64::INFINITY, &mut ChaCha8Rng::seed_from_u64(1)).unwrap_err();
        assert!(matches!(err, Error::NonFinite { iteration: 1..=3, .. }), "{err:?}");
    }
}
