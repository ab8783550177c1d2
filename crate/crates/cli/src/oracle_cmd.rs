//! Exact value of a policy on a finite discrete environment.

use crate::run::load_discrete;
use crate::CliError;
use conseq::learning::BenefitKind;
use conseq::oracle::{exact_optimal, exact_value};
use conseq::policies::{FeatureMap, Policy, PolicyRecord};
use serde::Deserialize;
use std::path::Path;

/// A policy record, optionally with the feature map it was trained with.
#[derive(Debug, Deserialize)]
struct PolicyFile {
    #[serde(flatten)]
    record: PolicyRecord,
    #[serde(default)]
    fmap: FeatureMap,
}

pub fn oracle_report(
    env_path: &Path,
    policy_path: &Path,
    cost: f64,
    lambda: f64,
    benefit: BenefitKind,
) -> Result<String, CliError> {
    if !(cost > 0.0 && cost < 1.0) {
        return Err(CliError::Config(format!("--cost must lie in (0, 1), got {cost}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(CliError::Config(format!("--lambda must be a finite value >= 0, got {lambda}")));
    }
    let env = load_discrete(env_path)?;
    let text = std::fs::read_to_string(policy_path).map_err(|e| CliError::io(policy_path, e))?;
    let file: PolicyFile =
        serde_json::from_str(&text).map_err(|e| CliError::Ingest(format!("{}: {e}", policy_path.display())))?;
    let policy = file
        .record
        .to_policy(file.fmap)
        .map_err(|e| CliError::Config(format!("{}: {e}", policy_path.display())))?;
    let dim = env.feature_dim();
    let mismatch = match &policy {
        Policy::Stochastic(p) => p.params.theta.len() != p.fmap.output_dim(dim),
        Policy::Threshold(p) => p.predictor.weights.len() != p.fmap.output_dim(dim),
        Policy::Cutoff { feature, .. } => *feature >= dim,
        _ => false,
    };
    if mismatch {
        return Err(CliError::Config(format!(
            "{}: policy parameters do not fit {dim}-dimensional features",
            policy_path.display()
        )));
    }
    let value = exact_value(&policy, &env, cost, lambda, benefit);
    let optimal = exact_optimal(&env, cost);
    let report = serde_json::json!({
        "utility": value.utility,
        "benefits": value.benefits,
        "gap": value.gap(),
        "objective": value.objective,
        "decision_probs": env.decision_probs(&policy),
        "optimal_utility": optimal.utility,
    });
    Ok(serde_json::to_string_pretty(&report).expect("report serializes") + "\n")
}
