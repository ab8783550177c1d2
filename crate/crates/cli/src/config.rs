//! Flat TOML run configuration.
//!
//! Every key is optional in the file. [`RawConfig::resolve`] fills
//! defaults and checks ranges, reporting every problem with the key name
//! and the line it appears on.

use crate::presets::Preset;
use crate::CliError;
use conseq::learning::{
    BenefitKind, ExperimentConfig, Initialization, LearningRateDecay, Normalization, PenaltyEstimate, SequenceMode,
    Strategy,
};
use conseq::predictors::{OptimizerSettings, TrainSpec};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Keys accepted by run configurations, in echo order.
pub const RUN_KEYS: &[&str] = &[
    "environment",
    "dataset",
    "split_fraction",
    "score_table",
    "group_weights",
    "discrete",
    "strategies",
    "seeds",
    "seed_count",
    "lambda",
    "lambda_grid",
    "cost",
    "timesteps",
    "decisions",
    "iterations",
    "minibatch",
    "alpha",
    "decay_factor",
    "decay_period",
    "benefit",
    "sequence_mode",
    "normalization",
    "weight_clip",
    "exact_inner_expectation",
    "penalty_estimate",
    "init_theta",
    "init_examples",
    "feature_degree",
    "include_group",
    "standardize",
    "predictor_ridge",
    "predictor_steps",
    "predictor_rate",
    "optimal_benefit",
    "test_size",
    "output",
];

/// A parsed file with the line of every top-level key.
pub struct Source {
    pub path: PathBuf,
    pub text: String,
    pub table: toml::Table,
}

impl Source {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(path, text)
    }

    pub fn parse(path: &Path, text: String) -> Result<Self, CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self {
            path: path.to_path_buf(),
            text,
            table,
        })
    }

    /// 1-based line where `key` is assigned, if it can be found.
    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.text.lines().position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .map(|rest| rest.trim_start().starts_with('='))
                .unwrap_or(false)
        })
        .map(|i| i + 1)
    }

    pub fn locate(&self, key: &str) -> String {
        match self.line_of(key) {
            Some(line) => format!("{}:{line}: `{key}`", self.path.display()),
            None => format!("{}: `{key}`", self.path.display()),
        }
    }

    /// Reject keys outside `known`, suggesting the closest accepted key.
    pub fn check_keys(&self, known: &[&str], problems: &mut Vec<String>) {
        for key in self.table.keys() {
            if known.contains(&key.as_str()) {
                continue;
            }
            let mut msg = format!("{}: unknown key", self.locate(key));
            if let Some(best) = suggest(key, known) {
                msg.push_str(&format!(", did you mean `{best}`?"));
            }
            problems.push(msg);
        }
    }

    /// Deserialize the table, reporting type errors with the offending key.
    pub fn decode<T: for<'de> Deserialize<'de>>(&self) -> Result<T, CliError> {
        toml::from_str(&self.text).map_err(|e| CliError::Config(format!("{}: {e}", self.path.display())))
    }
}

pub fn suggest<'a>(key: &str, known: &[&'a str]) -> Option<&'a str> {
    known
        .iter()
        .map(|k| (strsim::levenshtein(key, k), *k))
        .filter(|(d, k)| *d <= 2.max(k.len() / 3))
        .min()
        .map(|(_, k)| k)
}

/// File contents before defaults. Serialized back, with every field set,
/// it is the resolved echo written by `validate` and into run manifests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub environment: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score_table: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group_weights: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrete: Option<PathBuf>,
    pub strategies: Option<Vec<String>>,
    pub seeds: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub cost: Option<f64>,
    pub timesteps: Option<usize>,
    pub decisions: Option<usize>,
    pub iterations: Option<usize>,
    pub minibatch: Option<usize>,
    pub alpha: Option<f64>,
    pub decay_factor: Option<f64>,
    pub decay_period: Option<usize>,
    pub benefit: Option<BenefitKind>,
    pub sequence_mode: Option<SequenceMode>,
    pub normalization: Option<Normalization>,
    /// `0` in the echo means clipping is off.
    pub weight_clip: Option<f64>,
    pub exact_inner_expectation: Option<bool>,
    pub penalty_estimate: Option<PenaltyEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_theta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_examples: Option<usize>,
    pub feature_degree: Option<usize>,
    pub include_group: Option<bool>,
    pub standardize: Option<bool>,
    pub predictor_ridge: Option<f64>,
    pub predictor_steps: Option<usize>,
    pub predictor_rate: Option<f64>,
    /// `"none"` for unconstrained thresholds.
    pub optimal_benefit: Option<String>,
    pub test_size: Option<usize>,
    pub output: Option<PathBuf>,
}

/// Where individuals come from.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvironmentSpec {
    Preset(Preset),
    Dataset { path: PathBuf, split_fraction: f64 },
    ScoreTable { path: PathBuf, group_weights: [f64; 2] },
    Discrete { path: PathBuf },
}

impl EnvironmentSpec {
    /// Whether the environment is backed by a finite labeled dataset.
    pub fn is_dataset(&self) -> bool {
        matches!(self, EnvironmentSpec::Dataset { .. } | EnvironmentSpec::Preset(Preset::CompasStandin))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSettings {
    pub degree: usize,
    pub include_group: bool,
    pub standardize: bool,
}

/// A fully resolved run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub environment: EnvironmentSpec,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub lambdas: Vec<f64>,
    /// Shared settings; `seed` and `lambda` are set per cell.
    pub experiment: ExperimentConfig,
    pub init: Initialization,
    pub features: FeatureSettings,
    pub predictor: TrainSpec,
    pub optimal_benefit: Option<BenefitKind>,
    pub test_size: usize,
    pub output: PathBuf,
    /// The input with every default filled in.
    pub resolved: RawConfig,
}

fn resolve_relative(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn parse_benefit(raw: &str) -> Option<BenefitKind> {
    match raw {
        "demographic_parity" => Some(BenefitKind::DemographicParity),
        "equal_opportunity" => Some(BenefitKind::EqualOpportunity),
        _ => None,
    }
}

impl RawConfig {
    /// Fill defaults, validate, and return the resolved run. Relative paths
    /// are taken relative to the configuration file.
    pub fn resolve(mut self, source: &Source) -> Result<RunConfig, CliError> {
        let mut problems = Vec::new();
        source.check_keys(RUN_KEYS, &mut problems);
        let at = |key: &str| source.locate(key);
        let defaults = ExperimentConfig::default();

        let chosen: Vec<&str> = [
            ("environment", self.environment.is_some()),
            ("dataset", self.dataset.is_some()),
            ("score_table", self.score_table.is_some()),
            ("discrete", self.discrete.is_some()),
        ]
        .into_iter()
        .filter(|(_, set)| *set)
        .map(|(k, _)| k)
        .collect();
        let environment = match chosen.as_slice() {
            [] => {
                problems.push(format!(
                    "{}: one of `environment`, `dataset`, `score_table` or `discrete` is required",
                    source.path.display()
                ));
                None
            }
            [_] => {
                if let Some(name) = &self.environment {
                    match name.parse::<Preset>() {
                        Ok(p) => Some(EnvironmentSpec::Preset(p)),
                        Err(e) => {
                            problems.push(format!("{}: {e}", at("environment")));
                            None
                        }
                    }
                } else if let Some(path) = &self.dataset {
                    let split_fraction = *self.split_fraction.get_or_insert(0.8);
                    if !(split_fraction > 0.0 && split_fraction < 1.0) {
                        problems.push(format!("{}: must lie in (0, 1), got {split_fraction}", at("split_fraction")));
                    }
                    let path = resolve_relative(&source.path, path);
                    if !path.is_file() {
                        problems.push(format!("{}: file {} does not exist", at("dataset"), path.display()));
                    }
                    Some(EnvironmentSpec::Dataset { path, split_fraction })
                } else if let Some(path) = &self.score_table {
                    let path = resolve_relative(&source.path, path);
                    if !path.is_file() {
                        problems.push(format!("{}: file {} does not exist", at("score_table"), path.display()));
                    }
                    match self.group_weights {
                        Some(w) => Some(EnvironmentSpec::ScoreTable { path, group_weights: w }),
                        None => {
                            problems.push(format!("{}: `group_weights` is required with `score_table`", at("score_table")));
                            None
                        }
                    }
                } else {
                    let path = resolve_relative(&source.path, self.discrete.as_ref().unwrap());
                    if !path.is_file() {
                        problems.push(format!("{}: file {} does not exist", at("discrete"), path.display()));
                    }
                    Some(EnvironmentSpec::Discrete { path })
                }
            }
            many => {
                problems.push(format!(
                    "{}: `{}` are mutually exclusive",
                    source.path.display(),
                    many.join("`, `")
                ));
                None
            }
        };

        let strategies: Vec<Strategy> = match &self.strategies {
            None => {
                problems.push(format!("{}: `strategies` is required", source.path.display()));
                Vec::new()
            }
            Some(list) => {
                if list.is_empty() {
                    problems.push(format!("{}: at least one strategy is required", at("strategies")));
                }
                let mut out = Vec::new();
                for name in list {
                    match name.parse::<Strategy>() {
                        Ok(s) if out.contains(&s) => problems.push(format!("{}: `{name}` listed twice", at("strategies"))),
                        Ok(s) => out.push(s),
                        Err(_) => {
                            let names: Vec<&str> = Strategy::ALL.iter().map(|s| s.as_str()).collect();
                            let mut msg = format!("{}: unknown strategy `{name}`", at("strategies"));
                            if let Some(best) = suggest(name, &names) {
                                msg.push_str(&format!(", did you mean `{best}`?"));
                            }
                            problems.push(msg);
                        }
                    }
                }
                out
            }
        };
        if let Some(EnvironmentSpec::Dataset { .. } | EnvironmentSpec::Preset(Preset::CompasStandin)) = &environment {
            if strategies.contains(&Strategy::Optimal) {
                problems.push(format!(
                    "{}: `optimal` needs P(y|x,s), which a dataset environment does not have",
                    at("strategies")
                ));
            }
        }

        let seeds: Vec<u64> = match (&self.seeds, self.seed_count.take()) {
            (Some(_), Some(_)) => {
                problems.push(format!("{}: `seeds` and `seed_count` are mutually exclusive", at("seed_count")));
                Vec::new()
            }
            (Some(list), None) => list.clone(),
            (None, Some(n)) => (0..n).collect(),
            (None, None) => vec![0],
        };
        if seeds.is_empty() && !problems.iter().any(|p| p.contains("seed_count")) {
            problems.push(format!("{}: at least one seed is required", at("seeds")));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            problems.push(format!("{}: seeds must be distinct", at("seeds")));
        }
        self.seeds = Some(seeds.clone());

        let lambdas = match (self.lambda.take(), &self.lambda_grid) {
            (Some(_), Some(_)) => {
                problems.push(format!("{}: set either `lambda` or `lambda_grid`", at("lambda")));
                Vec::new()
            }
            (None, Some(grid)) => {
                if grid.is_empty() {
                    problems.push(format!("{}: grid is empty", at("lambda_grid")));
                }
                grid.clone()
            }
            (Some(l), None) => vec![l],
            (None, None) => vec![defaults.lambda],
        };
        let lambda_key = if source.table.contains_key("lambda") { "lambda" } else { "lambda_grid" };
        for &l in &lambdas {
            if !(l >= 0.0 && l.is_finite()) {
                problems.push(format!("{}: must be a finite value >= 0, got {l}", at(lambda_key)));
            }
        }
        let mut unique = lambdas.clone();
        unique.sort_by(f64::total_cmp);
        unique.dedup();
        if unique.len() != lambdas.len() {
            problems.push(format!("{}: values must be distinct", at("lambda_grid")));
        }
        // The echo always spells out the grid.
        self.lambda_grid = Some(lambdas.clone());
        let lambda = lambdas.first().copied().unwrap_or(defaults.lambda);

        let cost = *self.cost.get_or_insert(defaults.cost);
        if !(cost > 0.0 && cost < 1.0) {
            problems.push(format!("{}: must lie in (0, 1), got {cost}", at("cost")));
        }
        let mut positive = |key: &str, value: &mut Option<usize>, default: usize| -> usize {
            let v = *value.get_or_insert(default);
            if v == 0 {
                problems.push(format!("{}: must be at least 1", at(key)));
            }
            v
        };
        let timesteps = positive("timesteps", &mut self.timesteps, defaults.timesteps);
        let decisions = positive("decisions", &mut self.decisions, defaults.decisions);
        let iterations = positive("iterations", &mut self.iterations, defaults.iterations);
        let minibatch = positive("minibatch", &mut self.minibatch, defaults.minibatch);
        let test_size = positive("test_size", &mut self.test_size, 10_000);
        let feature_degree = positive("feature_degree", &mut self.feature_degree, 1);
        let predictor_steps = positive("predictor_steps", &mut self.predictor_steps, OptimizerSettings::default().steps);

        let alpha = *self.alpha.get_or_insert(defaults.learning_rate);
        if !(alpha > 0.0 && alpha.is_finite()) {
            problems.push(format!("{}: must be positive, got {alpha}", at("alpha")));
        }
        let decay = match (self.decay_factor, self.decay_period) {
            (None, None) => {
                self.decay_factor = Some(1.0);
                self.decay_period = Some(1);
                None
            }
            (factor, period) => {
                let factor = *self.decay_factor.get_or_insert(factor.unwrap_or(1.0));
                let period = *self.decay_period.get_or_insert(period.unwrap_or(1));
                if !(factor > 0.0 && factor <= 1.0) {
                    problems.push(format!("{}: must lie in (0, 1], got {factor}", at("decay_factor")));
                }
                if period == 0 {
                    problems.push(format!("{}: must be at least 1", at("decay_period")));
                }
                (factor < 1.0).then_some(LearningRateDecay { factor, period })
            }
        };
        let weight_clip = match *self.weight_clip.get_or_insert(0.0) {
            0.0 => None,
            clip if clip > 1.0 && clip.is_finite() => Some(clip),
            clip => {
                problems.push(format!("{}: must exceed 1 (or be 0 for no clipping), got {clip}", at("weight_clip")));
                None
            }
        };

        let init = match (&self.init_theta, self.init_examples) {
            (Some(_), Some(_)) => {
                problems.push(format!("{}: `init_theta` and `init_examples` are mutually exclusive", at("init_examples")));
                Initialization::Theta(Vec::new())
            }
            (Some(theta), None) => {
                if theta.iter().any(|v| !v.is_finite()) {
                    problems.push(format!("{}: values must be finite", at("init_theta")));
                }
                Initialization::Theta(theta.clone())
            }
            (None, Some(0)) => {
                problems.push(format!("{}: must be at least 1", at("init_examples")));
                Initialization::Bootstrap { examples: 0 }
            }
            (None, Some(n)) => Initialization::Bootstrap { examples: n },
            (None, None) => Initialization::Theta(Vec::new()),
        };

        let include_group = *self.include_group.get_or_insert(false);
        let standardize = *self
            .standardize
            .get_or_insert(environment.as_ref().map(EnvironmentSpec::is_dataset).unwrap_or(false));

        let ridge = *self.predictor_ridge.get_or_insert(0.0);
        if !(ridge >= 0.0 && ridge.is_finite()) {
            problems.push(format!("{}: must be >= 0, got {ridge}", at("predictor_ridge")));
        }
        let rate = *self.predictor_rate.get_or_insert(OptimizerSettings::default().rate);
        if !(rate > 0.0 && rate.is_finite()) {
            problems.push(format!("{}: must be positive, got {rate}", at("predictor_rate")));
        }

        let optimal_benefit = match self.optimal_benefit.get_or_insert_with(|| "none".into()).as_str() {
            "none" => None,
            other => match parse_benefit(other) {
                Some(b) => Some(b),
                None => {
                    problems.push(format!(
                        "{}: expected `none`, `demographic_parity` or `equal_opportunity`, got `{other}`",
                        at("optimal_benefit")
                    ));
                    None
                }
            },
        };

        let benefit = *self.benefit.get_or_insert(defaults.benefit);
        let sequence_mode = *self.sequence_mode.get_or_insert(defaults.sequence_mode);
        let normalization = *self.normalization.get_or_insert(defaults.normalization);
        let exact_inner_expectation = *self.exact_inner_expectation.get_or_insert(defaults.exact_inner_expectation);
        let penalty_estimate = *self.penalty_estimate.get_or_insert(defaults.penalty_estimate);
        if penalty_estimate == PenaltyEstimate::CrossFit && minibatch < 2 && lambdas.iter().any(|&l| l > 0.0) {
            problems.push(format!("{}: cross-fit penalty estimates need a minibatch of at least 2", at("minibatch")));
        }
        let output_raw = self.output.get_or_insert_with(|| PathBuf::from("results.csv")).clone();
        let output = resolve_relative(&source.path, &output_raw);

        if !problems.is_empty() {
            return Err(CliError::Config(problems.join("\n")));
        }
        let experiment = ExperimentConfig {
            cost,
            lambda,
            timesteps,
            decisions,
            iterations,
            minibatch,
            learning_rate: alpha,
            decay,
            benefit,
            sequence_mode,
            normalization,
            weight_clip,
            exact_inner_expectation,
            penalty_estimate,
            seed: 0,
        };
        Ok(RunConfig {
            environment: environment.expect("validated above"),
            strategies,
            seeds,
            lambdas,
            experiment,
            init,
            features: FeatureSettings {
                degree: feature_degree,
                include_group,
                standardize,
            },
            predictor: TrainSpec {
                optimizer: OptimizerSettings {
                    steps: predictor_steps,
                    rate,
                    minibatch: None,
                },
                ridge,
                ..Default::default()
            },
            optimal_benefit,
            test_size,
            output,
            resolved: self,
        })
    }
}

/// Read, decode and resolve a run configuration file.
pub fn load_run_config(path: &Path) -> Result<RunConfig, CliError> {
    resolve_source(Source::read(path)?)
}

/// Resolve configuration text as if it were read from `path`.
pub fn parse_run_config(path: &Path, text: &str) -> Result<RunConfig, CliError> {
    resolve_source(Source::parse(path, text.to_string())?)
}

fn resolve_source(source: Source) -> Result<RunConfig, CliError> {
    let mut problems = Vec::new();
    source.check_keys(RUN_KEYS, &mut problems);
    if !problems.is_empty() {
        return Err(CliError::Config(problems.join("\n")));
    }
    let raw: RawConfig = source.decode()?;
    raw.resolve(&source)
}

/// The resolved configuration as TOML, every default spelled out.
pub fn echo(config: &RunConfig) -> String {
    toml::to_string(&config.resolved).expect("resolved configuration serializes")
}
