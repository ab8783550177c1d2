//! Lending sweep: collect under a score cutoff `1[x > ξ]`, fit a
//! cross-validated logistic predictor on the labeled applicants, and
//! evaluate the threshold rule `1[Q(y|x) ≥ c]` on a fresh sample.

use crate::config::Source;
use crate::presets::{self, Preset};
use crate::{fmt_float, CliError};
use conseq::environments::{collect_from, make_score_table_env, Environment, LabeledExample, ScoreTableSpec};
use conseq::metrics::{evaluate, EvalSample};
use conseq::policies::{FeatureMap, Policy};
use conseq::predictors::{train_cv, train_mle, OptimizerSettings, TrainSpec};
use conseq::rng::{derive_rng, Streams};
use conseq::{Diagnostic, Diagnostics};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const LENDING_KEYS: &[&str] = &[
    "environment",
    "score_table",
    "group_weights",
    "thresholds",
    "samples_per_threshold",
    "eval_size",
    "cost",
    "folds",
    "ridge_grid",
    "predictor_steps",
    "predictor_rate",
    "seed",
    "output",
];

pub const CSV_HEADER: [&str; 6] = ["xi", "utility", "dp_violation", "eop_violation", "labeled", "no_labels"];

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct RawLendingConfig {
    environment: Option<String>,
    score_table: Option<PathBuf>,
    group_weights: Option<[f64; 2]>,
    thresholds: Option<Vec<i64>>,
    samples_per_threshold: Option<usize>,
    eval_size: Option<usize>,
    cost: Option<f64>,
    folds: Option<usize>,
    ridge_grid: Option<Vec<f64>>,
    predictor_steps: Option<usize>,
    predictor_rate: Option<f64>,
    seed: Option<u64>,
    output: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct LendingSweepConfig {
    pub table: ScoreTableSpec,
    /// Integer score cutoffs ξ.
    pub thresholds: Vec<i64>,
    pub samples_per_threshold: usize,
    pub eval_size: usize,
    pub cost: f64,
    /// Ridge grid and fold count of the predictor's cross-validation.
    pub predictor: TrainSpec,
    pub seed: u64,
    pub output: PathBuf,
}

impl LendingSweepConfig {
    pub fn new(table: ScoreTableSpec, thresholds: Vec<i64>) -> Self {
        Self {
            table,
            thresholds,
            samples_per_threshold: 10_000,
            eval_size: 1_000_000,
            cost: 0.7,
            predictor: TrainSpec {
                grid: TrainSpec::default_grid(),
                folds: 5,
                ..Default::default()
            },
            seed: 0,
            output: PathBuf::from("lending.csv"),
        }
    }
}

pub fn load_lending_config(path: &Path) -> Result<LendingSweepConfig, CliError> {
    let source = Source::read(path)?;
    let mut problems = Vec::new();
    source.check_keys(LENDING_KEYS, &mut problems);
    if !problems.is_empty() {
        return Err(CliError::Config(problems.join("\n")));
    }
    let raw: RawLendingConfig = source.decode()?;
    let at = |key: &str| source.locate(key);
    let base = path.parent().unwrap_or(Path::new("."));

    let table = match (&raw.environment, &raw.score_table) {
        (Some(_), Some(_)) => {
            problems.push(format!("{}: `environment` and `score_table` are mutually exclusive", at("score_table")));
            None
        }
        (Some(name), None) => match name.parse::<Preset>() {
            Ok(Preset::ScoreTableStandin) => {
                let mut t = presets::score_table_standin();
                if let Some(w) = raw.group_weights {
                    t.group_weights = w;
                }
                Some(t)
            }
            Ok(other) => {
                problems.push(format!("{}: `{other}` is not a score table", at("environment")));
                None
            }
            Err(e) => {
                problems.push(format!("{}: {e}", at("environment")));
                None
            }
        },
        (None, Some(p)) => {
            let p = if p.is_absolute() { p.clone() } else { base.join(p) };
            match raw.group_weights {
                None => {
                    problems.push(format!("{}: `group_weights` is required with `score_table`", at("score_table")));
                    None
                }
                Some(_) if !p.is_file() => {
                    problems.push(format!("{}: file {} does not exist", at("score_table"), p.display()));
                    None
                }
                Some(w) => Some(ScoreTableSpec::from_path(&p, w).map_err(|e| match CliError::from(e) {
                    CliError::Config(m) | CliError::Ingest(m) => CliError::Ingest(format!("{}: {m}", p.display())),
                    other => other,
                })?),
            }
        }
        (None, None) => {
            problems.push(format!("{}: one of `environment` or `score_table` is required", path.display()));
            None
        }
    };
    if let Some(t) = &table {
        if let Err(e) = t.validate() {
            problems.push(format!("{}: {e}", at("group_weights")));
        }
    }

    let thresholds = raw.thresholds.clone().unwrap_or_default();
    if raw.thresholds.is_none() {
        problems.push(format!("{}: `thresholds` is required", path.display()));
    } else if thresholds.is_empty() {
        problems.push(format!("{}: at least one threshold is required", at("thresholds")));
    }
    let cost = raw.cost.unwrap_or(0.7);
    if !(cost > 0.0 && cost < 1.0) {
        problems.push(format!("{}: must lie in (0, 1), got {cost}", at("cost")));
    }
    for (key, v) in [
        ("samples_per_threshold", raw.samples_per_threshold),
        ("eval_size", raw.eval_size),
        ("predictor_steps", raw.predictor_steps),
    ] {
        if v == Some(0) {
            problems.push(format!("{}: must be at least 1", at(key)));
        }
    }
    let folds = raw.folds.unwrap_or(5);
    if folds < 2 {
        problems.push(format!("{}: must be at least 2", at("folds")));
    }
    let grid = raw.ridge_grid.clone().unwrap_or_else(TrainSpec::default_grid);
    if grid.is_empty() || grid.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
        problems.push(format!("{}: needs finite values >= 0", at("ridge_grid")));
    }
    let rate = raw.predictor_rate.unwrap_or(OptimizerSettings::default().rate);
    if !(rate > 0.0 && rate.is_finite()) {
        problems.push(format!("{}: must be positive, got {rate}", at("predictor_rate")));
    }
    if !problems.is_empty() {
        return Err(CliError::Config(problems.join("\n")));
    }
    let mut defaults = LendingSweepConfig::new(table.expect("validated above"), thresholds);
    let output = raw.output.clone().unwrap_or(defaults.output.clone());
    defaults.samples_per_threshold = raw.samples_per_threshold.unwrap_or(defaults.samples_per_threshold);
    defaults.eval_size = raw.eval_size.unwrap_or(defaults.eval_size);
    defaults.cost = cost;
    defaults.predictor = TrainSpec {
        optimizer: OptimizerSettings {
            steps: raw.predictor_steps.unwrap_or(OptimizerSettings::default().steps),
            rate,
            minibatch: None,
        },
        grid,
        folds,
        ..Default::default()
    };
    defaults.seed = raw.seed.unwrap_or(0);
    defaults.output = if output.is_absolute() { output } else { base.join(output) };
    Ok(defaults)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub xi: i64,
    pub utility: f64,
    pub dp_violation: f64,
    pub eop_violation: f64,
    pub labeled: usize,
    /// The collection produced no labels and the row reports the
    /// always-reject policy.
    pub no_labels: bool,
}

pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub diagnostics: Diagnostics,
}

pub fn lending_sweep(config: &LendingSweepConfig) -> Result<SweepOutcome, CliError> {
    let env = make_score_table_env(config.table.clone())?;
    let Environment::ScoreTable(table_env) = &env else {
        unreachable!("make_score_table_env returns a score-table environment")
    };
    let (lo, hi) = table_env.domain();
    let test = EvalSample::draw(&env, config.eval_size, &mut Streams::new(config.seed).test_set())?;
    let mut diagnostics = Diagnostics::default();
    let mut rows = Vec::with_capacity(config.thresholds.len());
    for &xi in &config.thresholds {
        if xi < lo || xi > hi {
            log::warn!("threshold {xi} lies outside the score domain [{lo}, {hi}]");
        }
        let mut rng = derive_rng("lending", &[config.seed, xi as u64]);
        let proposals = env.sample_individuals(config.samples_per_threshold, &mut rng)?;
        let cutoff = Policy::Cutoff {
            feature: 0,
            cutoff: xi as f64,
        };
        let collected = collect_from(&env, &cutoff, &proposals, 0, &mut rng);
        let labeled: Vec<LabeledExample> = collected.labeled.into_iter().map(|p| p.example).collect();
        let policy = if labeled.is_empty() {
            diagnostics.push(Diagnostic::NoLabels { threshold: xi as f64 });
            Policy::Constant(0.0)
        } else {
            let fmap = FeatureMap::default().with_standardization(FeatureMap::fit_standardization(&labeled));
            let predictor = if labeled.len() < config.predictor.folds {
                // Too few labels to fill the folds: the strongest ridge in the grid.
                let ridge = config.predictor.grid.iter().copied().fold(0.0, f64::max);
                log::warn!("threshold {xi}: {} labels, fitting without cross-validation at ridge {ridge}", labeled.len());
                let spec = TrainSpec {
                    ridge,
                    grid: Vec::new(),
                    ..config.predictor.clone()
                };
                let fit = train_mle(&labeled, &fmap, &spec, &mut rng)?;
                diagnostics.extend(fit.diagnostics);
                fit.value
            } else {
                let cv = train_cv(&labeled, &fmap, &config.predictor, &mut rng)?;
                diagnostics.extend(cv.diagnostics);
                cv.predictor
            };
            Policy::threshold(predictor, fmap, config.cost)
        };
        let e = evaluate(&policy, &test, config.cost)?;
        rows.push(SweepRow {
            xi,
            utility: e.utility,
            dp_violation: e.dp_violation(),
            eop_violation: e.eop_violation(),
            labeled: labeled.len(),
            no_labels: labeled.is_empty(),
        });
    }
    Ok(SweepOutcome { rows, diagnostics })
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Ingest(format!("writing CSV: {e}"));
    w.write_record(CSV_HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.xi.to_string(),
            fmt_float(r.utility),
            fmt_float(r.dp_violation),
            fmt_float(r.eop_violation),
            r.labeled.to_string(),
            r.no_labels.to_string(),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Ingest(format!("writing CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}
