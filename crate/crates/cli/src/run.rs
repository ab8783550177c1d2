//! Multi-seed, multi-strategy, λ-sweep execution and CSV emission.

use crate::config::{EnvironmentSpec, RunConfig};
use crate::presets::{self, Preset};
use crate::{fmt_float, CliError};
use conseq::environments::{
    make_empirical_env, make_score_table_env, make_synthetic_env, Dataset, Environment, ScoreTableSpec,
};
use conseq::learning::{consequential_learning, ExperimentConfig, Initialization, RunSetup, Strategy};
use conseq::metrics::{EvalSample, MetricsRecord};
use conseq::oracle::{DiscreteEnv, DiscretePoint};
use conseq::policies::{FeatureMap, PolicyRecord};
use conseq::rng::Streams;
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};

pub const CSV_HEADER: [&str; 9] = [
    "strategy",
    "seed",
    "lambda",
    "t",
    "utility",
    "effective_utility",
    "dp_violation",
    "eop_violation",
    "positives_collected",
];

/// Environment source loaded once and specialized per seed.
enum Source {
    Fixed(Environment),
    Dataset { data: Dataset, split_fraction: f64 },
}

fn load_source(spec: &EnvironmentSpec) -> Result<Source, CliError> {
    Ok(match spec {
        EnvironmentSpec::Preset(p) => match p {
            Preset::Setting1 | Preset::Setting2 => Source::Fixed(make_synthetic_env(p.synthetic().expect("synthetic preset"))?),
            Preset::ScoreTableStandin => Source::Fixed(make_score_table_env(presets::score_table_standin())?),
            Preset::CompasStandin => Source::Dataset {
                data: presets::compas_standin(),
                split_fraction: 0.8,
            },
        },
        EnvironmentSpec::Dataset { path, split_fraction } => Source::Dataset {
            data: Dataset::from_path(path).map_err(|e| with_path(path, e))?,
            split_fraction: *split_fraction,
        },
        EnvironmentSpec::ScoreTable { path, group_weights } => {
            let spec = ScoreTableSpec::from_path(path, *group_weights).map_err(|e| with_path(path, e))?;
            Source::Fixed(make_score_table_env(spec).map_err(|e| with_path(path, e))?)
        }
        EnvironmentSpec::Discrete { path } => Source::Fixed(Environment::Discrete(load_discrete(path)?)),
    })
}

fn with_path(path: &Path, e: conseq::Error) -> CliError {
    match CliError::from(e) {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        CliError::Ingest(m) => CliError::Ingest(format!("{}: {m}", path.display())),
        other => other,
    }
}

/// A JSON array of `{x, s, prob, p_y1}` points.
pub fn load_discrete(path: &Path) -> Result<DiscreteEnv, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let points: Vec<DiscretePoint> =
        serde_json::from_str(&text).map_err(|e| CliError::Ingest(format!("{}: {e}", path.display())))?;
    DiscreteEnv::new(points).map_err(|e| with_path(path, e))
}

/// The environment, evaluation sample and feature map of one seed.
pub struct SeedContext {
    pub env: Environment,
    pub test: EvalSample,
    pub fmap: FeatureMap,
}

fn seed_context(source: &Source, config: &RunConfig, seed: u64) -> Result<SeedContext, CliError> {
    let streams = Streams::new(seed);
    let (env, test) = match source {
        Source::Fixed(env) => {
            let test = EvalSample::draw(env, config.test_size, &mut streams.test_set())?;
            (env.clone(), test)
        }
        Source::Dataset { data, split_fraction } => {
            let env = make_empirical_env(data.clone(), *split_fraction, &mut streams.setup())?;
            let Environment::Empirical(e) = &env else {
                unreachable!("make_empirical_env returns an empirical environment")
            };
            let test = EvalSample::new(e.test_set().to_vec())?;
            (env, test)
        }
    };
    // Standardization is estimated from the training pool for datasets and
    // from the evaluation sample's features otherwise.
    let standardize = if config.features.standardize {
        match &env {
            Environment::Empirical(e) => FeatureMap::fit_standardization(e.train_pool()),
            _ => FeatureMap::fit_standardization(test.examples()),
        }
    } else {
        Vec::new()
    };
    let fmap = FeatureMap {
        degree: config.features.degree,
        include_group: config.features.include_group,
        standardize,
    };
    Ok(SeedContext { env, test, fmap })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub strategy: Strategy,
    pub seed: u64,
    pub lambda: f64,
}

pub struct CellResult {
    pub cell: Cell,
    pub metrics: Vec<MetricsRecord>,
    pub initial: PolicyRecord,
    pub final_policy: PolicyRecord,
}

#[derive(Serialize)]
struct PolicyLine<'a> {
    strategy: &'a str,
    seed: u64,
    lambda: f64,
    initial: &'a PolicyRecord,
    #[serde(rename = "final")]
    final_policy: &'a PolicyRecord,
}

/// Every (strategy, λ, seed) cell in canonical output order.
pub fn cells(config: &RunConfig) -> Vec<Cell> {
    let mut strategies = config.strategies.clone();
    strategies.sort();
    let mut lambdas = config.lambdas.clone();
    lambdas.sort_by(f64::total_cmp);
    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    let mut out = Vec::new();
    for &strategy in &strategies {
        for &lambda in &lambdas {
            for &seed in &seeds {
                out.push(Cell { strategy, seed, lambda });
            }
        }
    }
    out
}

fn run_cell(ctx: &SeedContext, config: &RunConfig, cell: Cell) -> Result<CellResult, CliError> {
    let experiment = ExperimentConfig {
        seed: cell.seed,
        lambda: cell.lambda,
        ..config.experiment.clone()
    };
    let init = match &config.init {
        Initialization::Theta(theta) if theta.is_empty() => {
            Initialization::Theta(vec![0.0; ctx.fmap.output_dim(ctx.env.feature_dim())])
        }
        other => other.clone(),
    };
    let setup = RunSetup {
        fmap: ctx.fmap.clone(),
        init,
        predictor: config.predictor.clone(),
        optimal_benefit: config.optimal_benefit,
        keep_data: false,
    };
    let out = consequential_learning(&ctx.env, cell.strategy, &experiment, &setup, &ctx.test).map_err(|e| {
        let context = format!("strategy {} seed {} lambda {}: ", cell.strategy, cell.seed, fmt_float(cell.lambda));
        match CliError::from(e) {
            CliError::Config(m) => CliError::Config(context + &m),
            CliError::Ingest(m) => CliError::Ingest(context + &m),
            CliError::Numerical(m) => CliError::Numerical(context + &m),
        }
    })?;
    for d in out.diagnostics.iter() {
        log::debug!("{} seed {} λ={}: {d}", cell.strategy, cell.seed, cell.lambda);
    }
    Ok(CellResult {
        cell,
        metrics: out.metrics.clone(),
        initial: out.policies[0].record(),
        final_policy: out.final_policy().record(),
    })
}

/// Run every cell. Results come back in canonical order regardless of
/// scheduling.
pub fn run_cells(config: &RunConfig) -> Result<Vec<CellResult>, CliError> {
    let source = load_source(&config.environment)?;
    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    let contexts: Vec<(u64, SeedContext)> = seeds
        .par_iter()
        .map(|&seed| seed_context(&source, config, seed).map(|c| (seed, c)))
        .collect::<Result<_, _>>()?;
    let cells = cells(config);
    cells
        .par_iter()
        .map(|&cell| {
            let ctx = &contexts.iter().find(|(s, _)| *s == cell.seed).expect("context per seed").1;
            run_cell(ctx, config, cell)
        })
        .collect()
}

pub fn metrics_csv(results: &[CellResult]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Ingest(format!("writing CSV: {e}"));
    w.write_record(CSV_HEADER).map_err(err)?;
    for r in results {
        for m in &r.metrics {
            w.write_record([
                r.cell.strategy.as_str().to_string(),
                r.cell.seed.to_string(),
                fmt_float(r.cell.lambda),
                m.t.to_string(),
                fmt_float(m.utility),
                fmt_float(m.effective_utility),
                fmt_float(m.dp_violation),
                fmt_float(m.eop_violation),
                m.positives_collected.to_string(),
            ])
            .map_err(err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Ingest(format!("writing CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn policies_jsonl(results: &[CellResult]) -> String {
    let mut out = String::new();
    for r in results {
        let line = PolicyLine {
            strategy: r.cell.strategy.as_str(),
            seed: r.cell.seed,
            lambda: r.cell.lambda,
            initial: &r.initial,
            final_policy: &r.final_policy,
        };
        out.push_str(&serde_json::to_string(&line).expect("policy records serialize"));
        out.push('\n');
    }
    out
}

pub fn manifest(config: &RunConfig, rows: usize) -> String {
    let value = serde_json::json!({
        "conseq_cli_version": env!("CARGO_PKG_VERSION"),
        "config": config.resolved,
        "cells": cells(config).len(),
        "rows": rows,
    });
    serde_json::to_string_pretty(&value).expect("manifest serializes") + "\n"
}

/// Paths of the three files written by a run.
pub struct RunOutputs {
    pub metrics: PathBuf,
    pub manifest: PathBuf,
    pub policies: PathBuf,
}

impl RunOutputs {
    pub fn for_csv(path: &Path) -> Self {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "results".into());
        let sibling = |suffix: &str| path.with_file_name(format!("{stem}{suffix}"));
        Self {
            metrics: path.to_path_buf(),
            manifest: sibling(".manifest.json"),
            policies: sibling(".policies.jsonl"),
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Run the experiment and write metrics, manifest and final policies.
pub fn run_experiment(config: &RunConfig, output: Option<&Path>) -> Result<RunOutputs, CliError> {
    let results = run_cells(config)?;
    let csv = metrics_csv(&results)?;
    let rows: usize = results.iter().map(|r| r.metrics.len()).sum();
    let outputs = RunOutputs::for_csv(output.unwrap_or(&config.output));
    write(&outputs.metrics, &csv)?;
    write(&outputs.manifest, &manifest(config, rows))?;
    write(&outputs.policies, &policies_jsonl(&results))?;
    log::info!("wrote {rows} rows to {}", outputs.metrics.display());
    Ok(outputs)
}
