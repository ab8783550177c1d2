use clap::{Parser, Subcommand, ValueEnum};
use conseq::learning::BenefitKind;
use conseq_cli::aggregate::{aggregate_files, expand_glob, DEFAULT_QUANTILES};
use conseq_cli::config::{echo, load_run_config};
use conseq_cli::lending::{lending_sweep, load_lending_config, sweep_csv};
use conseq_cli::oracle_cmd::oracle_report;
use conseq_cli::run::run_experiment;
use conseq_cli::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "conseq", version, about = "Learn decision policies under selective labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Benefit {
    DemographicParity,
    EqualOpportunity,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (strategy, seed, λ) cell of a configuration.
    Run {
        config: PathBuf,
        /// Metrics CSV path; overrides `output` in the configuration.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Median and quantiles across seeds of run CSVs matching a glob.
    Aggregate {
        pattern: String,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_QUANTILES)]
        quantiles: Vec<f64>,
    },
    /// Utility of threshold rules after collection under score cutoffs.
    LendingSweep {
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Exact value of a policy on a discrete environment.
    Oracle {
        env_file: PathBuf,
        policy_file: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        cost: f64,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, value_enum, default_value_t = Benefit::DemographicParity)]
        benefit: Benefit,
    },
    /// Resolve a run configuration and print it with every default.
    Validate { config: PathBuf },
}

fn write(path: &std::path::Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, output } => {
            let config = load_run_config(&config)?;
            let outputs = run_experiment(&config, output.as_deref())?;
            println!("{}", outputs.metrics.display());
        }
        Command::Aggregate {
            pattern,
            output,
            quantiles,
        } => {
            let files = expand_glob(&pattern)?;
            write(&output, &aggregate_files(&files, &quantiles)?)?;
            println!("{}", output.display());
        }
        Command::LendingSweep { config, output } => {
            let config = load_lending_config(&config)?;
            let outcome = lending_sweep(&config)?;
            let path = output.unwrap_or(config.output.clone());
            write(&path, &sweep_csv(&outcome.rows)?)?;
            println!("{}", path.display());
        }
        Command::Oracle {
            env_file,
            policy_file,
            cost,
            lambda,
            benefit,
        } => {
            let benefit = match benefit {
                Benefit::DemographicParity => BenefitKind::DemographicParity,
                Benefit::EqualOpportunity => BenefitKind::EqualOpportunity,
            };
            print!("{}", oracle_report(&env_file, &policy_file, cost, lambda, benefit)?);
        }
        Command::Validate { config } => {
            print!("{}", echo(&load_run_config(&config)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
