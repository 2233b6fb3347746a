//! Command-line front end for the beam-alignment simulation harness.
//!
//! Exit codes: 0 success, 1 configuration error, 2 validation failure,
//! 3 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hba_sim::harness::{
    run_monte_carlo, run_sweep, validate::validation_suite, Algorithm, ExperimentConfig,
    MetricsSummary, OutputFormat, SweepConfig,
};
use hba_sim::latency::{exhaustive_latency, learning_latency};
use hba_sim::Error;

#[derive(Parser)]
#[command(
    name = "hba-sim",
    about = "Monte-Carlo simulator for hierarchical beam alignment and baselines",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// INI-style experiment config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of Monte-Carlo runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Write results here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Comma-separated subset of hba,hoo,ucb,uba,exhaustive.
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<String>>,
    /// Worker thread count (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one Monte-Carlo experiment and emit aggregate metrics.
    Run(CommonOpts),
    /// Run every grid point of the config's [sweep] section.
    Sweep(CommonOpts),
    /// Report beam-training completion times for the configured setup.
    Latency {
        #[command(flatten)]
        common: CommonOpts,
        /// Measurement budgets to price for the learning policies.
        #[arg(long, value_delimiter = ',', default_value = "100")]
        measurements: Vec<usize>,
    },
    /// Run the randomized self-check suites.
    Validate {
        #[command(flatten)]
        common: CommonOpts,
        /// Random cases per property.
        #[arg(long, default_value_t = 100)]
        cases: usize,
    },
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::InvalidConfig(_) => ExitCode::from(1),
        Error::ProtocolViolation(_) => ExitCode::from(2),
        Error::Io { .. } => ExitCode::from(3),
    }
}

fn load_config(common: &CommonOpts) -> Result<(ExperimentConfig, SweepConfig), Error> {
    let (mut config, sweep) = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
            (
                ExperimentConfig::from_ini(&text)?,
                SweepConfig::from_ini(&text)?,
            )
        }
        None => (ExperimentConfig::default(), SweepConfig::default()),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(runs) = common.runs {
        config.n_runs = runs;
    }
    if let Some(algorithms) = &common.algorithms {
        config.algorithms = algorithms
            .iter()
            .map(|s| s.parse::<Algorithm>())
            .collect::<Result<_, _>>()?;
    }
    config.validate()?;
    Ok((config, sweep))
}

fn install_thread_pool(threads: Option<usize>) -> Result<(), Error> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::InvalidConfig("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("could not size thread pool: {e}")))?;
    }
    Ok(())
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_run(common: &CommonOpts) -> Result<(), Error> {
    let (config, _) = load_config(common)?;
    let format: OutputFormat = common.format.parse()?;
    install_thread_pool(common.threads)?;
    let summary = run_monte_carlo(&config)?;
    emit(&summary.render(format), &common.out)
}

fn cmd_sweep(common: &CommonOpts) -> Result<(), Error> {
    let (config, sweep) = load_config(common)?;
    let format: OutputFormat = common.format.parse()?;
    install_thread_pool(common.threads)?;
    let results = run_sweep(&config, &sweep)?;
    let text = match format {
        OutputFormat::Json => {
            let labeled: Vec<serde_json::Value> = results
                .iter()
                .map(|(label, summary)| {
                    serde_json::json!({ "point": label, "summary": summary })
                })
                .collect();
            serde_json::to_string_pretty(&labeled).expect("sweep serializes") + "\n"
        }
        OutputFormat::Csv => {
            // prefix each point's rows with its grid label
            let mut out = String::from("point,algorithm,metric,index,value,p05,p95\n");
            for (label, summary) in &results {
                for line in summary.to_csv().lines().skip(1) {
                    out.push_str(label);
                    out.push(',');
                    out.push_str(line);
                    out.push('\n');
                }
            }
            out
        }
    };
    emit(&text, &common.out)
}

fn cmd_latency(common: &CommonOpts, measurements: &[usize]) -> Result<(), Error> {
    let (config, _) = load_config(common)?;
    let format: OutputFormat = common.format.parse()?;
    let sweep_result = exhaustive_latency(config.n_beams, config.n_users, &config.protocol)?;
    let mut summary = MetricsSummary {
        seed: config.seed,
        n_runs: 0,
        horizon: 0,
        algorithms: vec![],
    };
    summary.algorithms.push(hba_sim::harness::AlgorithmSummary {
        algorithm: "exhaustive".into(),
        regret_curve: vec![],
        measurements_mean: (2 * config.n_beams) as f64,
        measurements_p05: (2 * config.n_beams) as f64,
        measurements_p95: (2 * config.n_beams) as f64,
        accuracy: f64::NAN,
        latency_ms_mean: sweep_result.total_ms,
    });
    for &m in measurements {
        let result = learning_latency(m, config.n_users, &config.protocol)?;
        summary.algorithms.push(hba_sim::harness::AlgorithmSummary {
            algorithm: format!("learning_m{m}"),
            regret_curve: vec![],
            measurements_mean: m as f64,
            measurements_p05: m as f64,
            measurements_p95: m as f64,
            accuracy: f64::NAN,
            latency_ms_mean: result.total_ms,
        });
    }
    let text = match format {
        OutputFormat::Json => summary.to_json() + "\n",
        OutputFormat::Csv => summary.to_csv(),
    };
    emit(&text, &common.out)
}

fn cmd_validate(common: &CommonOpts, cases: usize) -> Result<bool, Error> {
    let (config, _) = load_config(common)?;
    if cases == 0 {
        return Err(Error::InvalidConfig("--cases must be >= 1".into()));
    }
    install_thread_pool(common.threads)?;
    let report = validation_suite(&config, cases)?;
    emit(&report.render(), &common.out)?;
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help and version requests are successes, bad flags are
            // configuration errors
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match &cli.command {
        Command::Run(common) => cmd_run(common).map(|()| true),
        Command::Sweep(common) => cmd_sweep(common).map(|()| true),
        Command::Latency {
            common,
            measurements,
        } => cmd_latency(common, measurements).map(|()| true),
        Command::Validate { common, cases } => cmd_validate(common, *cases),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}
