//! Monte-Carlo experiment driver: paired runs over random channels,
//! deterministic parallel aggregation, config parsing and result emission.

pub mod config;
pub mod metrics;
pub mod validate;

pub use config::{Algorithm, ExperimentConfig, SweepConfig};
pub use metrics::{AlgorithmSummary, MetricsSummary, OutputFormat};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bandit::{cumulative_regret, extend_regret_to_horizon, run_episode, Policy};
use crate::baselines::{ExhaustivePolicy, HooConfig, UbaPolicy, UcbPolicy};
use crate::channel::{sample_channel, BeamCodebook, RssModel};
use crate::hba::{HbaConfig, HbaPolicy};
use crate::latency::{exhaustive_latency, learning_latency};
use crate::Result;

/// SplitMix64 finalizer; a cheap, well-mixed 64-bit hash.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives an independent stream seed from (master seed, run, stream).
pub fn derive_seed(master: u64, run: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(run ^ splitmix64(stream)))
}

/// Per-algorithm outcome of a single run.
struct AlgRunOutcome {
    regret_curve: Vec<f64>,
    measurements: usize,
    correct: bool,
    latency_ms: f64,
}

fn build_policy(alg: Algorithm, config: &ExperimentConfig) -> Result<Box<dyn Policy>> {
    Ok(match alg {
        Algorithm::Hba => Box::new(HbaPolicy::new(HbaConfig {
            rho1: config.rho1,
            gamma: config.gamma,
            zeta: config.zeta,
            sigma_sq: config.prior_sigma_sq(),
            n_beams: config.n_beams,
        })?),
        Algorithm::Hoo => Box::new(crate::baselines::hoo_policy(HooConfig {
            eta_h: config.eta_h,
            c1: config.rho1,
            gamma: config.gamma,
            zeta: config.zeta,
            n_beams: config.n_beams,
        })?),
        Algorithm::Ucb => Box::new(UcbPolicy::new(config.n_beams, config.eta_u)),
        Algorithm::Uba => Box::new(UbaPolicy::new(config.n_beams, config.eta_u)),
        Algorithm::Exhaustive => Box::new(ExhaustivePolicy::new(config.n_beams)),
    })
}

/// Stream ids carved out of the per-run seed space.
const STREAM_CHANNEL: u64 = 0;
const STREAM_ENV_BASE: u64 = 1000;
const STREAM_POLICY_BASE: u64 = 2000;

fn run_one(config: &ExperimentConfig, codebook: &BeamCodebook, run: u64) -> Result<Vec<AlgRunOutcome>> {
    let mut channel_rng =
        ChaCha8Rng::seed_from_u64(derive_seed(config.seed, run, STREAM_CHANNEL));
    let distance = if config.randomize_distance {
        channel_rng.random_range(5.0..=50.0)
    } else {
        config.distance_m
    };
    let array = config.array();
    let channel = sample_channel(&array, config.n_paths, distance, &mut channel_rng)?;
    let env = RssModel::from_channel(&channel, &array, codebook, config.fluctuation)?;
    let mean_rewards = env.mean_rewards();
    let optimal = env.optimal_beam();

    let mut outcomes = Vec::with_capacity(config.algorithms.len());
    for (ai, &alg) in config.algorithms.iter().enumerate() {
        let mut env_rng =
            ChaCha8Rng::seed_from_u64(derive_seed(config.seed, run, STREAM_ENV_BASE + ai as u64));
        let mut policy_rng = ChaCha8Rng::seed_from_u64(derive_seed(
            config.seed,
            run,
            STREAM_POLICY_BASE + ai as u64,
        ));
        let mut policy = build_policy(alg, config)?;
        let trace = run_episode(
            &env,
            policy.as_mut(),
            config.horizon,
            &mut env_rng,
            &mut policy_rng,
        )?;
        let series = cumulative_regret(&trace, &mean_rewards)?;
        let regret_curve =
            extend_regret_to_horizon(&series, trace.final_beam, &mean_rewards, config.horizon);
        let measurements = trace.n_measurements();
        let latency_ms = match alg {
            Algorithm::Exhaustive => {
                exhaustive_latency(config.n_beams, config.n_users, &config.protocol)?.total_ms
            }
            _ => learning_latency(measurements, config.n_users, &config.protocol)?.total_ms,
        };
        outcomes.push(AlgRunOutcome {
            regret_curve,
            measurements,
            correct: trace.final_beam.get() == optimal,
            latency_ms,
        });
    }
    Ok(outcomes)
}

/// Runs the configured experiment: every algorithm faces the same random
/// channel in each run (paired comparison) but draws its fluctuation and
/// policy randomness from independent streams. Runs execute in parallel;
/// aggregation is order-deterministic, so results do not depend on thread
/// count.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<MetricsSummary> {
    config.validate()?;
    let codebook = BeamCodebook::new(config.n_beams)?;
    let per_run: Vec<Result<Vec<AlgRunOutcome>>> = (0..config.n_runs as u64)
        .into_par_iter()
        .map(|run| run_one(config, &codebook, run))
        .collect();
    let per_run: Vec<Vec<AlgRunOutcome>> = per_run.into_iter().collect::<Result<_>>()?;

    let n = config.n_runs as f64;
    let algorithms = config
        .algorithms
        .iter()
        .enumerate()
        .map(|(ai, &alg)| {
            let mut regret_curve = vec![0.0; config.horizon];
            let mut measurements = Vec::with_capacity(per_run.len());
            let mut correct = 0usize;
            let mut latency_sum = 0.0;
            for run in &per_run {
                let outcome = &run[ai];
                for (acc, &r) in regret_curve.iter_mut().zip(&outcome.regret_curve) {
                    *acc += r;
                }
                measurements.push(outcome.measurements as f64);
                correct += outcome.correct as usize;
                latency_sum += outcome.latency_ms;
            }
            for r in &mut regret_curve {
                *r /= n;
            }
            measurements.sort_by(f64::total_cmp);
            AlgorithmSummary {
                algorithm: alg.as_str().to_string(),
                regret_curve,
                measurements_mean: measurements.iter().sum::<f64>() / n,
                measurements_p05: metrics::quantile(&measurements, 0.05),
                measurements_p95: metrics::quantile(&measurements, 0.95),
                accuracy: correct as f64 / n,
                latency_ms_mean: latency_sum / n,
            }
        })
        .collect();

    Ok(MetricsSummary {
        seed: config.seed,
        n_runs: config.n_runs,
        horizon: config.horizon,
        algorithms,
    })
}

/// Runs every grid point of a sweep and returns `(label, summary)` pairs.
pub fn run_sweep(
    base: &ExperimentConfig,
    sweep: &SweepConfig,
) -> Result<Vec<(String, MetricsSummary)>> {
    sweep
        .grid(base)
        .into_iter()
        .map(|(label, config)| Ok((label, run_monte_carlo(&config)?)))
        .collect()
}
