//! Episode loop, policy contract and regret accounting.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::RssModel;
use crate::{Error, Result};

/// 1-based beam index into the codebook.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BeamIndex(pub usize);

impl BeamIndex {
    pub fn get(self) -> usize {
        self.0
    }
}

/// One slot's measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: usize,
    pub beam: BeamIndex,
    pub reward: f64,
    pub rss_dbm: f64,
}

/// Sequential beam selection policy.
///
/// `select` is called once per slot and must be deterministic given the
/// policy state and its RNG stream; `update` is called exactly once with
/// that slot's observation. A policy that commits early reports its choice
/// through `finished`; `final_beam` is the answer when the horizon expires
/// first (policies without a better notion return `None` and the episode
/// falls back to the most-selected beam).
pub trait Policy {
    fn select(&mut self, t: usize, rng: &mut ChaCha8Rng) -> BeamIndex;
    fn update(&mut self, obs: &Observation);
    fn finished(&self) -> Option<BeamIndex> {
        None
    }
    fn final_beam(&self) -> Option<BeamIndex> {
        None
    }
}

/// Selections and rewards of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub observations: Vec<Observation>,
    /// Slot at which the policy reported completion, if it did.
    pub terminated_at: Option<usize>,
    pub final_beam: BeamIndex,
}

impl RunTrace {
    /// Number of beam measurements spent.
    pub fn n_measurements(&self) -> usize {
        self.observations.len()
    }
}

/// Runs one episode of up to `horizon` slots: select, measure, update,
/// stopping early once the policy commits to a beam.
pub fn run_episode(
    env: &RssModel,
    policy: &mut dyn Policy,
    horizon: usize,
    env_rng: &mut ChaCha8Rng,
    policy_rng: &mut ChaCha8Rng,
) -> Result<RunTrace> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be >= 1".into()));
    }
    let n_beams = env.n_beams();
    let mut observations = Vec::new();
    let mut terminated_at = None;
    for t in 1..=horizon {
        let beam = policy.select(t, policy_rng);
        if beam.get() < 1 || beam.get() > n_beams {
            return Err(Error::ProtocolViolation(format!(
                "policy selected beam {} outside 1..={n_beams}",
                beam.get()
            )));
        }
        let rss_dbm = env.sample_rss_dbm(beam.get(), env_rng)?;
        let obs = Observation {
            t,
            beam,
            reward: env.normalize_reward(rss_dbm),
            rss_dbm,
        };
        policy.update(&obs);
        observations.push(obs);
        if policy.finished().is_some() {
            terminated_at = Some(t);
            break;
        }
    }
    let final_beam = policy
        .finished()
        .or_else(|| policy.final_beam())
        .unwrap_or_else(|| most_selected(&observations));
    Ok(RunTrace {
        observations,
        terminated_at,
        final_beam,
    })
}

fn most_selected(observations: &[Observation]) -> BeamIndex {
    let mut counts = std::collections::HashMap::new();
    for obs in observations {
        *counts.entry(obs.beam).or_insert(0usize) += 1;
    }
    counts
        .into_iter()
        .max_by_key(|&(beam, count)| (count, std::cmp::Reverse(beam)))
        .map(|(beam, _)| beam)
        .expect("episode has at least one observation")
}

/// Per-slot cumulative regret of a trace against the clean mean-reward
/// landscape: partial sums of the selected beam's gap to the best beam.
pub fn cumulative_regret(trace: &RunTrace, mean_rewards: &[f64]) -> Result<Vec<f64>> {
    if trace.observations.is_empty() {
        return Err(Error::InvalidConfig("trace is empty".into()));
    }
    let best = mean_rewards
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut series = Vec::with_capacity(trace.observations.len());
    let mut acc = 0.0;
    for obs in &trace.observations {
        let mean = mean_rewards.get(obs.beam.get() - 1).ok_or_else(|| {
            Error::ProtocolViolation(format!(
                "beam {} outside mean-reward table of length {}",
                obs.beam.get(),
                mean_rewards.len()
            ))
        })?;
        acc += best - mean;
        series.push(acc);
    }
    Ok(series)
}

/// Extends a regret series to `horizon` slots by charging the committed
/// beam's gap for every remaining slot.
pub fn extend_regret_to_horizon(
    series: &[f64],
    final_beam: BeamIndex,
    mean_rewards: &[f64],
    horizon: usize,
) -> Vec<f64> {
    let best = mean_rewards
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let gap = best - mean_rewards[final_beam.get() - 1];
    let mut out = series.to_vec();
    let mut acc = out.last().copied().unwrap_or(0.0);
    while out.len() < horizon {
        acc += gap;
        out.push(acc);
    }
    out.truncate(horizon);
    out
}
