//! Comparison policies: 802.11ad exhaustive sweep, UCB, HOO and
//! hill-climbing over the cyclic beam graph.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::bandit::{BeamIndex, Observation, Policy};
use crate::hba::{HbaConfig, HbaPolicy};
use crate::Result;

/// Scans every beam once, then commits to the best observed sample.
#[derive(Debug, Clone)]
pub struct ExhaustivePolicy {
    n_beams: usize,
    rewards: Vec<Option<f64>>,
    done: Option<BeamIndex>,
}

impl ExhaustivePolicy {
    pub fn new(n_beams: usize) -> Self {
        Self {
            n_beams,
            rewards: vec![None; n_beams],
            done: None,
        }
    }
}

impl Policy for ExhaustivePolicy {
    fn select(&mut self, t: usize, _rng: &mut ChaCha8Rng) -> BeamIndex {
        BeamIndex((t - 1) % self.n_beams + 1)
    }

    fn update(&mut self, obs: &Observation) {
        self.rewards[obs.beam.get() - 1] = Some(obs.reward);
        if self.rewards.iter().all(|r| r.is_some()) && self.done.is_none() {
            let best = self
                .rewards
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.unwrap().total_cmp(&b.1.unwrap()))
                .map(|(i, _)| i + 1)
                .unwrap();
            self.done = Some(BeamIndex(best));
        }
    }

    fn finished(&self) -> Option<BeamIndex> {
        self.done
    }
}

/// Classic per-beam UCB with confidence margin
/// `eta * sqrt(2 ln t / N_b)`; plays every beam once first, ties broken
/// uniformly at random.
#[derive(Debug, Clone)]
pub struct UcbPolicy {
    learning_rate: f64,
    counts: Vec<u64>,
    means: Vec<f64>,
}

impl UcbPolicy {
    pub fn new(n_beams: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            counts: vec![0; n_beams],
            means: vec![0.0; n_beams],
        }
    }

    pub fn index(&self, beam: usize, t: usize) -> f64 {
        let n = self.counts[beam - 1];
        if n == 0 {
            return f64::INFINITY;
        }
        self.means[beam - 1] + self.learning_rate * (2.0 * (t as f64).ln() / n as f64).sqrt()
    }
}

impl Default for UcbPolicy {
    fn default() -> Self {
        Self::new(128, 0.2)
    }
}

/// Picks the argmax of `f` over `candidates`, exact ties resolved
/// uniformly at random.
fn argmax_random_tie<R: Rng + ?Sized>(
    candidates: impl Iterator<Item = usize>,
    f: impl Fn(usize) -> f64,
    rng: &mut R,
) -> usize {
    let mut best = Vec::new();
    let mut best_val = f64::NEG_INFINITY;
    for c in candidates {
        let v = f(c);
        if v > best_val {
            best_val = v;
            best.clear();
            best.push(c);
        } else if v == best_val {
            best.push(c);
        }
    }
    best[rng.random_range(0..best.len())]
}

impl Policy for UcbPolicy {
    fn select(&mut self, t: usize, rng: &mut ChaCha8Rng) -> BeamIndex {
        let n = self.counts.len();
        if t <= n {
            return BeamIndex(t);
        }
        BeamIndex(argmax_random_tie(1..=n, |b| self.index(b, t), rng))
    }

    fn update(&mut self, obs: &Observation) {
        let i = obs.beam.get() - 1;
        self.counts[i] += 1;
        let n = self.counts[i] as f64;
        self.means[i] = ((n - 1.0) * self.means[i] + obs.reward) / n;
    }
}

/// Tree search identical to [`HbaPolicy`] except that the confidence
/// margin is `eta_h * sqrt(2 ln t / N)` (no fluctuation prior) and the
/// smoothness constant is `c1`.
#[derive(Debug, Clone, Copy)]
pub struct HooConfig {
    pub eta_h: f64,
    pub c1: f64,
    pub gamma: f64,
    pub zeta: f64,
    pub n_beams: usize,
}

impl HooConfig {
    pub fn new(n_beams: usize) -> Self {
        Self {
            eta_h: 0.1,
            c1: 3.0,
            gamma: 0.5,
            zeta: 0.1,
            n_beams,
        }
    }
}

/// Builds the HOO policy. `eta_h * sqrt(2 ln t / N)` equals the prior
/// margin `sqrt(2 sigma^2 ln t / N)` with `sigma^2 = eta_h^2`, so HOO is
/// the same tree machinery with a substituted variance constant.
pub fn hoo_policy(config: HooConfig) -> Result<HbaPolicy> {
    HbaPolicy::new(HbaConfig {
        rho1: config.c1,
        gamma: config.gamma,
        zeta: config.zeta,
        sigma_sq: config.eta_h * config.eta_h,
        n_beams: config.n_beams,
    })
}

/// Hill climber on the cyclic beam graph: keeps a leader beam, plays UCB
/// over the leader and its two neighbors, and hands the lead to any played
/// beam whose empirical mean beats the leader's.
#[derive(Debug, Clone)]
pub struct UbaPolicy {
    learning_rate: f64,
    counts: Vec<u64>,
    means: Vec<f64>,
    leader: Option<usize>,
    leader_history: Vec<usize>,
}

impl UbaPolicy {
    pub fn new(n_beams: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            counts: vec![0; n_beams],
            means: vec![0.0; n_beams],
            leader: None,
            leader_history: Vec::new(),
        }
    }

    pub fn leader(&self) -> Option<usize> {
        self.leader
    }

    /// Leader beam after every slot, for trajectory assertions.
    pub fn leader_history(&self) -> &[usize] {
        &self.leader_history
    }

    fn neighbors(&self, beam: usize) -> [usize; 3] {
        let n = self.counts.len();
        let left = if beam == 1 { n } else { beam - 1 };
        let right = if beam == n { 1 } else { beam + 1 };
        [left, beam, right]
    }

    fn index(&self, beam: usize, t: usize) -> f64 {
        let n = self.counts[beam - 1];
        if n == 0 {
            return f64::INFINITY;
        }
        self.means[beam - 1] + self.learning_rate * (2.0 * (t as f64).ln() / n as f64).sqrt()
    }

    fn mean_or_neg_inf(&self, beam: usize) -> f64 {
        if self.counts[beam - 1] == 0 {
            f64::NEG_INFINITY
        } else {
            self.means[beam - 1]
        }
    }
}

impl Policy for UbaPolicy {
    fn select(&mut self, t: usize, rng: &mut ChaCha8Rng) -> BeamIndex {
        let leader = *self
            .leader
            .get_or_insert_with(|| rng.random_range(1..=self.counts.len()));
        let candidates = self.neighbors(leader);
        BeamIndex(argmax_random_tie(
            candidates.into_iter(),
            |b| self.index(b, t),
            rng,
        ))
    }

    fn update(&mut self, obs: &Observation) {
        let i = obs.beam.get() - 1;
        self.counts[i] += 1;
        let n = self.counts[i] as f64;
        self.means[i] = ((n - 1.0) * self.means[i] + obs.reward) / n;
        let leader = self.leader.expect("update before first select");
        if self.mean_or_neg_inf(obs.beam.get()) > self.mean_or_neg_inf(leader) {
            self.leader = Some(obs.beam.get());
        }
        self.leader_history.push(self.leader.unwrap());
    }
}
