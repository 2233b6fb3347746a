//! Hierarchical beam search over an incrementally grown binary tree.
//!
//! The beam space is embedded in `[0, 1]` and recursively bisected. Each
//! tree node owns a region and carries visit count `N`, running mean reward
//! `R`, an optimistic per-region estimate `E` and its child-tightened bound
//! `Q`. One node is added per slot by descending along the larger child
//! `Q`; the slot's measurement is the beam at the center of the new node's
//! region. The search stops once the active region is narrower than
//! `zeta / n_beams`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{BeamIndex, Observation, Policy};
use crate::{Error, Result};

/// Search parameters. Defaults: `rho1 = 3`, `gamma = 0.5`, `zeta = 0.1`
/// and a prior reward-domain variance of `(2 / 60)^2` (2 dB of shadowing
/// mapped through the reward normalization).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HbaConfig {
    pub rho1: f64,
    pub gamma: f64,
    pub zeta: f64,
    pub sigma_sq: f64,
    pub n_beams: usize,
}

impl HbaConfig {
    pub fn new(n_beams: usize) -> Self {
        Self {
            rho1: 3.0,
            gamma: 0.5,
            zeta: 0.1,
            sigma_sq: (2.0 / 60.0) * (2.0 / 60.0),
            n_beams,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho1 <= 0.0 {
            return Err(Error::InvalidConfig("rho1 must be > 0".into()));
        }
        if !(0.0 < self.gamma && self.gamma < 1.0) {
            return Err(Error::InvalidConfig("gamma must be in (0, 1)".into()));
        }
        if !(0.0 < self.zeta && self.zeta < 1.0) {
            return Err(Error::InvalidConfig("zeta must be in (0, 1)".into()));
        }
        if self.sigma_sq < 0.0 {
            return Err(Error::InvalidConfig("sigma_sq must be >= 0".into()));
        }
        if self.n_beams < 2 {
            return Err(Error::InvalidConfig("n_beams must be >= 2".into()));
        }
        Ok(())
    }

    /// Region width below which the search terminates.
    pub fn termination_width(&self) -> f64 {
        self.zeta / self.n_beams as f64
    }
}

/// One tree node. `index` follows the `(h, j)` convention with
/// `j in 1..=2^h` (stored with wrapping arithmetic; only meaningful at
/// depths that fit in 64 bits).
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub depth: u32,
    pub index: u64,
    pub x_l: f64,
    pub x_h: f64,
    pub n_visits: u64,
    pub mean_reward: f64,
    pub e_value: f64,
    pub q_value: f64,
    pub parent: Option<usize>,
    pub children: [Option<usize>; 2],
}

impl TreeNode {
    pub fn center(&self) -> f64 {
        self.x_l + (self.x_h - self.x_l) / 2.0
    }

    pub fn width(&self) -> f64 {
        self.x_h - self.x_l
    }
}

/// Arena-backed binary search tree; the root is slot 0 and children are
/// always stored after their parent, so a reverse scan visits leaves
/// before parents.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HbaTree {
    nodes: Vec<TreeNode>,
}

impl HbaTree {
    pub fn new() -> Self {
        Self {
            nodes: vec![TreeNode {
                depth: 0,
                index: 1,
                x_l: 0.0,
                x_h: 1.0,
                n_visits: 0,
                mean_reward: 0.0,
                e_value: f64::INFINITY,
                q_value: f64::INFINITY,
                parent: None,
                children: [None, None],
            }],
        }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Q-value of a child slot; unexplored children are `+inf`.
    fn child_q(&self, parent: usize, side: usize) -> f64 {
        match self.nodes[parent].children[side] {
            Some(c) => self.nodes[c].q_value,
            None => f64::INFINITY,
        }
    }

    /// Creates the `side` child (0 = left, 1 = right) of `parent`.
    fn add_child(&mut self, parent: usize, side: usize) -> usize {
        debug_assert!(self.nodes[parent].children[side].is_none());
        let p = &self.nodes[parent];
        let mid = p.x_l + (p.x_h - p.x_l) / 2.0;
        let (x_l, x_h) = if side == 0 { (p.x_l, mid) } else { (mid, p.x_h) };
        let node = TreeNode {
            depth: p.depth + 1,
            index: p.index.wrapping_mul(2).wrapping_sub(1 - side as u64),
            x_l,
            x_h,
            n_visits: 0,
            mean_reward: 0.0,
            e_value: f64::INFINITY,
            q_value: f64::INFINITY,
            parent: Some(parent),
            children: [None, None],
        };
        let idx = self.nodes.len();
        self.nodes.push(node);
        self.nodes[parent].children[side] = Some(idx);
        idx
    }

    /// Adds one visit with reward `r` to every node on `path` (running
    /// mean update).
    fn update_stats(&mut self, path: &[usize], reward: f64) {
        for &idx in path {
            let node = &mut self.nodes[idx];
            node.n_visits += 1;
            let n = node.n_visits as f64;
            node.mean_reward = ((n - 1.0) * node.mean_reward + reward) / n;
        }
    }

    /// Refreshes every node's `E` for slot `t`, then sweeps `Q` leaf to
    /// root. Children are stored after parents, so a single reverse pass
    /// is a valid leaf-to-root order.
    fn refresh_values(&mut self, t: usize, config: &HbaConfig) {
        for node in &mut self.nodes {
            node.e_value = optimistic_value(
                node.mean_reward,
                node.n_visits,
                node.depth,
                t,
                config,
            );
        }
        for i in (0..self.nodes.len()).rev() {
            let ql = self.child_q(i, 0);
            let qr = self.child_q(i, 1);
            let node = &mut self.nodes[i];
            node.q_value = if node.n_visits == 0 {
                f64::INFINITY
            } else {
                node.e_value.min(ql.max(qr))
            };
        }
    }
}

/// Optimistic per-region estimate: `R + sqrt(2 sigma^2 ln t / N) +
/// rho1 gamma^h` for visited nodes, `+inf` otherwise.
pub fn optimistic_value(
    mean_reward: f64,
    n_visits: u64,
    depth: u32,
    t: usize,
    config: &HbaConfig,
) -> f64 {
    if n_visits == 0 {
        return f64::INFINITY;
    }
    let margin = (2.0 * config.sigma_sq * (t as f64).ln() / n_visits as f64).sqrt();
    mean_reward + margin + config.rho1 * config.gamma.powi(depth as i32)
}

/// Beam (1-based) at the center of a region; the beam space partitions
/// `[0, 1]` uniformly so beam `i` owns `[(i-1)/N, i/N)`.
pub fn region_to_beam(x_l: f64, x_h: f64, n_beams: usize) -> BeamIndex {
    let center = x_l + (x_h - x_l) / 2.0;
    let beam = (center * n_beams as f64).ceil() as usize;
    BeamIndex(beam.clamp(1, n_beams))
}

/// The hierarchical search policy.
#[derive(Debug, Clone)]
pub struct HbaPolicy {
    config: HbaConfig,
    tree: HbaTree,
    /// Region of the most recently added node; termination compares its
    /// width against `zeta / n_beams`.
    bounds: (f64, f64),
    terminated: Option<BeamIndex>,
    pending: Option<PendingSlot>,
    terminate_enabled: bool,
}

#[derive(Debug, Clone)]
struct PendingSlot {
    t: usize,
    path: Vec<usize>,
}

impl HbaPolicy {
    pub fn new(config: HbaConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            tree: HbaTree::new(),
            bounds: (0.0, 1.0),
            terminated: None,
            pending: None,
            terminate_enabled: true,
        })
    }

    /// Disables the stopping rule so the tree keeps growing for the full
    /// horizon (used by the empirical visit-count analysis).
    pub fn run_to_horizon(mut self) -> Self {
        self.terminate_enabled = false;
        self
    }

    pub fn config(&self) -> &HbaConfig {
        &self.config
    }

    pub fn tree(&self) -> &HbaTree {
        &self.tree
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    /// Descends from the root along the larger child `Q` (exact ties are
    /// coin-flipped), adds the first unexplored node and returns it with
    /// its root-to-node path.
    fn select_node(&mut self, rng: &mut ChaCha8Rng) -> (usize, Vec<usize>) {
        assert!(
            self.terminated.is_none(),
            "select_node called after termination"
        );
        let mut path = vec![0usize];
        let mut current = 0usize;
        loop {
            let ql = self.tree.child_q(current, 0);
            let qr = self.tree.child_q(current, 1);
            let side = if ql > qr {
                0
            } else if ql < qr {
                1
            } else {
                // Ber(0.5) tie break
                usize::from(!rng.random_bool(0.5))
            };
            match self.tree.nodes[current].children[side] {
                Some(child) => {
                    path.push(child);
                    current = child;
                }
                None => {
                    let new_idx = self.tree.add_child(current, side);
                    path.push(new_idx);
                    let node = &self.tree.nodes[new_idx];
                    self.bounds = (node.x_l, node.x_h);
                    return (new_idx, path);
                }
            }
        }
    }

    fn check_termination(&mut self) {
        if !self.terminate_enabled || self.terminated.is_some() {
            return;
        }
        let width = self.bounds.1 - self.bounds.0;
        if width < self.config.termination_width() {
            self.terminated = Some(region_to_beam(
                self.bounds.0,
                self.bounds.1,
                self.config.n_beams,
            ));
        }
    }

    /// Beam of the deepest node along the most-visited root-to-leaf path;
    /// the answer when the horizon expires before the stopping rule fires.
    fn deepest_most_visited_beam(&self) -> BeamIndex {
        let mut current = 0usize;
        loop {
            let visits = |c: Option<usize>| c.map_or(0, |i| self.tree.nodes[i].n_visits);
            let (l, r) = (
                visits(self.tree.nodes[current].children[0]),
                visits(self.tree.nodes[current].children[1]),
            );
            if l == 0 && r == 0 {
                let node = &self.tree.nodes[current];
                return region_to_beam(node.x_l, node.x_h, self.config.n_beams);
            }
            let side = if l >= r { 0 } else { 1 };
            current = self.tree.nodes[current].children[side].unwrap();
        }
    }
}

impl Policy for HbaPolicy {
    fn select(&mut self, t: usize, rng: &mut ChaCha8Rng) -> BeamIndex {
        assert!(self.terminated.is_none(), "select called after termination");
        let (new_idx, path) = self.select_node(rng);
        self.pending = Some(PendingSlot { t, path });
        let node = &self.tree.nodes[new_idx];
        region_to_beam(node.x_l, node.x_h, self.config.n_beams)
    }

    fn update(&mut self, obs: &Observation) {
        let pending = self
            .pending
            .take()
            .expect("update called without a preceding select");
        let reward = obs.reward.clamp(0.0, 1.0);
        self.tree.update_stats(&pending.path, reward);
        self.tree.refresh_values(pending.t, &self.config);
        self.check_termination();
    }

    fn finished(&self) -> Option<BeamIndex> {
        self.terminated
    }

    fn final_beam(&self) -> Option<BeamIndex> {
        Some(self.deepest_most_visited_beam())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::run_episode;
    use crate::channel::{FluctuationKind, FluctuationModel, RssModel};
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn noiseless_env(means_dbm: Vec<f64>) -> RssModel {
        RssModel {
            mean_rss_dbm: means_dbm,
            fluctuation: FluctuationModel {
                kind: FluctuationKind::Gaussian,
                sigma_db: 0.0,
            },
            signal_floor_dbm: -80.0,
            signal_ceil_dbm: -20.0,
        }
    }

    fn obs(t: usize, beam: BeamIndex, reward: f64) -> Observation {
        Observation {
            t,
            beam,
            reward,
            rss_dbm: -80.0 + 60.0 * reward,
        }
    }

    #[test]
    fn first_slot_adds_depth_one_node() {
        let mut policy = HbaPolicy::new(HbaConfig::new(8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let beam = policy.select(1, &mut rng);
        assert_eq!(policy.tree().len(), 2);
        let node = &policy.tree().nodes()[1];
        assert_eq!(node.depth, 1);
        assert!(node.x_h - node.x_l == 0.5);
        // beam is the center of a half region: beam 2 or 6 for N=8
        assert!(beam == BeamIndex(2) || beam == BeamIndex(6));
        policy.update(&obs(1, beam, 0.4));
        assert_eq!(policy.tree().nodes()[0].n_visits, 1);
        assert_eq!(policy.tree().nodes()[1].n_visits, 1);
    }

    #[test]
    fn coin_flip_is_seed_deterministic() {
        let run = |seed| {
            let env = noiseless_env(vec![-55.0; 16]);
            let mut policy = HbaPolicy::new(HbaConfig::new(16)).unwrap();
            run_episode(
                &env,
                &mut policy,
                30,
                &mut ChaCha8Rng::seed_from_u64(99),
                &mut ChaCha8Rng::seed_from_u64(seed),
            )
            .unwrap()
        };
        assert_eq!(run(5), run(5));
    }

    #[test]
    fn descends_into_larger_q_child() {
        let mut policy = HbaPolicy::new(HbaConfig::new(8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // explore both depth-1 children, left much better than right
        for t in 1..=2 {
            let beam = policy.select(t, &mut rng);
            let reward = if beam.get() <= 4 { 0.9 } else { 0.1 };
            policy.update(&obs(t, beam, reward));
        }
        let left = policy.tree().nodes()[0].children[0].unwrap();
        let right = policy.tree().nodes()[0].children[1].unwrap();
        assert!(policy.tree().nodes()[left].q_value > policy.tree().nodes()[right].q_value);
        // third slot must descend under the left child
        policy.select(3, &mut rng);
        let new_node = policy.tree().nodes().last().unwrap();
        assert_eq!(new_node.parent, Some(left));
        assert!(new_node.x_h <= 0.5);
        assert_eq!(policy.bounds(), (new_node.x_l, new_node.x_h));
    }

    #[test]
    fn running_mean_and_root_count() {
        let mut policy = HbaPolicy::new(HbaConfig::new(8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rewards = [0.2, 0.4, 0.3, 0.6];
        for (i, &r) in rewards.iter().enumerate() {
            let beam = policy.select(i + 1, &mut rng);
            policy.update(&obs(i + 1, beam, r));
        }
        let root = &policy.tree().nodes()[0];
        assert_eq!(root.n_visits, rewards.len() as u64);
        let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
        assert_relative_eq!(root.mean_reward, mean, epsilon = 1e-12);
        // one node added per slot
        assert_eq!(policy.tree().len(), rewards.len() + 1);
    }

    #[test]
    fn optimistic_value_examples() {
        let config = HbaConfig {
            sigma_sq: (1.0 / 30.0) * (1.0 / 30.0),
            ..HbaConfig::new(8)
        };
        // ln(1) = 0: confidence term vanishes
        let e = optimistic_value(0.5, 4, 1, 1, &config);
        assert_relative_eq!(e, 0.5 + 3.0 * 0.5, epsilon = 1e-12);
        // hand evaluation at t = e^4, h = 2, N = 4
        let t = std::f64::consts::E.powi(4).round() as usize;
        let config = HbaConfig {
            sigma_sq: 1.0 / 900.0,
            ..config
        };
        let e = optimistic_value(0.5, 4, 2, t, &config);
        let expected = 0.5 + (2.0 / 900.0 * (t as f64).ln() / 4.0).sqrt() + 0.75;
        assert_relative_eq!(e, expected, epsilon = 1e-12);
        assert!((e - 1.2971).abs() < 1e-3);
        // unvisited nodes stay at +inf
        assert!(optimistic_value(0.0, 0, 3, 10, &config).is_infinite());
    }

    #[test]
    fn q_is_min_of_e_and_child_max() {
        let mut tree = HbaTree::new();
        let l = tree.add_child(0, 0);
        let r = tree.add_child(0, 1);
        tree.nodes[0].n_visits = 3;
        tree.nodes[l].n_visits = 2;
        tree.nodes[r].n_visits = 1;
        let config = HbaConfig::new(8);
        tree.refresh_values(5, &config);
        // leaves with unexplored children: Q = E
        assert_eq!(tree.nodes[l].q_value, tree.nodes[l].e_value);
        assert_eq!(tree.nodes[r].q_value, tree.nodes[r].e_value);
        let expected = tree.nodes[0]
            .e_value
            .min(tree.nodes[l].q_value.max(tree.nodes[r].q_value));
        assert_eq!(tree.nodes[0].q_value, expected);

        // arithmetic spot check: E = 0.8, children Q = {0.6, 0.7} -> 0.7
        assert_eq!(0.8f64.min(0.6f64.max(0.7)), 0.7);
    }

    #[test]
    fn region_to_beam_examples() {
        assert_eq!(region_to_beam(0.0, 1.0, 8), BeamIndex(4));
        // region strictly inside the first beam's cell
        assert_eq!(region_to_beam(0.0, 1.0 / 32.0, 16), BeamIndex(1));
        assert_eq!(region_to_beam(1.0 - 1.0 / 16.0, 1.0, 16), BeamIndex(16));
    }

    #[test]
    fn termination_threshold_at_n128() {
        let config = HbaConfig::new(128);
        let threshold = config.termination_width();
        assert_relative_eq!(threshold, 7.8125e-4, epsilon = 1e-12);
        assert!(2f64.powi(-11) < threshold);
        assert!(2f64.powi(-10) >= threshold);
    }

    #[test]
    fn terminated_policy_is_idempotent() {
        let env = noiseless_env(unimodal_landscape(64, 20));
        let mut policy = HbaPolicy::new(HbaConfig::new(64)).unwrap();
        let trace = run_episode(
            &env,
            &mut policy,
            1000,
            &mut ChaCha8Rng::seed_from_u64(0),
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        assert!(trace.terminated_at.is_some());
        assert_eq!(policy.finished(), Some(trace.final_beam));
        assert_eq!(policy.finished(), Some(trace.final_beam));
    }

    #[test]
    #[should_panic(expected = "after termination")]
    fn select_after_termination_panics() {
        let env = noiseless_env(unimodal_landscape(64, 20));
        let mut policy = HbaPolicy::new(HbaConfig::new(64)).unwrap();
        run_episode(
            &env,
            &mut policy,
            1000,
            &mut ChaCha8Rng::seed_from_u64(0),
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        policy.select(2000, &mut ChaCha8Rng::seed_from_u64(2));
    }

    /// Smooth single-peak dBm landscape peaking at `peak` (1-based).
    fn unimodal_landscape(n: usize, peak: usize) -> Vec<f64> {
        (1..=n)
            .map(|i| {
                let d = (i as f64 - peak as f64).abs().min(n as f64 - (i as f64 - peak as f64).abs());
                -40.0 - 1.5 * d
            })
            .collect()
    }

    #[test]
    fn noiseless_unimodal_finds_argmax() {
        for peak in [5usize, 20, 33, 60] {
            let env = noiseless_env(unimodal_landscape(64, peak));
            let config = HbaConfig {
                sigma_sq: 0.0,
                ..HbaConfig::new(64)
            };
            let mut policy = HbaPolicy::new(config).unwrap();
            let trace = run_episode(
                &env,
                &mut policy,
                2000,
                &mut ChaCha8Rng::seed_from_u64(3),
                &mut ChaCha8Rng::seed_from_u64(4),
            )
            .unwrap();
            assert!(trace.terminated_at.is_some(), "peak {peak} never terminated");
            assert_eq!(trace.final_beam, BeamIndex(peak), "peak {peak}");
        }
    }

    #[test]
    fn tree_invariants_hold_during_noisy_episode() {
        let env = RssModel {
            mean_rss_dbm: unimodal_landscape(32, 11),
            fluctuation: FluctuationModel::default(),
            signal_floor_dbm: -80.0,
            signal_ceil_dbm: -20.0,
        };
        let mut policy = HbaPolicy::new(HbaConfig::new(32)).unwrap().run_to_horizon();
        let mut env_rng = ChaCha8Rng::seed_from_u64(8);
        let mut pol_rng = ChaCha8Rng::seed_from_u64(9);
        for t in 1..=200 {
            let beam = policy.select(t, &mut pol_rng);
            let rss = env.sample_rss_dbm(beam.get(), &mut env_rng).unwrap();
            policy.update(&obs(t, beam, env.normalize_reward(rss)));
            for node in policy.tree().nodes() {
                assert!(node.n_visits > 0);
                assert!(node.q_value <= node.e_value);
                assert!((node.width() - 2f64.powi(-(node.depth as i32))).abs() < 1e-15);
                if let [Some(l), Some(r)] = node.children {
                    let (ln, rn) = (&policy.tree().nodes()[l], &policy.tree().nodes()[r]);
                    assert_eq!(ln.x_l, node.x_l);
                    assert_eq!(rn.x_h, node.x_h);
                    assert_eq!(ln.x_h, rn.x_l);
                }
                if let Some(p) = node.parent {
                    let pn = &policy.tree().nodes()[p];
                    assert!(node.n_visits <= pn.n_visits);
                }
            }
            assert_eq!(policy.tree().len(), t + 1);
        }
    }
}
