//! Randomized self-check suites over channels and the search tree, with
//! reproducible counterexample seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bandit::Policy;
use crate::channel::{check_unimodal_cyclic, local_maxima, sample_channel, BeamCodebook, RssModel, UNIMODAL_TOL};
use crate::hba::{optimistic_value, HbaConfig, HbaPolicy, HbaTree};
use crate::Result;

use super::config::ExperimentConfig;
use super::derive_seed;

/// Outcome of one randomized property: how many cases ran and the seeds of
/// the failing ones (each failing case is reproducible from its seed).
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub total: usize,
    pub failing_seeds: Vec<u64>,
    /// Minimum fraction of passing cases for the check to count as passed.
    pub required_pass_fraction: f64,
}

impl CheckResult {
    pub fn pass_fraction(&self) -> f64 {
        (self.total - self.failing_seeds.len()) as f64 / self.total as f64
    }

    pub fn passed(&self) -> bool {
        self.pass_fraction() >= self.required_pass_fraction
    }
}

/// All checks of one validation invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for check in &self.checks {
            let status = if check.passed() { "PASS" } else { "FAIL" };
            out.push_str(&format!(
                "[{status}] {}: {}/{} cases",
                check.name,
                check.total - check.failing_seeds.len(),
                check.total
            ));
            if !check.failing_seeds.is_empty() {
                let shown: Vec<String> = check
                    .failing_seeds
                    .iter()
                    .take(5)
                    .map(|s| s.to_string())
                    .collect();
                out.push_str(&format!(" (failing seeds: {})", shown.join(", ")));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs `property` over `n_cases` independently seeded cases in parallel
/// and records the seeds of the failures.
pub fn run_property<F>(
    name: &str,
    n_cases: usize,
    master_seed: u64,
    required_pass_fraction: f64,
    property: F,
) -> CheckResult
where
    F: Fn(u64) -> bool + Sync,
{
    let failing_seeds: Vec<u64> = (0..n_cases as u64)
        .into_par_iter()
        .map(|case| derive_seed(master_seed, case, u64::MAX))
        .filter(|&seed| !property(seed))
        .collect();
    CheckResult {
        name: name.to_string(),
        total: n_cases,
        failing_seeds,
        required_pass_fraction,
    }
}

/// Recursive recomputation of every node's `Q` from scratch at slot `t`,
/// independent of the incremental leaf-to-root sweep the tree maintains.
pub fn brute_force_q(tree: &HbaTree, t: usize, config: &HbaConfig) -> Vec<f64> {
    fn q_of(tree: &HbaTree, idx: usize, t: usize, config: &HbaConfig) -> f64 {
        let node = &tree.nodes()[idx];
        if node.n_visits == 0 {
            return f64::INFINITY;
        }
        let e = optimistic_value(node.mean_reward, node.n_visits, node.depth, t, config);
        let child = |c: Option<usize>| c.map_or(f64::INFINITY, |j| q_of(tree, j, t, config));
        e.min(child(node.children[0]).max(child(node.children[1])))
    }
    (0..tree.len()).map(|i| q_of(tree, i, t, config)).collect()
}

fn random_env(config: &ExperimentConfig, codebook: &BeamCodebook, seed: u64) -> Result<RssModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let array = config.array();
    let channel = sample_channel(&array, config.n_paths, config.distance_m, &mut rng)?;
    RssModel::from_channel(&channel, &array, codebook, config.fluctuation)
}

/// Runs the standard validation suite: channel-structure properties over
/// random channel draws plus tree-consistency properties over random noisy
/// search episodes.
pub fn validation_suite(config: &ExperimentConfig, n_cases: usize) -> Result<ValidationReport> {
    config.validate()?;
    let codebook = BeamCodebook::new(config.n_beams)?;
    let single_path = ExperimentConfig {
        n_paths: 1,
        ..config.clone()
    };

    let unimodal = run_property(
        "single-path mean RSS is cyclically unimodal",
        n_cases,
        config.seed,
        1.0,
        |seed| {
            random_env(&single_path, &codebook, seed)
                .and_then(|env| check_unimodal_cyclic(&env.mean_rss_dbm))
                .unwrap_or(false)
        },
    );

    let peak_budget = run_property(
        "peak count never exceeds the path count",
        n_cases,
        config.seed.wrapping_add(1),
        1.0,
        |seed| match random_env(config, &codebook, seed) {
            Ok(env) => local_maxima(&env.mean_rss_dbm, UNIMODAL_TOL).len() <= config.n_paths,
            Err(_) => false,
        },
    );

    // weaker-path draws can land a reflection close enough to the direct
    // path that their lobes merge in its favor, so a small failure rate is
    // expected and tolerated
    let dominant = run_property(
        "argmax beam is the one nearest the direct path",
        n_cases,
        config.seed.wrapping_add(2),
        0.995,
        |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let array = config.array();
            let Ok(channel) = sample_channel(&array, config.n_paths, config.distance_m, &mut rng)
            else {
                return false;
            };
            match RssModel::from_channel(&channel, &array, &codebook, config.fluctuation) {
                Ok(env) => env.optimal_beam() == codebook.nearest_beam(channel.los().spatial_angle),
                Err(_) => false,
            }
        },
    );

    let episode_cases = n_cases.min(50).max(10);
    let q_consistency = run_property(
        "incremental Q matches from-scratch recomputation",
        episode_cases,
        config.seed.wrapping_add(3),
        1.0,
        |seed| tree_episode_property(config, &codebook, seed, check_q_against_oracle),
    );

    let tree_shape = run_property(
        "tree partitions regions and counts visits consistently",
        episode_cases,
        config.seed.wrapping_add(4),
        1.0,
        |seed| tree_episode_property(config, &codebook, seed, check_tree_shape),
    );

    Ok(ValidationReport {
        checks: vec![unimodal, peak_budget, dominant, q_consistency, tree_shape],
    })
}

/// Runs a 150-slot noisy search episode and applies `check` to the tree
/// after every slot.
fn tree_episode_property(
    config: &ExperimentConfig,
    codebook: &BeamCodebook,
    seed: u64,
    check: fn(&HbaTree, usize, &HbaConfig) -> bool,
) -> bool {
    let Ok(env) = random_env(config, codebook, seed) else {
        return false;
    };
    let hba_config = HbaConfig {
        rho1: config.rho1,
        gamma: config.gamma,
        zeta: config.zeta,
        sigma_sq: config.prior_sigma_sq(),
        n_beams: config.n_beams,
    };
    let Ok(policy) = HbaPolicy::new(hba_config) else {
        return false;
    };
    let mut policy = policy.run_to_horizon();
    let mut env_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut policy_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    for t in 1..=150 {
        let beam = policy.select(t, &mut policy_rng);
        let Ok(rss) = env.sample_rss_dbm(beam.get(), &mut env_rng) else {
            return false;
        };
        policy.update(&crate::bandit::Observation {
            t,
            beam,
            reward: env.normalize_reward(rss),
            rss_dbm: rss,
        });
        if !check(policy.tree(), t, &hba_config) {
            return false;
        }
    }
    true
}

fn check_q_against_oracle(tree: &HbaTree, t: usize, config: &HbaConfig) -> bool {
    let oracle = brute_force_q(tree, t, config);
    tree.nodes().iter().zip(&oracle).all(|(node, &q)| {
        (node.q_value.is_infinite() && q.is_infinite()) || (node.q_value - q).abs() <= 1e-12
    })
}

fn check_tree_shape(tree: &HbaTree, t: usize, _config: &HbaConfig) -> bool {
    if tree.len() != t + 1 {
        return false;
    }
    tree.nodes().iter().enumerate().all(|(i, node)| {
        let child_ok = |side: usize| match node.children[side] {
            None => true,
            Some(c) => {
                let child = &tree.nodes()[c];
                c > i
                    && child.parent == Some(i)
                    && child.depth == node.depth + 1
                    && child.n_visits <= node.n_visits
                    && child.x_l >= node.x_l - 1e-15
                    && child.x_h <= node.x_h + 1e-15
            }
        };
        node.n_visits > 0 && node.q_value <= node.e_value && child_ok(0) && child_ok(1)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn injected_failure_is_caught_with_its_seed() {
        let mut seeds = Vec::new();
        for case in 0..20u64 {
            seeds.push(derive_seed(9, case, u64::MAX));
        }
        let poison = seeds[7];
        let result = run_property("self-test", 20, 9, 1.0, |seed| seed != poison);
        assert!(!result.passed());
        assert_eq!(result.failing_seeds, vec![poison]);
        // the recorded seed reproduces the failure deterministically
        assert!((|s: u64| s != poison)(result.failing_seeds[0]) == false);
        let clean = run_property("self-test", 20, 9, 1.0, |_| true);
        assert!(clean.passed());
        assert_eq!(clean.pass_fraction(), 1.0);
    }

    #[test]
    fn pass_fraction_threshold() {
        let result = CheckResult {
            name: "x".into(),
            total: 200,
            failing_seeds: vec![1],
            required_pass_fraction: 0.995,
        };
        assert!(result.passed());
        let result = CheckResult {
            failing_seeds: vec![1, 2],
            ..result
        };
        assert!(!result.passed());
    }

    #[test]
    fn standard_suite_passes_on_defaults() {
        let config = ExperimentConfig {
            n_beams: 32,
            seed: 5,
            ..Default::default()
        };
        let report = validation_suite(&config, 60).unwrap();
        assert_eq!(report.checks.len(), 5);
        assert!(report.all_passed(), "{}", report.render());
        let rendered = report.render();
        assert_eq!(rendered.lines().count(), 5);
        assert!(rendered.lines().all(|l| l.starts_with("[PASS]")));
    }

    #[test]
    fn brute_force_q_flags_a_corrupted_value() {
        let config = ExperimentConfig {
            n_beams: 16,
            ..Default::default()
        };
        let codebook = BeamCodebook::new(16).unwrap();
        assert!(tree_episode_property(
            &config,
            &codebook,
            1234,
            check_q_against_oracle
        ));
        // sanity: the oracle itself notices a mismatch
        let hba_config = HbaConfig::new(16);
        let mut policy = HbaPolicy::new(hba_config).unwrap().run_to_horizon();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in 1..=10 {
            let beam = policy.select(t, &mut rng);
            policy.update(&crate::bandit::Observation {
                t,
                beam,
                reward: 0.5,
                rss_dbm: -50.0,
            });
        }
        let oracle = brute_force_q(policy.tree(), 10, &hba_config);
        assert!(policy
            .tree()
            .nodes()
            .iter()
            .zip(&oracle)
            .all(|(n, &q)| (n.q_value - q).abs() <= 1e-12 || (n.q_value.is_infinite() && q.is_infinite())));
        let corrupted: Vec<f64> = oracle.iter().map(|q| q + 0.1).collect();
        assert!(policy
            .tree()
            .nodes()
            .iter()
            .zip(&corrupted)
            .any(|(n, &q)| (n.q_value - q).abs() > 1e-12));
    }
}
