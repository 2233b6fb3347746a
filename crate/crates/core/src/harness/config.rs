//! Experiment configuration and the INI-style config file format.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{ArrayConfig, FluctuationModel};
use crate::latency::AbftConfig;
use crate::{Error, Result};

/// Algorithms the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Hba,
    Hoo,
    Ucb,
    Uba,
    Exhaustive,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Hba,
        Algorithm::Hoo,
        Algorithm::Ucb,
        Algorithm::Uba,
        Algorithm::Exhaustive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Hba => "hba",
            Algorithm::Hoo => "hoo",
            Algorithm::Ucb => "ucb",
            Algorithm::Uba => "uba",
            Algorithm::Exhaustive => "exhaustive",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "hba" => Ok(Algorithm::Hba),
            "hoo" => Ok(Algorithm::Hoo),
            "ucb" => Ok(Algorithm::Ucb),
            "uba" => Ok(Algorithm::Uba),
            "exhaustive" => Ok(Algorithm::Exhaustive),
            other => Err(Error::InvalidConfig(format!(
                "unknown algorithm {other:?} (expected hba, hoo, ucb, uba or exhaustive)"
            ))),
        }
    }
}

/// One Monte-Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_beams: usize,
    pub n_paths: usize,
    pub distance_m: f64,
    /// Draw a fresh distance uniformly in [5, 50] m per run instead of
    /// using `distance_m`.
    pub randomize_distance: bool,
    pub horizon: usize,
    pub n_runs: usize,
    pub algorithms: Vec<Algorithm>,
    pub fluctuation: FluctuationModel,
    /// Prior-quality ratio: the search algorithm receives
    /// `prior_ratio * sigma^2` as its reward-variance prior.
    pub prior_ratio: f64,
    pub n_users: usize,
    pub seed: u64,
    pub rho1: f64,
    pub gamma: f64,
    pub zeta: f64,
    pub eta_u: f64,
    pub eta_h: f64,
    pub array: ArrayConfig,
    pub protocol: AbftConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_beams: 128,
            n_paths: 2,
            distance_m: 20.0,
            randomize_distance: false,
            horizon: 1000,
            n_runs: 1000,
            algorithms: Algorithm::ALL.to_vec(),
            fluctuation: FluctuationModel::default(),
            prior_ratio: 1.0,
            n_users: 1,
            seed: 0,
            rho1: 3.0,
            gamma: 0.5,
            zeta: 0.1,
            eta_u: 0.2,
            eta_h: 0.1,
            array: ArrayConfig::default(),
            protocol: AbftConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_beams < 2 {
            return Err(Error::InvalidConfig("n_beams must be >= 2".into()));
        }
        if !(1..=5).contains(&self.n_paths) {
            return Err(Error::InvalidConfig("n_paths must be in 1..=5".into()));
        }
        if self.distance_m <= 0.0 {
            return Err(Error::InvalidConfig("distance_m must be positive".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be >= 1".into()));
        }
        if self.n_runs == 0 {
            return Err(Error::InvalidConfig("n_runs must be >= 1".into()));
        }
        if self.prior_ratio <= 0.0 {
            return Err(Error::InvalidConfig("prior_ratio must be positive".into()));
        }
        if self.n_users == 0 {
            return Err(Error::InvalidConfig("n_users must be >= 1".into()));
        }
        self.fluctuation.validate()?;
        self.array().validate()?;
        self.protocol.validate()?;
        Ok(())
    }

    /// Array config with the antenna count pinned to the beam count.
    pub fn array(&self) -> ArrayConfig {
        ArrayConfig {
            n_antennas: self.n_beams,
            ..self.array.clone()
        }
    }

    /// Prior reward-domain variance handed to the tree search.
    pub fn prior_sigma_sq(&self) -> f64 {
        let span = 60.0;
        let sigma_reward = self.fluctuation.sigma_db / span;
        self.prior_ratio * sigma_reward * sigma_reward
    }

    /// Parses the INI-style config file; unknown sections or keys are
    /// configuration errors.
    pub fn from_ini_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_ini(&text)
    }

    pub fn from_ini(text: &str) -> Result<Self> {
        let mut config = Self::default();
        for (section, key, value) in parse_ini(text)? {
            config.apply(&section, &key, &value)?;
        }
        Ok(config)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        match (section, key) {
            ("experiment", "n_beams") => self.n_beams = parse(section, key, value)?,
            ("experiment", "n_paths") => self.n_paths = parse(section, key, value)?,
            ("experiment", "distance_m") => self.distance_m = parse(section, key, value)?,
            ("experiment", "randomize_distance") => {
                self.randomize_distance = parse(section, key, value)?
            }
            ("experiment", "horizon") => self.horizon = parse(section, key, value)?,
            ("experiment", "n_runs") => self.n_runs = parse(section, key, value)?,
            ("experiment", "algorithms") => {
                self.algorithms = value
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<_>>()?
            }
            ("experiment", "fluctuation_kind") => self.fluctuation.kind = value.parse()?,
            ("experiment", "sigma_db") => self.fluctuation.sigma_db = parse(section, key, value)?,
            ("experiment", "prior_ratio") => self.prior_ratio = parse(section, key, value)?,
            ("experiment", "n_users") => self.n_users = parse(section, key, value)?,
            ("experiment", "seed") => self.seed = parse(section, key, value)?,
            ("experiment", "rho1") => self.rho1 = parse(section, key, value)?,
            ("experiment", "gamma") => self.gamma = parse(section, key, value)?,
            ("experiment", "zeta") => self.zeta = parse(section, key, value)?,
            ("experiment", "eta_u") => self.eta_u = parse(section, key, value)?,
            ("experiment", "eta_h") => self.eta_h = parse(section, key, value)?,
            ("array", "element_spacing_ratio") => {
                self.array.element_spacing_ratio = parse(section, key, value)?
            }
            ("array", "carrier_freq_ghz") => {
                self.array.carrier_freq_ghz = parse(section, key, value)?
            }
            ("array", "bandwidth_ghz") => self.array.bandwidth_ghz = parse(section, key, value)?,
            ("array", "noise_density_dbm_hz") => {
                self.array.noise_density_dbm_hz = parse(section, key, value)?
            }
            ("array", "eirp_dbm") => self.array.eirp_dbm = parse(section, key, value)?,
            ("array", "path_loss_exponent") => {
                self.array.path_loss_exponent = parse(section, key, value)?
            }
            ("protocol", "abft_slots_per_bi") => {
                self.protocol.abft_slots_per_bi = parse(section, key, value)?
            }
            ("protocol", "ssw_frames_per_slot") => {
                self.protocol.ssw_frames_per_slot = parse(section, key, value)?
            }
            ("protocol", "t_ssw_us") => self.protocol.t_ssw_us = parse(section, key, value)?,
            ("protocol", "t_bi_ms") => self.protocol.t_bi_ms = parse(section, key, value)?,
            ("protocol", "t_feedback_us") => {
                self.protocol.t_feedback_us = parse(section, key, value)?
            }
            ("protocol", "frames_per_bi") => {
                self.protocol.frames_per_bi_override = Some(parse(section, key, value)?)
            }
            // sweep axes live in the same file; `SweepConfig` parses and
            // key-checks that section
            ("sweep", _) => {}
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown config key [{section}] {key}"
                )))
            }
        }
        Ok(())
    }
}

fn parse<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| {
        Error::InvalidConfig(format!("could not parse [{section}] {key} = {value:?}"))
    })
}

/// Sweep axes: the cartesian product of the listed values is run, using
/// the base experiment config for everything else.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepConfig {
    pub n_beams: Vec<usize>,
    pub n_paths: Vec<usize>,
    pub distance_m: Vec<f64>,
    pub prior_ratio: Vec<f64>,
}

impl SweepConfig {
    pub fn from_ini(text: &str) -> Result<Self> {
        let mut sweep = Self::default();
        for (section, key, value) in parse_ini(text)? {
            if section != "sweep" {
                continue;
            }
            match key.as_str() {
                "n_beams" => sweep.n_beams = parse_list(&section, &key, &value)?,
                "n_paths" => sweep.n_paths = parse_list(&section, &key, &value)?,
                "distance_m" => sweep.distance_m = parse_list(&section, &key, &value)?,
                "prior_ratio" => sweep.prior_ratio = parse_list(&section, &key, &value)?,
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown config key [sweep] {key}"
                    )))
                }
            }
        }
        Ok(sweep)
    }

    /// All grid points as concrete experiment configs, with a label per
    /// point.
    pub fn grid(&self, base: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
        let one = |v: &Vec<usize>, d: usize| if v.is_empty() { vec![d] } else { v.clone() };
        let onef = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let mut out = Vec::new();
        for &n in &one(&self.n_beams, base.n_beams) {
            for &l in &one(&self.n_paths, base.n_paths) {
                for &d in &onef(&self.distance_m, base.distance_m) {
                    for &eta in &onef(&self.prior_ratio, base.prior_ratio) {
                        let config = ExperimentConfig {
                            n_beams: n,
                            n_paths: l,
                            distance_m: d,
                            prior_ratio: eta,
                            ..base.clone()
                        };
                        out.push((format!("N{n}_L{l}_d{d}_eta{eta}"), config));
                    }
                }
            }
        }
        out
    }
}

fn parse_list<T: FromStr>(section: &str, key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| parse(section, key, v))
        .collect()
}

/// Parses `[section]` / `key = value` lines; `#` and `;` start comments.
fn parse_ini(text: &str) -> Result<Vec<(String, String, String)>> {
    let mut entries = Vec::new();
    let mut section = String::from("experiment");
    let mut seen = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("config line {} is not `key = value`: {raw:?}", lineno + 1))
        })?;
        let key = key.trim().to_string();
        if seen.insert((section.clone(), key.clone()), ()).is_some() {
            return Err(Error::InvalidConfig(format!(
                "duplicate config key [{section}] {key}"
            )));
        }
        entries.push((section.clone(), key, value.trim().to_string()));
    }
    Ok(entries)
}
