//! Sparse multipath channel model and per-beam RSS evaluation.
//!
//! A channel realization is a small set of path components (one LOS path
//! plus up to four weaker NLOS paths), each with a spatial angle in
//! `[-1, 1]` and a linear gain. The mean RSS seen through beam `i` is the
//! incoherent sum of per-path directivity lobes plus thermal noise; noisy
//! reward samples add a zero-mean dB-domain fluctuation on top of the mean.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance used when classifying plateaus in the unimodality checker.
pub const UNIMODAL_TOL: f64 = 1e-12;

/// Uniform linear array and link-budget parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    /// Number of antenna elements, equal to the number of codebook beams.
    pub n_antennas: usize,
    /// Element spacing over carrier wavelength, d/lambda.
    pub element_spacing_ratio: f64,
    pub carrier_freq_ghz: f64,
    pub bandwidth_ghz: f64,
    pub noise_density_dbm_hz: f64,
    pub eirp_dbm: f64,
    /// Path loss exponent of the LOS path.
    pub path_loss_exponent: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            n_antennas: 128,
            element_spacing_ratio: 0.5,
            carrier_freq_ghz: 60.0,
            bandwidth_ghz: 2.16,
            noise_density_dbm_hz: -174.0,
            eirp_dbm: 50.0,
            path_loss_exponent: 1.74,
        }
    }
}

impl ArrayConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_antennas < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_antennas must be >= 2, got {}",
                self.n_antennas
            )));
        }
        if self.element_spacing_ratio <= 0.0 {
            return Err(Error::InvalidConfig(
                "element_spacing_ratio must be positive".into(),
            ));
        }
        if self.bandwidth_ghz <= 0.0 {
            return Err(Error::InvalidConfig("bandwidth_ghz must be positive".into()));
        }
        Ok(())
    }

    /// Mean thermal noise power in mW over the configured bandwidth.
    pub fn noise_power_mw(&self) -> f64 {
        let bandwidth_hz = self.bandwidth_ghz * 1e9;
        10f64.powf((self.noise_density_dbm_hz + 10.0 * bandwidth_hz.log10()) / 10.0)
    }

    /// Per-beam transmit power in mW after splitting the EIRP budget over
    /// the array gain.
    pub fn transmit_power_mw(&self) -> f64 {
        let p_dbm = self.eirp_dbm - 10.0 * (self.n_antennas as f64).log10();
        10f64.powf(p_dbm / 10.0)
    }
}

/// One channel path: a spatial angle (cosine of the physical angle) and a
/// linear amplitude gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    pub spatial_angle: f64,
    pub gain_linear: f64,
    pub is_los: bool,
}

/// A channel realization: LOS path first, then the NLOS paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultipathChannel {
    pub paths: Vec<PathComponent>,
}

impl MultipathChannel {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn los(&self) -> &PathComponent {
        &self.paths[0]
    }
}

/// DFT codebook: beam `i` points at spatial angle `(2i - N) / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamCodebook {
    pub spatial_angles: Vec<f64>,
}

impl BeamCodebook {
    pub fn new(n_beams: usize) -> Result<Self> {
        Ok(Self {
            spatial_angles: spatial_angles(n_beams)?,
        })
    }

    pub fn n_beams(&self) -> usize {
        self.spatial_angles.len()
    }

    /// Index (1-based) of the beam whose angle is nearest to `angle` on the
    /// cyclic beam space (spatial angles wrap with period 2).
    pub fn nearest_beam(&self, angle: f64) -> usize {
        let mut best = 1;
        let mut best_d = f64::INFINITY;
        for (i, &omega) in self.spatial_angles.iter().enumerate() {
            let d = cyclic_angle_distance(omega, angle);
            if d < best_d {
                best_d = d;
                best = i + 1;
            }
        }
        best
    }
}

/// Wrapped distance between two spatial angles (period 2).
pub fn cyclic_angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0);
    d.min(2.0 - d)
}

/// Spatial angles of an N-beam DFT codebook: `(2i - N) / N` for `i = 1..N`.
pub fn spatial_angles(n_beams: usize) -> Result<Vec<f64>> {
    if n_beams < 2 {
        return Err(Error::InvalidConfig(format!(
            "codebook needs at least 2 beams, got {n_beams}"
        )));
    }
    let n = n_beams as f64;
    Ok((1..=n_beams).map(|i| (2.0 * i as f64 - n) / n).collect())
}

/// Antenna directivity `sin^2(N pi s x) / sin^2(pi s x)` for misalignment
/// `x` and spacing ratio `s`. The removable singularities (denominator and
/// numerator both zero) evaluate to the limit `N^2`.
pub fn directivity(misalignment: f64, n_antennas: usize, spacing_ratio: f64) -> f64 {
    let n = n_antennas as f64;
    let arg = std::f64::consts::PI * spacing_ratio * misalignment;
    let den = arg.sin();
    if den.abs() < 1e-12 {
        return n * n;
    }
    let num = (n * arg).sin();
    (num * num) / (den * den)
}

/// Free-space style LOS path loss in dB.
pub fn path_loss_db(freq_ghz: f64, distance_m: f64, exponent: f64, shadow_db: f64) -> Result<f64> {
    if freq_ghz <= 0.0 || distance_m <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "path loss needs positive frequency and distance, got f={freq_ghz} GHz, d={distance_m} m"
        )));
    }
    Ok(32.5 + 20.0 * freq_ghz.log10() + 10.0 * exponent * distance_m.log10() + shadow_db)
}

/// Draws a random channel: LOS angle uniform on `[-1, 1]`, LOS power from
/// the path-loss model (no shadowing baked in), each NLOS path at a uniform
/// angle with 7-13 dB of extra loss.
pub fn sample_channel<R: Rng + ?Sized>(
    array: &ArrayConfig,
    n_paths: usize,
    distance_m: f64,
    rng: &mut R,
) -> Result<MultipathChannel> {
    if !(1..=5).contains(&n_paths) {
        return Err(Error::InvalidConfig(format!(
            "n_paths must be in 1..=5, got {n_paths}"
        )));
    }
    let pl_db = path_loss_db(
        array.carrier_freq_ghz,
        distance_m,
        array.path_loss_exponent,
        0.0,
    )?;
    let los_power = 10f64.powf(-pl_db / 10.0);
    let mut paths = vec![PathComponent {
        spatial_angle: rng.random_range(-1.0..=1.0),
        gain_linear: los_power.sqrt(),
        is_los: true,
    }];
    for _ in 1..n_paths {
        let extra_loss_db: f64 = rng.random_range(7.0..=13.0);
        let power = los_power * 10f64.powf(-extra_loss_db / 10.0);
        paths.push(PathComponent {
            spatial_angle: rng.random_range(-1.0..=1.0),
            gain_linear: power.sqrt(),
            is_los: false,
        });
    }
    Ok(MultipathChannel { paths })
}

/// Mean RSS in dBm through beam `beam_index` (1-based): incoherent per-path
/// sum of directivity lobes plus the thermal noise floor.
pub fn mean_rss_dbm(
    channel: &MultipathChannel,
    array: &ArrayConfig,
    codebook: &BeamCodebook,
    beam_index: usize,
) -> Result<f64> {
    if beam_index < 1 || beam_index > codebook.n_beams() {
        return Err(Error::ProtocolViolation(format!(
            "beam index {beam_index} out of range 1..={}",
            codebook.n_beams()
        )));
    }
    let omega = codebook.spatial_angles[beam_index - 1];
    let n = array.n_antennas as f64;
    let p_mw = array.transmit_power_mw();
    let mut power_mw = array.noise_power_mw();
    for path in &channel.paths {
        let d = directivity(
            omega - path.spatial_angle,
            array.n_antennas,
            array.element_spacing_ratio,
        );
        power_mw += p_mw * path.gain_linear * path.gain_linear / n * d;
    }
    Ok(10.0 * power_mw.log10())
}

/// Shape of the per-sample dB-domain fluctuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluctuationKind {
    Gaussian,
    Uniform,
    Rayleigh,
}

impl std::str::FromStr for FluctuationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "uniform" => Ok(Self::Uniform),
            "rayleigh" => Ok(Self::Rayleigh),
            other => Err(Error::InvalidConfig(format!(
                "unknown fluctuation kind {other:?} (expected gaussian, uniform or rayleigh)"
            ))),
        }
    }
}

/// Zero-mean dB-domain fluctuation with standard deviation `sigma_db`.
///
/// Non-Gaussian kinds are shifted and scaled so the dB-domain variance is
/// `sigma_db^2` with zero mean offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationModel {
    pub kind: FluctuationKind,
    pub sigma_db: f64,
}

impl Default for FluctuationModel {
    fn default() -> Self {
        Self {
            kind: FluctuationKind::Gaussian,
            sigma_db: 2.0,
        }
    }
}

impl FluctuationModel {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_db < 0.0 {
            return Err(Error::InvalidConfig("sigma_db must be >= 0".into()));
        }
        Ok(())
    }

    pub fn sample_db<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma_db == 0.0 {
            return 0.0;
        }
        match self.kind {
            FluctuationKind::Gaussian => {
                Normal::new(0.0, self.sigma_db).unwrap().sample(rng)
            }
            FluctuationKind::Uniform => {
                let half_width = self.sigma_db * 3f64.sqrt();
                rng.random_range(-half_width..=half_width)
            }
            FluctuationKind::Rayleigh => {
                // scale chosen so var = sigma^2, then recentered to zero mean
                let scale = self.sigma_db / (2.0 - std::f64::consts::FRAC_PI_2).sqrt();
                let mean = scale * (std::f64::consts::FRAC_PI_2).sqrt();
                // inverse-CDF draw: R = scale * sqrt(-2 ln U), U in (0, 1]
                let u: f64 = 1.0 - rng.random::<f64>();
                scale * (-2.0 * u.ln()).sqrt() - mean
            }
        }
    }
}

/// Per-beam mean RSS landscape plus the fluctuation law: everything the
/// bandit environment needs to produce rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssModel {
    pub mean_rss_dbm: Vec<f64>,
    pub fluctuation: FluctuationModel,
    pub signal_floor_dbm: f64,
    pub signal_ceil_dbm: f64,
}

impl RssModel {
    pub fn from_channel(
        channel: &MultipathChannel,
        array: &ArrayConfig,
        codebook: &BeamCodebook,
        fluctuation: FluctuationModel,
    ) -> Result<Self> {
        let mean_rss_dbm = (1..=codebook.n_beams())
            .map(|i| mean_rss_dbm(channel, array, codebook, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mean_rss_dbm,
            fluctuation,
            signal_floor_dbm: -80.0,
            signal_ceil_dbm: -20.0,
        })
    }

    pub fn n_beams(&self) -> usize {
        self.mean_rss_dbm.len()
    }

    /// One noisy RSS sample for a beam (1-based index).
    pub fn sample_rss_dbm<R: Rng + ?Sized>(&self, beam_index: usize, rng: &mut R) -> Result<f64> {
        let mean = self
            .mean_rss_dbm
            .get(beam_index.wrapping_sub(1))
            .ok_or_else(|| {
                Error::ProtocolViolation(format!(
                    "beam index {beam_index} out of range 1..={}",
                    self.n_beams()
                ))
            })?;
        Ok(mean + self.fluctuation.sample_db(rng))
    }

    /// Affine dBm-to-reward map, clamped to `[0, 1]`.
    pub fn normalize_reward(&self, rss_dbm: f64) -> f64 {
        let span = self.signal_ceil_dbm - self.signal_floor_dbm;
        ((rss_dbm - self.signal_floor_dbm) / span).clamp(0.0, 1.0)
    }

    /// Clean per-beam mean rewards (normalized mean RSS, no fluctuation).
    pub fn mean_rewards(&self) -> Vec<f64> {
        self.mean_rss_dbm
            .iter()
            .map(|&rss| self.normalize_reward(rss))
            .collect()
    }

    /// 1-based index of the beam with the largest mean RSS.
    pub fn optimal_beam(&self) -> usize {
        self.mean_rss_dbm
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i + 1)
            .unwrap()
    }
}

/// Indices (0-based) of the strict local maxima of `values` on the cyclic
/// graph, with plateaus within `tol` collapsed to their highest point.
pub fn local_maxima(values: &[f64], tol: f64) -> Vec<usize> {
    let n = values.len();
    if n < 2 {
        return vec![];
    }
    // significant cyclic differences v[i+1] - v[i]
    let mut sig: Vec<(usize, i8)> = Vec::new();
    for i in 0..n {
        let d = values[(i + 1) % n] - values[i];
        if d > tol {
            sig.push((i, 1));
        } else if d < -tol {
            sig.push((i, -1));
        }
    }
    if sig.is_empty() {
        return vec![];
    }
    let mut peaks = Vec::new();
    for k in 0..sig.len() {
        let (p, s) = sig[k];
        let (q, s_next) = sig[(k + 1) % sig.len()];
        if s > 0 && s_next < 0 {
            // the plateau spans indices p+1 ..= q (cyclically)
            let span = (q + n - (p + 1)) % n;
            let best = (0..=span)
                .map(|off| (p + 1 + off) % n)
                .max_by(|&a, &b| values[a].total_cmp(&values[b]))
                .unwrap();
            peaks.push(best);
        }
    }
    peaks.sort_unstable();
    peaks
}

/// True iff `values` has exactly one local maximum on the cyclic beam graph
/// (plateaus within an absolute tolerance of `1e-12` are collapsed). A
/// constant list counts as unimodal.
pub fn check_unimodal_cyclic(values: &[f64]) -> Result<bool> {
    if values.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "unimodality check needs at least 3 values, got {}",
            values.len()
        )));
    }
    let peaks = local_maxima(values, UNIMODAL_TOL);
    Ok(peaks.len() <= 1)
}
