//! 802.11ad beam-training latency accounting.
//!
//! Beam measurements happen in SSW frames inside the A-BFT stage of each
//! beacon interval. Frames that do not fit into the current interval's
//! A-BFT budget roll over to the next beacon interval, adding a full
//! interval of waiting.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A-BFT structure and frame timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbftConfig {
    pub abft_slots_per_bi: u64,
    pub ssw_frames_per_slot: u64,
    pub t_ssw_us: f64,
    pub t_bi_ms: f64,
    pub t_feedback_us: f64,
    /// Per-BI frame budget override; defaults to 256 when unset.
    pub frames_per_bi_override: Option<u64>,
}

impl Default for AbftConfig {
    fn default() -> Self {
        Self {
            abft_slots_per_bi: 8,
            ssw_frames_per_slot: 16,
            t_ssw_us: 15.8,
            t_bi_ms: 100.0,
            t_feedback_us: 1.0,
            frames_per_bi_override: None,
        }
    }
}

impl AbftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.abft_slots_per_bi == 0
            || self.ssw_frames_per_slot == 0
            || self.t_ssw_us <= 0.0
            || self.t_bi_ms <= 0.0
            || self.t_feedback_us < 0.0
            || self.frames_per_bi_override == Some(0)
        {
            return Err(Error::InvalidConfig(
                "A-BFT timing parameters must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Frames servable per beacon interval.
    pub fn frames_per_bi(&self) -> u64 {
        self.frames_per_bi_override.unwrap_or(256)
    }
}

/// Completion time of a frame schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyResult {
    pub total_ms: f64,
    pub bi_spans: u64,
    pub frames_scheduled: u64,
}

/// Packs `frames` sequential frames of duration `per_frame_us` into beacon
/// intervals of capacity `frames_per_bi` and returns when the last frame
/// completes.
fn schedule(frames: u64, per_frame_us: f64, config: &AbftConfig) -> LatencyResult {
    let capacity = config.frames_per_bi();
    let full_bis = frames / capacity;
    let remainder = frames % capacity;
    let (bi_spans, frames_in_final_bi) = if remainder == 0 {
        (full_bis.max(1), if frames == 0 { 0 } else { capacity })
    } else {
        (full_bis + 1, remainder)
    };
    LatencyResult {
        total_ms: (bi_spans - 1) as f64 * config.t_bi_ms
            + frames_in_final_bi as f64 * per_frame_us / 1000.0,
        bi_spans,
        frames_scheduled: frames,
    }
}

/// Latency of the two-step exhaustive sweep: `2 N` SSW frames per user, no
/// feedback frames, users served first come first served.
pub fn exhaustive_latency(n_beams: usize, n_users: usize, config: &AbftConfig) -> Result<LatencyResult> {
    if n_beams < 2 || n_users < 1 {
        return Err(Error::InvalidConfig(format!(
            "need n_beams >= 2 and n_users >= 1, got N={n_beams}, users={n_users}"
        )));
    }
    config.validate()?;
    let frames = 2 * n_beams as u64 * n_users as u64;
    Ok(schedule(frames, config.t_ssw_us, config))
}

/// Latency of a learning policy that spends `n_measurements` frames, each
/// followed by an RSS feedback frame.
pub fn learning_latency(
    n_measurements: usize,
    n_users: usize,
    config: &AbftConfig,
) -> Result<LatencyResult> {
    if n_measurements < 1 || n_users < 1 {
        return Err(Error::InvalidConfig(format!(
            "need n_measurements >= 1 and n_users >= 1, got M={n_measurements}, users={n_users}"
        )));
    }
    config.validate()?;
    let frames = n_measurements as u64 * n_users as u64;
    Ok(schedule(frames, config.t_ssw_us + config.t_feedback_us, config))
}
