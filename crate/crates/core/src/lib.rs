//! Beam alignment simulation library.
//!
//! The crate models a point-to-point mmwave link where a transmitter with a
//! DFT beam codebook must find the beam that maximizes received signal
//! strength. Beam search is framed as a stochastic bandit problem over the
//! beam space:
//!
//! * [`channel`] — sparse multipath channel draws, antenna directivity,
//!   per-beam mean RSS and noisy reward sampling.
//! * [`bandit`] — the episode loop, the policy trait shared by all
//!   algorithms, and regret accounting.
//! * [`hba`] — hierarchical search over an incrementally grown binary tree
//!   with optimistic per-region reward bounds.
//! * [`baselines`] — exhaustive sweep, UCB, HOO, and hill-climbing
//!   comparison policies.
//! * [`latency`] — 802.11ad A-BFT / beacon-interval latency accounting.
//! * [`harness`] — Monte-Carlo experiment runner, metric aggregation,
//!   config parsing and CSV/JSON output.

pub mod bandit;
pub mod baselines;
pub mod channel;
pub mod harness;
pub mod hba;
pub mod latency;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
