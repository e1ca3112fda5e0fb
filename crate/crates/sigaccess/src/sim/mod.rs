//! Discrete-event simulation of both connection-establishment protocols:
//! the signature-based scheme (gated frames, iterative decoding with stop
//! feedback) and the cellular baseline (preamble contention, RAR, connection
//! request, contention resolution), in a full variant with the
//! authentication/security exchange and an MTC-optimized variant without it.
//!
//! Every run is a pure function of its [`ScenarioConfig`], including the
//! seed: one seeded permutation-based RNG drives arrivals, channel noise and
//! backoff draws in a fixed order.

mod config;
mod lte;
mod metrics;
mod signature_run;
mod sweep;

pub use config::{Protocol, ScenarioConfig};
pub use lte::run_lte;
pub use metrics::{AccessMetrics, MetricSummary};
pub use signature_run::{run_signature, SignatureRun};
pub use sweep::{derive_seed, run_scenario, sweep, RunResult, SweepPoint};

use crate::channel::ChannelError;
use crate::design::DesignError;
use crate::signature::SignatureError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Signature(#[from] SignatureError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

impl SimError {
    /// Infeasible frame designs get their own exit path in the CLI.
    pub fn is_infeasible_design(&self) -> bool {
        matches!(self, SimError::Design(DesignError::Infeasible { .. }))
    }
}
