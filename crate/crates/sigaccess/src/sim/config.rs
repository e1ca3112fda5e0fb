//! Scenario parameters shared by both protocol engines.

use super::SimError;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    /// Signature-based access with embedded authentication.
    Signature,
    /// Baseline with the full authentication and security exchange.
    LteFull,
    /// Baseline optimized for MTC: authentication/security signalling
    /// omitted, resource reconfiguration carries the data.
    LteMtc,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Signature, Protocol::LteFull, Protocol::LteMtc];

    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Signature => "signature",
            Protocol::LteFull => "lte_full",
            Protocol::LteMtc => "lte_mtc",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "signature" => Ok(Protocol::Signature),
            "lte_full" => Ok(Protocol::LteFull),
            "lte_mtc" => Ok(Protocol::LteMtc),
            other => Err(format!(
                "unknown protocol {other:?} (expected signature, lte_full or lte_mtc)"
            )),
        }
    }
}

/// Full parameter set of one simulation run.
///
/// Defaults follow a typical cell configuration: 1 ms sub-frames, 54
/// preambles, detection probability 0.99, false-alarm probability 1e-3,
/// 20 ms backoff window, 10 ms RAR window, 40 ms contention-resolution
/// window and at most 10 connection attempts.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub protocol: Protocol,
    /// Population size (T).
    pub population: u32,
    /// Preambles available per RAO (M).
    pub preambles_per_rao: u32,
    /// Preambles per signature (K).
    pub weight: u32,
    /// Mean active devices per RAO (lambda).
    pub lambda: f64,
    /// Goodput target used to dimension the signature frame.
    pub goodput_target: f64,
    /// Preamble detection probability (p_d).
    pub p_detect: f64,
    /// Preamble false-alarm probability (p_f).
    pub p_false: f64,
    /// Sub-frame duration in milliseconds (t_s).
    pub subframe_ms: f64,
    /// Sub-frames between consecutive RAOs in the baseline protocol. The
    /// signature frame always uses consecutive sub-frames as RAOs.
    pub rao_spacing: u32,
    /// Sub-frames a device waits for the random access response.
    pub rar_window: u32,
    /// Sub-frames a device waits for contention resolution.
    pub cr_window: u32,
    /// Backoff window in sub-frames (W).
    pub backoff_window: u32,
    /// Maximum connection attempts per arrival in the baseline (R).
    pub max_attempts: u32,
    /// Signature frames to simulate; for the baseline protocols this counts
    /// sub-frames instead.
    pub n_frames: u32,
    pub seed: u64,
    /// Collect decode traces for the first this-many signature frames.
    pub trace_frames: u32,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            protocol: Protocol::Signature,
            population: 5000,
            preambles_per_rao: 54,
            weight: 4,
            lambda: 1.0,
            goodput_target: 0.99,
            p_detect: 0.99,
            p_false: 1e-3,
            subframe_ms: 1.0,
            rao_spacing: 1,
            rar_window: 10,
            cr_window: 40,
            backoff_window: 20,
            max_attempts: 10,
            n_frames: 500,
            seed: 1,
            trace_frames: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.population == 0 {
            return fail("population must be at least 1".into());
        }
        if self.preambles_per_rao == 0 {
            return fail("preambles_per_rao must be at least 1".into());
        }
        if self.weight == 0 {
            return fail("weight must be at least 1".into());
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.lambda > self.population as f64 {
            return fail(format!(
                "lambda {} exceeds population {}",
                self.lambda, self.population
            ));
        }
        if !(self.goodput_target > 0.0 && self.goodput_target < 1.0) {
            return fail(format!(
                "goodput target must lie in (0,1), got {}",
                self.goodput_target
            ));
        }
        if !(self.p_false >= 0.0 && self.p_false < self.p_detect && self.p_detect <= 1.0) {
            return fail(format!(
                "detection model requires 0 <= p_f < p_d <= 1, got p_d={}, p_f={}",
                self.p_detect, self.p_false
            ));
        }
        if !(self.subframe_ms > 0.0 && self.subframe_ms.is_finite()) {
            return fail(format!(
                "sub-frame duration must be positive, got {}",
                self.subframe_ms
            ));
        }
        if self.rao_spacing == 0 {
            return fail("rao_spacing must be at least 1".into());
        }
        if self.backoff_window == 0 {
            return fail("backoff_window must be at least 1".into());
        }
        if self.max_attempts == 0 {
            return fail("max_attempts must be at least 1".into());
        }
        Ok(())
    }
}
