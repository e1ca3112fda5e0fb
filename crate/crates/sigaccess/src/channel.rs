//! Base-station side of the preamble channel: noisy per-RAO observation of
//! superposed transmissions.
//!
//! The BS sees each RAO as a set of detected preambles. A preamble activated
//! by one or more devices is detected with probability `p_d` (one Bernoulli
//! draw per preamble, never per device — the BS cannot count activations),
//! and an idle preamble is falsely detected with probability `p_f`. The
//! observation of a whole frame is therefore the bit-wise OR of the detected
//! signatures.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("detection model requires 0 <= p_f < p_d <= 1, got p_d={p_detect}, p_f={p_false}")]
    InvalidDetectionModel { p_detect: f64, p_false: f64 },
}

/// Set of preamble indices in `1..=M`, backed by a fixed-width bitmap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreambleSet {
    words: Vec<u64>,
    capacity: u32,
}

impl PreambleSet {
    pub fn new(capacity: u32) -> Self {
        PreambleSet {
            words: vec![0; capacity.div_ceil(64) as usize],
            capacity,
        }
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    /// Inserts preamble `p` (1-based). Re-inserting is a no-op: the set keeps
    /// activation, not multiplicity.
    pub fn insert(&mut self, preamble: u32) {
        assert!(
            (1..=self.capacity).contains(&preamble),
            "preamble {preamble} out of range 1..={}",
            self.capacity
        );
        let bit = preamble - 1;
        self.words[(bit / 64) as usize] |= 1 << (bit % 64);
    }

    pub fn contains(&self, preamble: u32) -> bool {
        if !(1..=self.capacity).contains(&preamble) {
            return false;
        }
        let bit = preamble - 1;
        self.words[(bit / 64) as usize] & (1 << (bit % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Iterates set preambles in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        (1..=self.capacity).filter(move |&p| self.contains(p))
    }

    pub fn clear(&mut self) {
        self.words.fill(0);
    }

    pub fn union_with(&mut self, other: &PreambleSet) {
        assert_eq!(self.capacity, other.capacity);
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            *w |= o;
        }
    }
}

/// Per-RAO detected preamble sets, growing as RAOs arrive.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrameObservation {
    raos: Vec<PreambleSet>,
}

impl FrameObservation {
    pub fn new() -> Self {
        FrameObservation::default()
    }

    pub fn push_rao(&mut self, detected: PreambleSet) {
        self.raos.push(detected);
    }

    /// Detected set of the given RAO (1-based). Panics if the RAO has not
    /// been received yet.
    pub fn rao(&self, rao: u32) -> &PreambleSet {
        &self.raos[rao as usize - 1]
    }

    pub fn num_raos(&self) -> u32 {
        self.raos.len() as u32
    }
}

/// Preamble detector error model: `0 <= p_f < p_d <= 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionModel {
    pub p_detect: f64,
    pub p_false: f64,
}

impl DetectionModel {
    /// Error-free detection.
    pub const PERFECT: DetectionModel = DetectionModel {
        p_detect: 1.0,
        p_false: 0.0,
    };

    pub fn new(p_detect: f64, p_false: f64) -> Result<Self, ChannelError> {
        if !(p_false >= 0.0 && p_false < p_detect && p_detect <= 1.0) {
            return Err(ChannelError::InvalidDetectionModel { p_detect, p_false });
        }
        Ok(DetectionModel { p_detect, p_false })
    }
}

/// Synthesizes the detected preamble set for one RAO.
///
/// `transmitted` is the superposition of every device's activation in this
/// RAO; one detection draw is made per preamble slot regardless of how many
/// devices activated it. All `M` slots get a draw, so the output sequence is
/// a pure function of the RNG state.
pub fn observe_rao<R: Rng>(
    transmitted: &PreambleSet,
    model: &DetectionModel,
    rng: &mut R,
) -> PreambleSet {
    let mut detected = PreambleSet::new(transmitted.capacity());
    for preamble in 1..=transmitted.capacity() {
        let p = if transmitted.contains(preamble) {
            model.p_detect
        } else {
            model.p_false
        };
        if rng.random::<f64>() < p {
            detected.insert(preamble);
        }
    }
    detected
}
