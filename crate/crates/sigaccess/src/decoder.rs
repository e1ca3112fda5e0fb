//! Base-station signature detection: end-of-frame matching and the
//! per-RAO iterative peeling decoder with early-stop feedback.
//!
//! The BS knows every signature that could appear in the frame (it derives
//! them from the per-device secrets and the broadcast challenge) and decodes
//! against that candidate list:
//!
//! * a candidate whose slot preamble is missing from the detected set of its
//!   RAO is eliminated;
//! * every detected slot carries the set of candidates that could explain it
//!   — still-possible contenders that would have transmitted there;
//! * when an explanation set shrinks to a single still-undecided candidate,
//!   that candidate is declared active, stop feedback is sent, and the
//!   device drops out of explanation sets of later RAOs;
//! * at frame end all candidates neither eliminated nor decoded are declared
//!   active (they satisfy the bit-wise AND activity test), which is where
//!   false positives come from.
//!
//! Explanation sets whose last explainer is eliminated are attributed to
//! false alarms and discarded; that is channel noise, not a decoder failure.

use crate::channel::{observe_rao, DetectionModel, FrameObservation, PreambleSet};
use crate::signature::{Signature, SignatureParams};
use rand::Rng;
use std::collections::BTreeSet;

pub type DeviceId = u32;

/// Per-device signatures the BS matches against (one per device in the
/// cell, generated BS-side for the current challenge).
#[derive(Clone, Debug)]
pub struct CandidateRegistry {
    params: SignatureParams,
    devices: Vec<DeviceId>,
    signatures: Vec<Signature>,
}

impl CandidateRegistry {
    pub fn new(params: SignatureParams) -> Self {
        CandidateRegistry {
            params,
            devices: Vec::new(),
            signatures: Vec::new(),
        }
    }

    pub fn with_entries(
        params: SignatureParams,
        entries: impl IntoIterator<Item = (DeviceId, Signature)>,
    ) -> Self {
        let mut registry = CandidateRegistry::new(params);
        for (device, signature) in entries {
            registry.insert(device, signature);
        }
        registry
    }

    pub fn insert(&mut self, device: DeviceId, signature: Signature) {
        debug_assert!(
            !self.devices.contains(&device),
            "device {device} already registered"
        );
        self.devices.push(device);
        self.signatures.push(signature);
    }

    pub fn params(&self) -> &SignatureParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (DeviceId, &Signature)> {
        self.devices.iter().copied().zip(self.signatures.iter())
    }

    pub fn signature_of(&self, device: DeviceId) -> Option<&Signature> {
        self.devices
            .iter()
            .position(|&d| d == device)
            .map(|i| &self.signatures[i])
    }

    pub fn device_at(&self, index: usize) -> DeviceId {
        self.devices[index]
    }

    pub fn signature_at(&self, index: usize) -> &Signature {
        &self.signatures[index]
    }
}

/// End-of-frame matching: every candidate whose signature survives the
/// bit-wise AND test against the complete observation is declared active.
/// The result may contain false positives.
pub fn decode_full(obs: &FrameObservation, registry: &CandidateRegistry) -> Vec<DeviceId> {
    assert!(
        obs.num_raos() >= registry.params().frame_len,
        "observation covers {} of {} RAOs",
        obs.num_raos(),
        registry.params().frame_len
    );
    registry
        .iter()
        .filter(|(_, sig)| sig.matches(obs))
        .map(|(device, _)| device)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeEventKind {
    Eliminated,
    DecodedActive,
    StopFeedbackSent,
    FalsePositiveDeclared,
}

impl DecodeEventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DecodeEventKind::Eliminated => "eliminated",
            DecodeEventKind::DecodedActive => "decoded_active",
            DecodeEventKind::StopFeedbackSent => "stop_feedback_sent",
            DecodeEventKind::FalsePositiveDeclared => "false_positive_declared",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecodeEvent {
    pub rao: u32,
    pub kind: DecodeEventKind,
    pub device: DeviceId,
}

/// Time-stamped decode/eliminate/stop-feedback events of one signature frame.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DecodeTrace {
    pub events: Vec<DecodeEvent>,
    /// RAOs actually consumed; less than the frame length when every
    /// candidate was decided early.
    pub raos_used: u32,
}

impl DecodeTrace {
    /// CSV rows `rao_index,event,device_id` (no header).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            out.push_str(&format!(
                "{},{},{}\n",
                event.rao,
                event.kind.as_str(),
                event.device
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CandidateState {
    Pending,
    Eliminated,
    Decoded { rao: u32 },
}

struct ObservedSlot {
    rao: u32,
    preamble: u32,
    /// Candidates that could explain this activation at observation time
    /// (not eliminated, still transmitting when the RAO was received).
    explainers: Vec<usize>,
    /// Explainers not yet eliminated. Decoded explainers stay counted: they
    /// did transmit here, so the activation remains explained by them.
    remaining: usize,
    resolved: bool,
}

/// Iterative peeling decoder. Feed detected sets RAO by RAO with
/// [`IterativeDecoder::push_rao`]; newly decoded devices are returned so the
/// caller can issue stop feedback (effective from the next RAO). Call
/// [`IterativeDecoder::finish`] at frame end to declare the survivors.
pub struct IterativeDecoder<'a> {
    registry: &'a CandidateRegistry,
    feedback: bool,
    state: Vec<CandidateState>,
    /// Slot index: for each RAO (0-based), the (preamble, candidate) pairs
    /// that would transmit there, sorted by preamble.
    by_rao: Vec<Vec<(u32, usize)>>,
    slots: Vec<ObservedSlot>,
    /// Reverse index: observed slots each pending candidate explains.
    explaining: Vec<Vec<usize>>,
    events: Vec<DecodeEvent>,
    current_rao: u32,
    pending: usize,
}

/// Result of a finished frame.
#[derive(Clone, Debug)]
pub struct DecodeOutcome {
    /// All declared-active devices: peeled mid-frame plus end-of-frame
    /// survivors, in declaration order.
    pub declared: Vec<DeviceId>,
    /// Subset of `declared` that was only declared at frame end (neither
    /// eliminated nor peeled mid-frame).
    pub declared_at_frame_end: Vec<DeviceId>,
    pub trace: DecodeTrace,
}

impl<'a> IterativeDecoder<'a> {
    /// `feedback` controls early stopping: when true, a decoded device stops
    /// transmitting from the next RAO and is excluded from explanation sets
    /// of later RAOs. When false (diagnostic mode), devices transmit their
    /// whole signature and the decoder reduces to end-of-frame matching.
    pub fn new(registry: &'a CandidateRegistry, feedback: bool) -> Self {
        let frame_len = registry.params().frame_len as usize;
        let mut by_rao: Vec<Vec<(u32, usize)>> = vec![Vec::new(); frame_len];
        for (index, (_, signature)) in registry.iter().enumerate() {
            for slot in signature.slots() {
                by_rao[slot.rao as usize - 1].push((slot.preamble, index));
            }
        }
        for entries in &mut by_rao {
            entries.sort_unstable();
        }
        IterativeDecoder {
            registry,
            feedback,
            state: vec![CandidateState::Pending; registry.len()],
            by_rao,
            slots: Vec::new(),
            explaining: vec![Vec::new(); registry.len()],
            events: Vec::new(),
            current_rao: 0,
            pending: registry.len(),
        }
    }

    /// Consumes the next RAO's detected set and peels to fixpoint. Returns
    /// devices decoded during this RAO, in declaration order.
    pub fn push_rao(&mut self, detected: &PreambleSet) -> Vec<DeviceId> {
        assert!(
            self.current_rao < self.registry.params().frame_len,
            "frame already complete"
        );
        let rao = self.current_rao + 1;
        self.current_rao = rao;
        let rao_idx = rao as usize - 1;

        // Slots whose explanation set may have become decisive, processed in
        // (rao, preamble) order for reproducible traces.
        let mut queue: BTreeSet<(u32, u32, usize)> = BTreeSet::new();

        // 1) Elimination: candidates that would have transmitted an
        //    undetected preamble in this RAO are out.
        let entries = std::mem::take(&mut self.by_rao[rao_idx]);
        for &(preamble, candidate) in &entries {
            if self.state[candidate] == CandidateState::Pending && !detected.contains(preamble) {
                self.eliminate(candidate, rao, &mut queue);
            }
        }

        // 2) Explanation sets for this RAO's detected preambles.
        let mut i = 0;
        while i < entries.len() {
            let preamble = entries[i].0;
            let mut j = i;
            while j < entries.len() && entries[j].0 == preamble {
                j += 1;
            }
            if detected.contains(preamble) {
                let mut explainers = Vec::new();
                for &(_, candidate) in &entries[i..j] {
                    let explains = match self.state[candidate] {
                        CandidateState::Pending => true,
                        // Stop feedback takes effect from the RAO after the
                        // decode, so a device decoded in this very RAO still
                        // transmitted here.
                        CandidateState::Decoded { rao: decoded_rao } => {
                            !self.feedback || decoded_rao == rao
                        }
                        CandidateState::Eliminated => false,
                    };
                    if explains {
                        explainers.push(candidate);
                    }
                }
                if !explainers.is_empty() {
                    let slot_index = self.slots.len();
                    let remaining = explainers.len();
                    for &candidate in &explainers {
                        if self.state[candidate] == CandidateState::Pending {
                            self.explaining[candidate].push(slot_index);
                        }
                    }
                    self.slots.push(ObservedSlot {
                        rao,
                        preamble,
                        explainers,
                        remaining,
                        resolved: false,
                    });
                    if remaining == 1 {
                        queue.insert((rao, preamble, slot_index));
                    }
                }
                // A detected preamble no candidate can explain is attributed
                // to a false alarm and ignored.
            }
            i = j;
        }
        self.by_rao[rao_idx] = entries;

        // 3) Peel to fixpoint.
        let mut decoded_now = Vec::new();
        while let Some((_, _, slot_index)) = queue.pop_first() {
            if self.slots[slot_index].resolved {
                continue;
            }
            match self.slots[slot_index].remaining {
                // Every explainer eliminated: the activation was a false
                // alarm. Discard the slot.
                0 => self.slots[slot_index].resolved = true,
                1 => {
                    let survivor = self.slots[slot_index]
                        .explainers
                        .iter()
                        .copied()
                        .find(|&c| self.state[c] != CandidateState::Eliminated)
                        .expect("remaining count says one explainer is left");
                    self.slots[slot_index].resolved = true;
                    if self.state[survivor] == CandidateState::Pending {
                        self.decode(survivor, rao);
                        decoded_now.push(self.registry.devices[survivor]);
                    }
                    // A decoded survivor keeps the slot explained; nothing
                    // further can be inferred from it.
                }
                _ => {}
            }
        }
        decoded_now
    }

    fn eliminate(&mut self, candidate: usize, rao: u32, queue: &mut BTreeSet<(u32, u32, usize)>) {
        self.state[candidate] = CandidateState::Eliminated;
        self.pending -= 1;
        self.events.push(DecodeEvent {
            rao,
            kind: DecodeEventKind::Eliminated,
            device: self.registry.devices[candidate],
        });
        for &slot_index in &self.explaining[candidate] {
            let slot = &mut self.slots[slot_index];
            if slot.resolved {
                continue;
            }
            slot.remaining -= 1;
            if slot.remaining <= 1 {
                queue.insert((slot.rao, slot.preamble, slot_index));
            }
        }
    }

    fn decode(&mut self, candidate: usize, rao: u32) {
        self.state[candidate] = CandidateState::Decoded { rao };
        self.pending -= 1;
        let device = self.registry.devices[candidate];
        self.events.push(DecodeEvent {
            rao,
            kind: DecodeEventKind::DecodedActive,
            device,
        });
        if self.feedback {
            self.events.push(DecodeEvent {
                rao,
                kind: DecodeEventKind::StopFeedbackSent,
                device,
            });
        }
    }

    /// True when every candidate is decided; the rest of the frame carries
    /// no information and the frame can end early.
    pub fn is_resolved(&self) -> bool {
        self.pending == 0
    }

    pub fn raos_consumed(&self) -> u32 {
        self.current_rao
    }

    /// Ends the frame: candidates neither eliminated nor decoded match the
    /// full observation and are declared active.
    pub fn finish(mut self) -> DecodeOutcome {
        let final_rao = self.current_rao;
        let mut declared: Vec<DeviceId> = Vec::new();
        for event in &self.events {
            if event.kind == DecodeEventKind::DecodedActive {
                declared.push(event.device);
            }
        }
        let mut declared_at_frame_end = Vec::new();
        for candidate in 0..self.state.len() {
            if self.state[candidate] == CandidateState::Pending {
                let device = self.registry.devices[candidate];
                self.events.push(DecodeEvent {
                    rao: final_rao,
                    kind: DecodeEventKind::DecodedActive,
                    device,
                });
                declared.push(device);
                declared_at_frame_end.push(device);
            }
        }
        DecodeOutcome {
            declared,
            declared_at_frame_end,
            trace: DecodeTrace {
                events: self.events,
                raos_used: final_rao,
            },
        }
    }
}

impl DecodeOutcome {
    /// Appends `false_positive_declared` events for declared devices that
    /// were not truly active. Only the caller knows the ground truth, so
    /// annotation happens outside the decoder.
    pub fn annotate_false_positives(&mut self, truly_active: &[DeviceId]) -> Vec<DeviceId> {
        let rao = self.trace.raos_used;
        let mut phantoms = Vec::new();
        for &device in &self.declared {
            if !truly_active.contains(&device) {
                phantoms.push(device);
                self.trace.events.push(DecodeEvent {
                    rao,
                    kind: DecodeEventKind::FalsePositiveDeclared,
                    device,
                });
            }
        }
        phantoms
    }
}

/// Drives one whole signature frame: synthesizes per-RAO transmissions of
/// the active devices (honoring stop feedback), passes them through the
/// detection model, and feeds the decoder. Ends the frame early once every
/// candidate is decided.
pub fn run_frame<R: Rng>(
    registry: &CandidateRegistry,
    truly_active: &[DeviceId],
    model: &DetectionModel,
    rng: &mut R,
    feedback: bool,
) -> DecodeOutcome {
    let params = *registry.params();
    let mut decoder = IterativeDecoder::new(registry, feedback);
    let mut stopped: Vec<DeviceId> = Vec::new();
    for rao in 1..=params.frame_len {
        let mut transmitted = PreambleSet::new(params.preambles_per_rao);
        for &device in truly_active {
            if feedback && stopped.contains(&device) {
                continue;
            }
            let signature = registry
                .signature_of(device)
                .expect("active device not in registry");
            if let Some(slot) = signature.slot_at(rao) {
                transmitted.insert(slot.preamble);
            }
        }
        let detected = observe_rao(&transmitted, model, rng);
        let decoded = decoder.push_rao(&detected);
        stopped.extend(decoded);
        if decoder.is_resolved() {
            break;
        }
    }
    let mut outcome = decoder.finish();
    outcome.annotate_false_positives(truly_active);
    outcome
}
