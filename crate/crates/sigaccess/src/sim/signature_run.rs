//! Signature-protocol engine: gated frames, per-RAO decoding with stop
//! feedback, and the embedded mutual authentication exchange.
//!
//! Access is gated on the frame basis: arrivals during one frame contend at
//! the start of the next. Every sub-frame of a signature frame is a RAO. A
//! fresh challenge is broadcast per frame, so signatures re-randomize every
//! frame; the BS regenerates the full candidate registry accordingly. A
//! device decoded mid-frame receives the resource-allocation message
//! (doubling as stop feedback and carrying the network-authentication code)
//! and answers with its data; a contender wrongly eliminated by a missed
//! detection fails the frame and re-enters contention as a fresh arrival in
//! the next one.

use super::config::{Protocol, ScenarioConfig};
use super::metrics::AccessMetrics;
use super::SimError;
use crate::auth::{auth_vector, f1, AuthChallenge, SecretKey};
use crate::channel::{observe_rao, DetectionModel, PreambleSet};
use crate::decoder::{CandidateRegistry, DecodeTrace, DeviceId, IterativeDecoder};
use crate::design::{self, FrameDesign};
use crate::signature::{Signature, SignatureParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};

/// Fixed per-run sequence number and management field; replay-window logic
/// is not modeled.
const SQN: [u8; 6] = [0, 0, 0, 0, 0, 1];
const AMF: [u8; 2] = [0x80, 0x00];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum DeviceStatus {
    Idle,
    /// Arrived; transmits in the next frame.
    Gated,
    /// Transmitting in the current frame.
    Contending,
}

/// Output of one signature-protocol run.
#[derive(Clone, Debug)]
pub struct SignatureRun {
    pub metrics: AccessMetrics,
    /// Frame design the run used.
    pub design: FrameDesign,
    /// Decode traces of the first `trace_frames` frames, with false
    /// positives annotated.
    pub traces: Vec<DecodeTrace>,
}

pub fn run_signature(cfg: &ScenarioConfig) -> Result<SignatureRun, SimError> {
    cfg.validate()?;
    if cfg.protocol != Protocol::Signature {
        return Err(SimError::InvalidConfig(format!(
            "signature engine invoked with protocol {}",
            cfg.protocol
        )));
    }
    let model = DetectionModel::new(cfg.p_detect, cfg.p_false)?;
    let design = design::frame_length(
        cfg.population,
        cfg.lambda,
        cfg.weight,
        cfg.preambles_per_rao,
        &model,
        cfg.goodput_target,
    )?;
    let frame_len = design.frame_len;
    let params = SignatureParams::new(frame_len, cfg.weight, cfg.preambles_per_rao)?;

    let t = cfg.population as usize;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let secrets: Vec<SecretKey> = (0..t).map(|_| SecretKey(rng.random())).collect();
    let arrivals_per_subframe = Binomial::new(t as u64, cfg.lambda / t as f64)
        .map_err(|e| SimError::InvalidConfig(format!("arrival distribution: {e}")))?;

    let mut status = vec![DeviceStatus::Idle; t];
    // Payload units awaiting the outcome of each device's contention,
    // recorded by arrival sub-frame. New arrivals to a busy device append.
    let mut pending_units: Vec<Vec<u64>> = vec![Vec::new(); t];
    let mut gated: Vec<DeviceId> = Vec::new();
    let mut shuffle_pool: Vec<u32> = (0..t as u32).collect();

    // Reused per-frame scratch.
    let mut is_contender = vec![false; t];
    let mut completed = vec![false; t];
    let mut episode_messages = vec![0u32; t];

    let mut traces = Vec::new();
    let message_bound = cfg.weight + 2;

    // Accumulators.
    let mut arrivals_total = 0u64;
    let mut successes = 0u64;
    let mut failures = 0u64;
    let mut latency_ms_sum = 0.0f64;
    let mut messages_sum = 0u64;
    let mut max_episode_messages = 0u32;
    let mut goodput_ratio_sum = 0.0f64;
    let mut goodput_frames = 0u32;
    let mut false_positives = 0u64;
    let mut collisions = 0u64;

    for frame in 0..cfg.n_frames {
        let frame_start = frame as u64 * frame_len as u64;
        let frame_end_sf = frame_start + frame_len as u64 - 1;

        let contenders: Vec<DeviceId> = std::mem::take(&mut gated);
        for &d in &contenders {
            let d = d as usize;
            status[d] = DeviceStatus::Contending;
            is_contender[d] = true;
            completed[d] = false;
            episode_messages[d] = 0;
        }

        // Fresh broadcast challenge; the BS regenerates every candidate
        // signature for it.
        let rand: [u8; 16] = rng.random();
        let challenge = AuthChallenge::new(rand, SQN, AMF);
        let registry = CandidateRegistry::with_entries(
            params,
            (0..t).map(|h| {
                (
                    h as DeviceId,
                    Signature::derive(crate::auth::f2(&secrets[h], &rand), &params),
                )
            }),
        );

        // Signature collisions among this frame's contenders.
        if contenders.len() > 1 {
            let mut sigs: Vec<&Signature> = contenders
                .iter()
                .map(|&d| registry.signature_at(d as usize))
                .collect();
            sigs.sort_unstable();
            collisions += sigs.windows(2).filter(|w| w[0] == w[1]).count() as u64;
        }

        let mut decoder = IterativeDecoder::new(&registry, true);
        let mut resolved = false;
        let mut decode_concluded_sf = frame_end_sf;
        let mut true_declared = 0u64;
        let mut phantoms = 0u64;
        let mut transmitted = PreambleSet::new(cfg.preambles_per_rao);

        for rao in 1..=frame_len {
            let sf = frame_start + rao as u64 - 1;

            // Arrivals during this sub-frame, gated to the next frame.
            let n_arrivals = arrivals_per_subframe.sample(&mut rng) as usize;
            for i in 0..n_arrivals {
                let j = rng.random_range(i..t);
                shuffle_pool.swap(i, j);
                let d = shuffle_pool[i] as usize;
                arrivals_total += 1;
                match status[d] {
                    DeviceStatus::Idle => {
                        status[d] = DeviceStatus::Gated;
                        pending_units[d].push(sf);
                        gated.push(d as DeviceId);
                    }
                    // Already gated or contending: the new packet's data is
                    // appended to the pending transmission.
                    DeviceStatus::Gated | DeviceStatus::Contending => {
                        pending_units[d].push(sf);
                    }
                }
            }

            // Physical transmissions: contenders not yet stopped send their
            // slot for this RAO (eliminated devices get no feedback and keep
            // transmitting to frame end).
            transmitted.clear();
            for &d in &contenders {
                let d = d as usize;
                if completed[d] {
                    continue;
                }
                if let Some(slot) = registry.signature_at(d).slot_at(rao) {
                    transmitted.insert(slot.preamble);
                    episode_messages[d] += 1;
                }
            }

            if !resolved {
                let detected = observe_rao(&transmitted, &model, &mut rng);
                let newly_decoded = decoder.push_rao(&detected);
                for device in newly_decoded {
                    let d = device as usize;
                    if is_contender[d] && !completed[d] {
                        // Resource allocation + stop feedback, carrying the
                        // network-authentication code; the device verifies it
                        // and answers with its data.
                        complete_access(
                            d,
                            sf,
                            &challenge,
                            &secrets,
                            &mut status,
                            &mut pending_units,
                            &mut completed,
                            &mut episode_messages,
                            &mut successes,
                            &mut latency_ms_sum,
                            cfg.subframe_ms,
                        );
                        true_declared += 1;
                    } else {
                        // Wasted downlink grant for a phantom signature.
                        phantoms += 1;
                    }
                }
                if decoder.is_resolved() {
                    resolved = true;
                    decode_concluded_sf = sf;
                }
            }
        }

        let mut outcome = decoder.finish();

        // Candidates neither eliminated nor peeled match the whole
        // observation and are declared at frame end.
        for &device in &outcome.declared_at_frame_end {
            let d = device as usize;
            if is_contender[d] && !completed[d] {
                complete_access(
                    d,
                    decode_concluded_sf,
                    &challenge,
                    &secrets,
                    &mut status,
                    &mut pending_units,
                    &mut completed,
                    &mut episode_messages,
                    &mut successes,
                    &mut latency_ms_sum,
                    cfg.subframe_ms,
                );
                true_declared += 1;
            } else {
                phantoms += 1;
            }
        }

        // Contenders that were never declared were wrongly eliminated by a
        // missed detection: the frame failed for them. They re-enter as
        // fresh arrivals in the next frame.
        for &device in &contenders {
            let d = device as usize;
            if !completed[d] {
                for arrival_sf in pending_units[d].drain(..) {
                    failures += 1;
                    latency_ms_sum += (frame_end_sf - arrival_sf) as f64 * cfg.subframe_ms;
                }
                status[d] = DeviceStatus::Gated;
                pending_units[d].push(frame_end_sf);
                gated.push(device);
                arrivals_total += 1;
            }
        }

        // Per-episode message accounting and the overhead hard bound.
        for &device in &contenders {
            let d = device as usize;
            let msgs = episode_messages[d];
            debug_assert!(msgs <= message_bound, "device {device} sent {msgs} messages");
            messages_sum += msgs as u64;
            max_episode_messages = max_episode_messages.max(msgs);
            is_contender[d] = false;
        }

        if true_declared + phantoms > 0 {
            goodput_ratio_sum += true_declared as f64 / (true_declared + phantoms) as f64;
            goodput_frames += 1;
        }
        false_positives += phantoms;

        if frame < cfg.trace_frames {
            outcome.annotate_false_positives(&contenders);
            traces.push(outcome.trace);
        }
    }

    // Arrivals still gated when the run ends never contended.
    let in_progress: u64 = pending_units.iter().map(|u| u.len() as u64).sum();
    let resolved_arrivals = successes + failures;

    let metrics = AccessMetrics {
        goodput: if goodput_frames > 0 {
            goodput_ratio_sum / goodput_frames as f64
        } else {
            1.0
        },
        reliability: if resolved_arrivals > 0 {
            successes as f64 / resolved_arrivals as f64
        } else {
            1.0
        },
        mean_latency_ms: if resolved_arrivals > 0 {
            latency_ms_sum / resolved_arrivals as f64
        } else {
            0.0
        },
        mean_messages: if resolved_arrivals > 0 {
            messages_sum as f64 / resolved_arrivals as f64
        } else {
            0.0
        },
        false_positive_count: false_positives,
        collision_count: collisions,
        frames_run: cfg.n_frames,
        arrivals: arrivals_total,
        successes,
        failures,
        in_progress,
        max_episode_messages,
    };
    assert!(metrics.conservation_holds(), "arrival conservation violated");

    Ok(SignatureRun {
        metrics,
        design,
        traces,
    })
}

/// Completes a decoded contender: mutual authentication (network code
/// verified device-side, session keys derived on both ends), the resource
/// allocation message and the data transmission, two messages on top of the
/// transmitted preambles.
#[allow(clippy::too_many_arguments)]
fn complete_access(
    d: usize,
    sf: u64,
    challenge: &AuthChallenge,
    secrets: &[SecretKey],
    status: &mut [DeviceStatus],
    pending_units: &mut [Vec<u64>],
    completed: &mut [bool],
    episode_messages: &mut [u32],
    successes: &mut u64,
    latency_ms_sum: &mut f64,
    subframe_ms: f64,
) {
    // Network-to-device authentication: the allocation message carries the
    // f1 output, which the device recomputes and compares. Both sides then
    // derive the cipher/integrity keys.
    let network = auth_vector(&secrets[d], challenge);
    let device_mac = f1(&secrets[d], challenge);
    assert_eq!(network.mac, device_mac, "network authentication must verify");
    let device = auth_vector(&secrets[d], challenge);
    assert_eq!(network.ck, device.ck);
    assert_eq!(network.ik, device.ik);

    episode_messages[d] += 2;
    completed[d] = true;
    status[d] = DeviceStatus::Idle;
    for arrival_sf in pending_units[d].drain(..) {
        *successes += 1;
        *latency_ms_sum += (sf - arrival_sf) as f64 * subframe_ms;
    }
}
