//! Access signatures: a pattern of preambles spread over a frame of random
//! access opportunities (RAOs), derived deterministically from a device's
//! authentication response.
//!
//! A signature places exactly one preamble in each of `K` distinct RAOs of an
//! `L`-RAO frame, with `M` preambles available per RAO. Construction is
//! two-stage, driven by a stream of hash words derived from the 64-bit
//! authentication response: stage one picks the `K` active RAOs, stage two
//! picks the preamble sent in each of them. Every draw is an independent hash
//! evaluation, so both stages select uniformly. The number of distinct
//! signatures is `C(L,K) * M^K`.

use crate::channel::FrameObservation;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignatureError {
    #[error("frame of {frame_len} RAOs cannot carry {weight} preambles per signature")]
    FrameTooShort { frame_len: u32, weight: u32 },
    #[error("parameter {name} must be at least 1")]
    ZeroParameter { name: &'static str },
    #[error("slot ({rao},{preamble}) outside frame geometry")]
    SlotOutOfRange { rao: u32, preamble: u32 },
    #[error("expected {expected} slots, got {got}")]
    WrongSlotCount { expected: u32, got: u32 },
    #[error("duplicate RAO index {rao}")]
    DuplicateRao { rao: u32 },
    #[error("RAO block {rao} of dense form does not have exactly one bit set")]
    MalformedDenseBlock { rao: u32 },
    #[error("dense form has {got} bits, geometry requires {expected}")]
    DenseLengthMismatch { expected: usize, got: usize },
}

/// Frame geometry a signature is built against.
///
/// `frame_len` is the number of RAOs per signature frame (L), `weight` the
/// number of preambles per signature (K), `preambles_per_rao` the number of
/// orthogonal preambles available in each RAO (M).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignatureParams {
    pub frame_len: u32,
    pub weight: u32,
    pub preambles_per_rao: u32,
}

impl SignatureParams {
    pub fn new(
        frame_len: u32,
        weight: u32,
        preambles_per_rao: u32,
    ) -> Result<Self, SignatureError> {
        if weight == 0 {
            return Err(SignatureError::ZeroParameter { name: "weight" });
        }
        if preambles_per_rao == 0 {
            return Err(SignatureError::ZeroParameter {
                name: "preambles_per_rao",
            });
        }
        if frame_len < weight {
            return Err(SignatureError::FrameTooShort { frame_len, weight });
        }
        Ok(SignatureParams {
            frame_len,
            weight,
            preambles_per_rao,
        })
    }

    /// Length of the dense encoding: one `M+1`-bit block per RAO.
    pub fn dense_len(&self) -> usize {
        self.frame_len as usize * (self.preambles_per_rao as usize + 1)
    }
}

/// One preamble activation: `rao` in `1..=L`, `preamble` in `1..=M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Slot {
    pub rao: u32,
    pub preamble: u32,
}

/// A device's access signature: exactly `K` slots in distinct RAOs, kept
/// sorted by RAO so equality is structural (and ordering lexicographic).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Signature {
    slots: Vec<Slot>,
}

impl Signature {
    /// Builds a signature from explicit slots, enforcing the frame geometry.
    pub fn new(mut slots: Vec<Slot>, params: &SignatureParams) -> Result<Self, SignatureError> {
        if slots.len() != params.weight as usize {
            return Err(SignatureError::WrongSlotCount {
                expected: params.weight,
                got: slots.len() as u32,
            });
        }
        slots.sort_unstable();
        for pair in slots.windows(2) {
            if pair[0].rao == pair[1].rao {
                return Err(SignatureError::DuplicateRao { rao: pair[0].rao });
            }
        }
        for slot in &slots {
            let rao_ok = (1..=params.frame_len).contains(&slot.rao);
            let preamble_ok = (1..=params.preambles_per_rao).contains(&slot.preamble);
            if !rao_ok || !preamble_ok {
                return Err(SignatureError::SlotOutOfRange {
                    rao: slot.rao,
                    preamble: slot.preamble,
                });
            }
        }
        Ok(Signature { slots })
    }

    /// Derives the signature for a 64-bit authentication response.
    ///
    /// Indices come from a per-response hash stream (an independent hash
    /// function per index). Stage one draws RAO indices, skipping repeats,
    /// until `K` distinct RAOs are selected — rejection sampling, so the RAO
    /// set is a uniform `K`-subset of the frame. Stage two draws one uniform
    /// preamble for each active RAO in ascending RAO order.
    pub fn derive(response: u64, params: &SignatureParams) -> Self {
        let mut stream = IndexStream::new(response);
        let frame_len = params.frame_len as u64;
        let mut raos: Vec<u64> = Vec::with_capacity(params.weight as usize);
        while raos.len() < params.weight as usize {
            let idx = stream.next() % frame_len;
            if !raos.contains(&idx) {
                raos.push(idx);
            }
        }
        raos.sort_unstable();

        let m = params.preambles_per_rao as u64;
        let slots = raos
            .iter()
            .map(|&rao| Slot {
                rao: rao as u32 + 1,
                preamble: (stream.next() % m) as u32 + 1,
            })
            .collect();
        Signature { slots }
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// The slot transmitted in the given RAO, if any.
    pub fn slot_at(&self, rao: u32) -> Option<Slot> {
        self.slots
            .binary_search_by_key(&rao, |slot| slot.rao)
            .ok()
            .map(|i| self.slots[i])
    }

    /// Activity test against a (possibly noisy) frame observation: true iff
    /// every slot's preamble is detected in its RAO. Absence blocks are never
    /// consulted; the test is monotone in preamble activations.
    pub fn matches(&self, obs: &FrameObservation) -> bool {
        self.slots
            .iter()
            .all(|slot| obs.rao(slot.rao).contains(slot.preamble))
    }

    /// Dense binary encoding: per RAO a block of `M+1` bits with exactly one
    /// bit set — the transmitted preamble, or the trailing absence bit when
    /// the signature is silent in that RAO.
    pub fn to_dense(&self, params: &SignatureParams) -> DenseSignature {
        let block = params.preambles_per_rao as usize + 1;
        let mut bits = vec![false; params.dense_len()];
        for rao in 1..=params.frame_len {
            let base = (rao as usize - 1) * block;
            match self.slot_at(rao) {
                Some(slot) => bits[base + slot.preamble as usize - 1] = true,
                None => bits[base + block - 1] = true,
            }
        }
        DenseSignature { bits }
    }
}

impl std::fmt::Display for Signature {
    /// Textual form used in traces: `(rao,preamble);(rao,preamble);...`
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, slot) in self.slots.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "({},{})", slot.rao, slot.preamble)?;
        }
        Ok(())
    }
}

/// Dense bit-vector form of a signature, `L * (M+1)` bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseSignature {
    bits: Vec<bool>,
}

impl DenseSignature {
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Decodes the dense form back into slot form.
    pub fn to_signature(&self, params: &SignatureParams) -> Result<Signature, SignatureError> {
        if self.bits.len() != params.dense_len() {
            return Err(SignatureError::DenseLengthMismatch {
                expected: params.dense_len(),
                got: self.bits.len(),
            });
        }
        let block = params.preambles_per_rao as usize + 1;
        let mut slots = Vec::new();
        for rao in 1..=params.frame_len {
            let base = (rao as usize - 1) * block;
            let set: Vec<usize> = (0..block).filter(|&i| self.bits[base + i]).collect();
            match set.as_slice() {
                [absence] if *absence == block - 1 => {}
                [preamble] => slots.push(Slot {
                    rao,
                    preamble: *preamble as u32 + 1,
                }),
                _ => return Err(SignatureError::MalformedDenseBlock { rao }),
            }
        }
        Signature::new(slots, params)
    }
}

/// Deterministic stream of 64-bit hash words for one response: word `i` of
/// `SHA-256(response || counter)` blocks. Each consumed word plays the role
/// of one independent hash function evaluation.
struct IndexStream {
    response: [u8; 8],
    counter: u64,
    words: [u64; 4],
    used: usize,
}

impl IndexStream {
    fn new(response: u64) -> Self {
        IndexStream {
            response: response.to_be_bytes(),
            counter: 0,
            words: [0; 4],
            used: 4,
        }
    }

    fn next(&mut self) -> u64 {
        if self.used == 4 {
            let mut hasher = Sha256::new();
            hasher.update(self.response);
            hasher.update(self.counter.to_be_bytes());
            let digest: [u8; 32] = hasher.finalize().into();
            for (i, word) in self.words.iter_mut().enumerate() {
                *word = u64::from_be_bytes(digest[i * 8..][..8].try_into().unwrap());
            }
            self.counter += 1;
            self.used = 0;
        }
        let word = self.words[self.used];
        self.used += 1;
        word
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{observe_rao, DetectionModel, FrameObservation, PreambleSet};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn params(l: u32, k: u32, m: u32) -> SignatureParams {
        SignatureParams::new(l, k, m).unwrap()
    }

    #[test]
    fn rejects_frame_shorter_than_weight() {
        assert_eq!(
            SignatureParams::new(3, 4, 54),
            Err(SignatureError::FrameTooShort {
                frame_len: 3,
                weight: 4
            })
        );
    }

    #[test]
    fn derivation_is_deterministic_and_canonical() {
        let p = params(16, 4, 54);
        let sig = Signature::derive(0xdead_beef_cafe_f00d, &p);
        assert_eq!(sig, Signature::derive(0xdead_beef_cafe_f00d, &p));
        assert_eq!(sig.slots().len(), 4);
        for pair in sig.slots().windows(2) {
            assert!(pair[0].rao < pair[1].rao);
        }
    }

    #[test]
    fn full_frame_with_single_preamble_is_forced() {
        // L=4, K=4, M=1: all four RAOs active, every preamble index 1.
        let p = params(4, 4, 1);
        let sig = Signature::derive(42, &p);
        let raos: Vec<u32> = sig.slots().iter().map(|s| s.rao).collect();
        assert_eq!(raos, vec![1, 2, 3, 4]);
        assert!(sig.slots().iter().all(|s| s.preamble == 1));
    }

    #[test]
    fn selection_frequencies_are_uniform() {
        // Monte Carlo check of the uniform-selection assumption: with
        // L=16, K=4, M=54 each RAO should be chosen with frequency
        // K/L = 0.25 +/- 0.01 and each preamble with frequency 1/M within
        // 3 sigma, over 10^5 random responses.
        let p = params(16, 4, 54);
        let mut rng = ChaCha12Rng::seed_from_u64(0x5eed_0002);
        let trials = 100_000u32;
        let mut rao_counts = vec![0u32; 16];
        let mut preamble_counts = vec![0u32; 54];
        for _ in 0..trials {
            let sig = Signature::derive(rng.random(), &p);
            for slot in sig.slots() {
                rao_counts[slot.rao as usize - 1] += 1;
                preamble_counts[slot.preamble as usize - 1] += 1;
            }
        }
        for &count in &rao_counts {
            let freq = count as f64 / trials as f64;
            assert!((freq - 0.25).abs() < 0.01, "rao frequency {freq}");
        }
        let slot_draws = (trials * 4) as f64;
        let p_pre = 1.0 / 54.0;
        let sigma = (p_pre * (1.0 - p_pre) / slot_draws).sqrt();
        for &count in &preamble_counts {
            let freq = count as f64 / slot_draws;
            assert!(
                (freq - p_pre).abs() < 3.0 * sigma,
                "preamble frequency {freq} vs {p_pre} (sigma {sigma})"
            );
        }
    }

    #[test]
    fn dense_encoding_of_single_slot() {
        // K=1, L=1, M=2, slot (1,2) encodes as 010.
        let p = params(1, 1, 2);
        let sig = Signature::new(vec![Slot { rao: 1, preamble: 2 }], &p).unwrap();
        assert_eq!(sig.to_dense(&p).bits(), &[false, true, false]);
    }

    #[test]
    fn matches_ignores_noise_free_self_observation() {
        let p = params(8, 3, 4);
        let sig = Signature::derive(7, &p);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut obs = FrameObservation::new();
        for rao in 1..=8 {
            let mut tx = PreambleSet::new(4);
            if let Some(slot) = sig.slot_at(rao) {
                tx.insert(slot.preamble);
            }
            obs.push_rao(observe_rao(&tx, &DetectionModel::PERFECT, &mut rng));
        }
        assert!(sig.matches(&obs));

        // Knock out one of the slots: the AND test must fail.
        let victim = sig.slots()[1];
        let mut broken = FrameObservation::new();
        for rao in 1..=8 {
            let mut set = PreambleSet::new(4);
            if let Some(slot) = sig.slot_at(rao) {
                if slot != victim {
                    set.insert(slot.preamble);
                }
            }
            broken.push_rao(set);
        }
        assert!(!sig.matches(&broken));
    }

    #[test]
    fn signature_space_is_exhaustive() {
        // C(4,2) * 2^2 = 24 distinct signatures for L=4, K=2, M=2.
        let p = params(4, 2, 2);
        let mut all = std::collections::HashSet::new();
        for a in 1..=4u32 {
            for b in (a + 1)..=4 {
                for pa in 1..=2u32 {
                    for pb in 1..=2u32 {
                        let sig = Signature::new(
                            vec![
                                Slot { rao: a, preamble: pa },
                                Slot { rao: b, preamble: pb },
                            ],
                            &p,
                        )
                        .unwrap();
                        all.insert(sig);
                    }
                }
            }
        }
        assert_eq!(all.len(), 24);
    }

    #[test]
    fn derive_lands_in_enumerated_space() {
        let p = params(5, 2, 3);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..200 {
            let sig = Signature::derive(rng.random(), &p);
            assert!(Signature::new(sig.slots().to_vec(), &p).is_ok());
        }
    }

    #[test]
    fn display_form() {
        let p = params(4, 2, 3);
        let sig = Signature::new(
            vec![Slot { rao: 3, preamble: 1 }, Slot { rao: 1, preamble: 2 }],
            &p,
        )
        .unwrap();
        assert_eq!(sig.to_string(), "(1,2);(3,1)");
    }

    proptest! {
        #[test]
        fn dense_round_trip_and_popcount(
            l in 1u32..20,
            k_seed in 1u32..20,
            m in 1u32..8,
            response: u64,
        ) {
            let k = k_seed.min(l);
            let p = params(l, k, m);
            let sig = Signature::derive(response, &p);
            let dense = sig.to_dense(&p);
            // K preamble bits plus L-K absence bits.
            prop_assert_eq!(dense.popcount(), l as usize);
            prop_assert_eq!(dense.to_signature(&p).unwrap(), sig);
        }

        #[test]
        fn derived_raos_distinct_and_in_range(
            l in 1u32..64,
            k_seed in 1u32..64,
            m in 1u32..64,
            response: u64,
        ) {
            let k = k_seed.min(l);
            let p = params(l, k, m);
            let sig = Signature::derive(response, &p);
            prop_assert_eq!(sig.slots().len(), k as usize);
            let mut seen = std::collections::HashSet::new();
            for slot in sig.slots() {
                prop_assert!((1..=l).contains(&slot.rao));
                prop_assert!((1..=m).contains(&slot.preamble));
                prop_assert!(seen.insert(slot.rao));
            }
        }
    }
}
