//! Keyed authentication and key-derivation functions.
//!
//! The cellular authentication set (network authentication `f1`, user
//! response `f2`, cipher key `f3`, integrity key `f4`) is realized here as a
//! single keyed PRF — HMAC-SHA-256 keyed by the device secret — with a
//! one-byte domain-separation tag per function, truncated to the required
//! output width. The access protocol only relies on determinism, secrecy of
//! the key, and uniformity of the outputs, all of which this construction
//! provides. Outputs are modeled as uniform over their range; this is the
//! assumption behind the response-collision probability used in
//! [`crate::design::collision_probability`].

use hmac::{Hmac, KeyInit, Mac};
use sha2::Sha256;

type HmacSha256 = Hmac<Sha256>;

const TAG_F1: u8 = 0x01;
const TAG_F2: u8 = 0x02;
const TAG_F3: u8 = 0x03;
const TAG_F4: u8 = 0x04;

/// 128-bit long-term secret shared between one device and the network.
///
/// Unique per device within a population.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SecretKey(pub [u8; 16]);

impl SecretKey {
    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        SecretKey(bytes)
    }
}

impl std::fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // never print key material
        write!(f, "SecretKey(..)")
    }
}

/// Challenge material broadcast by the network: a 128-bit random challenge,
/// a 48-bit sequence number and a 16-bit management field.
///
/// Widths are exact by construction of the field types.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuthChallenge {
    pub rand: [u8; 16],
    pub sqn: [u8; 6],
    pub amf: [u8; 2],
}

impl AuthChallenge {
    pub fn new(rand: [u8; 16], sqn: [u8; 6], amf: [u8; 2]) -> Self {
        AuthChallenge { rand, sqn, amf }
    }

    /// Builds a challenge from integer sequence-number / management fields.
    /// Only the low 48 bits of `sqn` are representable; higher bits must be
    /// zero.
    pub fn from_parts(rand: [u8; 16], sqn: u64, amf: u16) -> Self {
        assert!(sqn < (1 << 48), "sequence number exceeds 48 bits");
        let sqn_bytes = sqn.to_be_bytes();
        let mut sqn6 = [0u8; 6];
        sqn6.copy_from_slice(&sqn_bytes[2..]);
        AuthChallenge {
            rand,
            sqn: sqn6,
            amf: amf.to_be_bytes(),
        }
    }
}

/// Outputs of one authentication round for a single device.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuthVector {
    /// 64-bit user response (output of `f2`).
    pub res: u64,
    /// 64-bit network authentication code (output of `f1`).
    pub mac: u64,
    /// 128-bit cipher key (output of `f3`).
    pub ck: [u8; 16],
    /// 128-bit integrity key (output of `f4`).
    pub ik: [u8; 16],
}

fn prf(sk: &SecretKey, tag: u8, parts: &[&[u8]]) -> [u8; 32] {
    let mut mac = HmacSha256::new_from_slice(&sk.0).expect("HMAC accepts any key length");
    mac.update(&[tag]);
    for part in parts {
        mac.update(part);
    }
    mac.finalize().into_bytes().into()
}

fn truncate64(digest: &[u8; 32]) -> u64 {
    u64::from_be_bytes(digest[..8].try_into().unwrap())
}

fn truncate128(digest: &[u8; 32]) -> [u8; 16] {
    digest[..16].try_into().unwrap()
}

/// Network authentication function: 64-bit MAC over the full challenge.
///
/// The device authenticates the network by recomputing this value locally
/// and comparing it with the received one.
pub fn f1(sk: &SecretKey, challenge: &AuthChallenge) -> u64 {
    truncate64(&prf(
        sk,
        TAG_F1,
        &[&challenge.rand, &challenge.sqn, &challenge.amf],
    ))
}

/// User authentication function: 64-bit response to a 128-bit challenge.
///
/// The response seeds the device's access signature, so the same value is
/// computable on both sides of the link without any exchange beyond the
/// broadcast challenge.
pub fn f2(sk: &SecretKey, rand: &[u8; 16]) -> u64 {
    truncate64(&prf(sk, TAG_F2, &[rand]))
}

/// Cipher-key derivation: 128-bit key.
pub fn f3(sk: &SecretKey, rand: &[u8; 16]) -> [u8; 16] {
    truncate128(&prf(sk, TAG_F3, &[rand]))
}

/// Integrity-key derivation: 128-bit key.
pub fn f4(sk: &SecretKey, rand: &[u8; 16]) -> [u8; 16] {
    truncate128(&prf(sk, TAG_F4, &[rand]))
}

/// Runs the full function set for one challenge.
pub fn auth_vector(sk: &SecretKey, challenge: &AuthChallenge) -> AuthVector {
    AuthVector {
        res: f2(sk, &challenge.rand),
        mac: f1(sk, challenge),
        ck: f3(sk, &challenge.rand),
        ik: f4(sk, &challenge.rand),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn rng() -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(0x5eed_0001)
    }

    fn random_key(rng: &mut ChaCha12Rng) -> SecretKey {
        SecretKey(rng.random())
    }

    #[test]
    fn deterministic() {
        let mut rng = rng();
        let sk = random_key(&mut rng);
        let rand: [u8; 16] = rng.random();
        let challenge = AuthChallenge::from_parts(rand, 7, 0x8000);
        assert_eq!(f2(&sk, &rand), f2(&sk, &rand));
        assert_eq!(f1(&sk, &challenge), f1(&sk, &challenge));
        assert_eq!(auth_vector(&sk, &challenge), auth_vector(&sk, &challenge));
    }

    #[test]
    fn distinct_keys_distinct_responses() {
        // Collision probability per pair is ~2^-64; over 10^4 pairs the
        // expected number of collisions is ~0.
        let mut rng = rng();
        let rand: [u8; 16] = rng.random();
        let mut collisions = 0;
        for _ in 0..10_000 {
            let k0 = random_key(&mut rng);
            let k1 = random_key(&mut rng);
            if k0 != k1 && f2(&k0, &rand) == f2(&k1, &rand) {
                collisions += 1;
            }
        }
        assert_eq!(collisions, 0);
    }

    #[test]
    fn tampered_challenge_breaks_mac() {
        // Flip each of the 128 rand bits for 100 random keys; the MAC must
        // never survive.
        let mut rng = rng();
        let mut matches = 0;
        for _ in 0..100 {
            let sk = random_key(&mut rng);
            let rand: [u8; 16] = rng.random();
            let challenge = AuthChallenge::from_parts(rand, 1, 0);
            let mac = f1(&sk, &challenge);
            for bit in 0..128 {
                let mut tampered = rand;
                tampered[bit / 8] ^= 1 << (bit % 8);
                let forged = AuthChallenge::from_parts(tampered, 1, 0);
                if f1(&sk, &forged) == mac {
                    matches += 1;
                }
            }
        }
        assert_eq!(matches, 0);
    }

    #[test]
    fn cipher_and_integrity_keys_differ() {
        let mut rng = rng();
        for _ in 0..10_000 {
            let sk = random_key(&mut rng);
            let rand: [u8; 16] = rng.random();
            assert_ne!(f3(&sk, &rand), f4(&sk, &rand));
        }
    }

    #[test]
    fn function_set_mutually_distinct() {
        let mut rng = rng();
        for _ in 0..100 {
            let sk = random_key(&mut rng);
            let rand: [u8; 16] = rng.random();
            let challenge = AuthChallenge::from_parts(rand, 0, 0);
            let v = auth_vector(&sk, &challenge);
            assert_ne!(v.res, v.mac);
            assert_ne!(v.ck, v.ik);
            assert_ne!(&v.ck[..8], &v.res.to_be_bytes());
            assert_ne!(&v.ik[..8], &v.mac.to_be_bytes());
        }
    }

    #[test]
    fn avalanche_on_single_bit_flip() {
        // Flipping one input bit should flip ~50% of the response bits on
        // average (tolerance +/- 5% over 10^4 trials).
        let mut rng = rng();
        let trials = 10_000;
        let mut flipped_total = 0u64;
        for _ in 0..trials {
            let sk = random_key(&mut rng);
            let rand: [u8; 16] = rng.random();
            let bit = rng.random_range(0..128usize);
            let mut tampered = rand;
            tampered[bit / 8] ^= 1 << (bit % 8);
            flipped_total += (f2(&sk, &rand) ^ f2(&sk, &tampered)).count_ones() as u64;
        }
        let mean_fraction = flipped_total as f64 / (trials as f64 * 64.0);
        assert!(
            (mean_fraction - 0.5).abs() < 0.05,
            "avalanche fraction {mean_fraction}"
        );
    }

    #[test]
    #[should_panic(expected = "48 bits")]
    fn oversized_sequence_number_rejected() {
        AuthChallenge::from_parts([0; 16], 1 << 48, 0);
    }
}
