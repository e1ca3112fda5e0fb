//! Closed-form dimensioning and analysis of the signature frame.
//!
//! Given a goodput target, the frame length is obtained from the load model:
//! the probability that a preamble slot stays idle, the resulting
//! false-positive probability of an inactive signature, and the goodput that
//! follows from the mean number of false positives. The module also carries
//! the collision probabilities of the response/signature spaces and the
//! counting metrics available to a passive eavesdropper.

use crate::channel::DetectionModel;
use num_bigint::BigUint;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DesignError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("goodput target must lie in (0,1), got {0}")]
    GoodputTargetOutOfRange(f64),
    #[error("offered load {offered} exceeds population {population}")]
    LoadExceedsPopulation { offered: f64, population: u32 },
    #[error(
        "infeasible design: frame needs at least {weight} RAOs but the goodput \
         interval caps it at {cap}"
    )]
    Infeasible { weight: u32, cap: u32 },
    #[error("weight {weight} exceeds {slots} preamble slots of the finite frame")]
    WeightExceedsSlots { weight: u32, slots: u64 },
}

/// Probability that a given preamble slot is not activated by any active
/// signature.
///
/// With a finite frame the form is `(1 - K/(L*M))^(lambda*L)`; without one,
/// the large-`L` limit `exp(-lambda*K/M)`, which no longer depends on `L`.
pub fn idle_probability(
    lambda: f64,
    weight: u32,
    preambles_per_rao: u32,
    frame_len: Option<u32>,
) -> Result<f64, DesignError> {
    validate_positive("lambda", lambda)?;
    validate_positive("preambles_per_rao", preambles_per_rao as f64)?;
    let k = weight as f64;
    let m = preambles_per_rao as f64;
    match frame_len {
        Some(l) => {
            validate_positive("frame_len", l as f64)?;
            let slots = l as u64 * preambles_per_rao as u64;
            if weight as u64 > slots {
                return Err(DesignError::WeightExceedsSlots { weight, slots });
            }
            let l = l as f64;
            Ok((1.0 - k / (l * m)).powf(lambda * l))
        }
        None => Ok((-lambda * k / m).exp()),
    }
}

/// False-positive probability of one inactive signature: all `K` of its
/// preambles are detected as active, each either because some active device
/// lit the slot (detected with `p_d`) or from a false alarm (`p_f`).
/// Uses the large-`L` limit of the idle probability.
pub fn false_positive_probability(
    lambda: f64,
    weight: u32,
    preambles_per_rao: u32,
    model: &DetectionModel,
) -> Result<f64, DesignError> {
    let p_idle = idle_probability(lambda, weight, preambles_per_rao, None)?;
    let per_preamble = model.p_detect + (model.p_false - model.p_detect) * p_idle;
    Ok(per_preamble.powi(weight as i32))
}

/// Expected goodput `lambda*L / (lambda*L + p_fa*(T - lambda*L))`: the ratio
/// of truly active decoded signatures to all declared-active signatures.
pub fn expected_goodput(
    lambda: f64,
    frame_len: u32,
    population: u32,
    false_positive_prob: f64,
) -> Result<f64, DesignError> {
    validate_positive("lambda", lambda)?;
    let offered = lambda * frame_len as f64;
    if offered > population as f64 {
        return Err(DesignError::LoadExceedsPopulation {
            offered,
            population,
        });
    }
    let phantoms = false_positive_prob * (population as f64 - offered);
    if offered == 0.0 && phantoms == 0.0 {
        return Ok(1.0);
    }
    Ok(offered / (offered + phantoms))
}

/// Collision probabilities of one frame's identifier spaces.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CollisionProbabilities {
    /// Two or more devices sharing the same 64-bit authentication response.
    pub response: f64,
    /// Two or more devices sharing the same signature, over the
    /// `C(L,K) * M^K` signature space.
    pub signature: f64,
    /// Either event: `p_c1 + (1 - p_c1) * p_c2`.
    pub combined: f64,
}

/// Output of the frame-length design rule.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct FrameDesign {
    /// Chosen frame length in RAOs.
    pub frame_len: u32,
    /// Design-rule value before rounding and clamping.
    pub raw_frame_len: f64,
    /// Set when the raw value fell outside `[K, ceil(G*T/lambda)]`.
    pub clamped: bool,
    /// Idle-preamble probability (large-`L` limit).
    pub idle_prob: f64,
    /// False-positive probability per inactive signature.
    pub false_positive_prob: f64,
    /// Goodput predicted at the chosen frame length.
    pub predicted_goodput: f64,
    pub collisions: CollisionProbabilities,
}

/// Dimensions the signature frame for a goodput target.
///
/// Evaluates the closed-form design rule with the limit form of the idle
/// probability, rounds up to an integer RAO count, and clamps the result to
/// the valid interval `[K, ceil(G*T/lambda)]`. Rounding up errs toward more
/// resources, i.e. goodput at or above the target.
pub fn frame_length(
    population: u32,
    lambda: f64,
    weight: u32,
    preambles_per_rao: u32,
    model: &DetectionModel,
    goodput_target: f64,
) -> Result<FrameDesign, DesignError> {
    validate_positive("population", population as f64)?;
    validate_positive("lambda", lambda)?;
    validate_positive("weight", weight as f64)?;
    if !(goodput_target > 0.0 && goodput_target < 1.0) {
        return Err(DesignError::GoodputTargetOutOfRange(goodput_target));
    }

    let cap_raw = (goodput_target * population as f64 / lambda).ceil();
    let cap = if cap_raw >= u32::MAX as f64 {
        u32::MAX
    } else {
        cap_raw as u32
    };
    if cap < weight {
        return Err(DesignError::Infeasible { weight, cap });
    }

    let p_idle = idle_probability(lambda, weight, preambles_per_rao, None)?;
    let per_preamble = model.p_detect + (model.p_false - model.p_detect) * p_idle;
    let p_fa = per_preamble.powi(weight as i32);
    let raw = p_fa * goodput_target * population as f64
        / (lambda * (1.0 + goodput_target * (p_fa - 1.0)));

    let rounded = raw.ceil();
    let (frame_len, clamped) = if !rounded.is_finite() || rounded > cap as f64 {
        (cap, true)
    } else if rounded < weight as f64 {
        (weight, true)
    } else {
        (rounded as u32, false)
    };

    let predicted_goodput = expected_goodput(lambda, frame_len, population, p_fa)?;
    let collisions = collision_probability(population, frame_len, weight, preambles_per_rao);
    Ok(FrameDesign {
        frame_len,
        raw_frame_len: raw,
        clamped,
        idle_prob: p_idle,
        false_positive_prob: p_fa,
        predicted_goodput,
        collisions,
    })
}

/// Exact probability that `t` uniform draws from a space of `space` values
/// are not all distinct, evaluated in log space:
/// `1 - prod_{i=1}^{t-1} (1 - i/space)`.
pub fn birthday_exact(t: u64, space: f64) -> f64 {
    if t < 2 {
        return 0.0;
    }
    if space < 2.0 {
        return 1.0;
    }
    if t == 2 {
        // Two-sample case reduces to 1/space exactly.
        return 1.0 / space;
    }
    if t as f64 >= space {
        return 1.0;
    }
    let mut log_all_distinct = 0.0f64;
    for i in 1..t {
        log_all_distinct += (-(i as f64) / space).ln_1p();
    }
    -log_all_distinct.exp_m1()
}

/// Birthday approximation `1 - exp(-t(t-1)/(2*space))`, taking the space in
/// log form so astronomically large spaces stay representable.
pub fn birthday_approx(t: u64, ln_space: f64) -> f64 {
    if t < 2 {
        return 0.0;
    }
    let ln_pairs = (t as f64).ln() + (t as f64 - 1.0).ln() - std::f64::consts::LN_2;
    -(-(ln_pairs - ln_space).exp()).exp_m1()
}

/// Natural log of the signature space size `C(L,K) * M^K`.
pub fn ln_signature_space(frame_len: u32, weight: u32, preambles_per_rao: u32) -> f64 {
    ln_binomial(frame_len as u64, weight as u64) + weight as f64 * (preambles_per_rao as f64).ln()
}

fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Threshold above which the exact product form gives way to the birthday
/// approximation (the two agree to better than 0.1% long before this point).
const EXACT_SPACE_LIMIT: f64 = 1e15;

/// Probability that two or more of `population` devices collide in the
/// response space (64-bit) or the signature space, and their combination.
pub fn collision_probability(
    population: u32,
    frame_len: u32,
    weight: u32,
    preambles_per_rao: u32,
) -> CollisionProbabilities {
    let t = population as u64;
    let response_space = (2.0f64).powi(64);
    let response = birthday_approx(t, response_space.ln());

    let ln_space = ln_signature_space(frame_len, weight, preambles_per_rao);
    let space = ln_space.exp();
    let signature = if space.is_finite() && space <= EXACT_SPACE_LIMIT {
        birthday_exact(t, space)
    } else {
        birthday_approx(t, ln_space)
    };

    CollisionProbabilities {
        response,
        signature,
        combined: response + (1.0 - response) * signature,
    }
}

/// Number of candidate signatures a passive eavesdropper must consider after
/// observing the preambles of `n` full signatures: `C(K*n, K)`, exact.
pub fn attacker_candidates(observed_signatures: u32, weight: u32) -> BigUint {
    binomial_big(observed_signatures as u64 * weight as u64, weight as u64)
}

/// Probability that a captured challenge/signature pair can ever be replayed:
/// the 128-bit challenge must repeat.
pub const REPLAY_PROBABILITY: f64 = 2.938735877055719e-39; // 2^-128

fn binomial_big(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut result = BigUint::from(1u32);
    for i in 1..=k {
        result = result * BigUint::from(n - k + i) / BigUint::from(i);
    }
    result
}

fn validate_positive(name: &'static str, value: f64) -> Result<(), DesignError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(DesignError::NonPositive { name, value })
    }
}
