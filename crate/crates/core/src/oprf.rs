//! Oblivious PRF from a key-value encoding and a VOLE correlation.
//!
//! P1 encodes (x, H_in(x)) pairs into a linear key-value store P, masks the
//! VOLE vector A with it and sends A' = A ^ P. P2's seed B' = B ^ A'*Delta
//! then satisfies, for every encoded x,
//!
//! ```text
//! decode(B', x) ^ H_in(x)*Delta == decode(C, x)        where C = A*Delta ^ B
//! ```
//!
//! so both sides can evaluate the same PRF — P1 only on its inputs, P2 on
//! any string of its choice.
//!
//! The key-value store is a random-band linear system: each key hashes to a
//! short binary band at a random offset, and encoding solves the resulting
//! band matrix by Gaussian elimination. A singular system is a retriable
//! failure; the caller resamples the hashing randomness.

use crate::crypto::{gf128_mul, prf_mmo, random_oracle_to_field, F128, PrfKey, RandomSource};
use crate::ot::DealerSeed;
use crate::transport::{expect_frame, Channel, Frame, MsgType, TransportError};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OprfError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("duplicate key at index {0}")]
    DuplicateKey(usize),
    #[error("encoding failed after {0} attempts (singular systems)")]
    EncodeFailure(u32),
    #[error("empty input set")]
    EmptyInput,
    #[error("malformed frame")]
    BadFrame,
}

/// Band-system shape parameters.
#[derive(Clone, Copy, Debug)]
pub struct OkvsParams {
    /// Band width in bits; at most 64.
    pub band_width: usize,
    pub max_retries: u32,
}

impl Default for OkvsParams {
    fn default() -> OkvsParams {
        OkvsParams {
            band_width: 64,
            max_retries: 16,
        }
    }
}

impl OkvsParams {
    /// Slot count for n pairs: 1.28x expansion plus one band width.
    pub fn m_slots(&self, n: usize) -> usize {
        assert!(self.band_width >= 16 && self.band_width <= 64);
        (n as f64 * 1.28).ceil() as usize + self.band_width
    }
}

/// Sparse row: `band` bit j selects slot `start + j`; bit 0 always set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OkvsRow {
    pub start: usize,
    pub band: u64,
}

/// Deterministic row for a key under randomness `r`.
pub fn okvs_row(key: &[u8], r: &PrfKey, m_slots: usize, params: &OkvsParams) -> OkvsRow {
    let h = prf_mmo(r, key);
    let start_word = u64::from_le_bytes(h[..8].try_into().unwrap());
    let band_word = u64::from_le_bytes(h[8..].try_into().unwrap());
    let span = m_slots - params.band_width;
    let mut band = if params.band_width == 64 {
        band_word
    } else {
        band_word & ((1u64 << params.band_width) - 1)
    };
    band |= 1;
    OkvsRow {
        start: (start_word % span as u64) as usize,
        band,
    }
}

/// Solved encoding: a slot vector plus the randomness that shaped the rows.
#[derive(Clone, Debug)]
pub struct OkvsEncoding {
    pub slots: Vec<F128>,
    pub r: PrfKey,
}

/// XOR of the band-selected slots for `key`; linear in the slot vector.
pub fn okvs_decode(slots: &[F128], key: &[u8], r: &PrfKey, params: &OkvsParams) -> F128 {
    let row = okvs_row(key, r, slots.len(), params);
    let mut acc = F128::ZERO;
    let mut band = row.band;
    while band != 0 {
        let j = band.trailing_zeros() as usize;
        acc = acc ^ slots[row.start + j];
        band &= band - 1;
    }
    acc
}

/// Solves the band system for one randomness; `None` means singular.
///
/// Elimination keeps every working row anchored at its lowest set bit.
/// Reducing against a pivot anchored at p cancels bit p, and both operands
/// only occupy [p, p + w), so the re-anchored row again fits in w bits.
fn okvs_try_encode(
    pairs: &[(Vec<u8>, F128)],
    r: &PrfKey,
    m_slots: usize,
    params: &OkvsParams,
    rng: &mut RandomSource,
) -> Option<Vec<F128>> {
    // pivot_of[slot] -> index into `placed`
    let mut pivot_of: Vec<Option<usize>> = vec![None; m_slots];
    let mut placed: Vec<(usize, u64, F128)> = Vec::with_capacity(pairs.len());

    for (key, value) in pairs {
        let row = okvs_row(key, r, m_slots, params);
        let mut start = row.start;
        let mut band = row.band as u128;
        let mut value = *value;
        loop {
            if band == 0 {
                return None; // linearly dependent row
            }
            let tz = band.trailing_zeros() as usize;
            start += tz;
            band >>= tz;
            match pivot_of[start] {
                None => {
                    debug_assert!(band <= u64::MAX as u128);
                    pivot_of[start] = Some(placed.len());
                    placed.push((start, band as u64, value));
                    break;
                }
                Some(idx) => {
                    let (_, pband, pval) = placed[idx];
                    band ^= pband as u128;
                    value = value ^ pval;
                }
            }
        }
    }

    // Free slots uniform, then back-substitute from the highest pivot down.
    let mut slots: Vec<F128> = (0..m_slots)
        .map(|s| {
            if pivot_of[s].is_some() {
                F128::ZERO
            } else {
                rng.field_element()
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..placed.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(placed[i].0));
    for i in order {
        let (start, band, value) = placed[i];
        let mut acc = value;
        let mut rest = band & !1;
        while rest != 0 {
            let j = rest.trailing_zeros() as usize;
            acc = acc ^ slots[start + j];
            rest &= rest - 1;
        }
        slots[start] = acc;
    }
    Some(slots)
}

/// Encodes pairs under fresh randomness, resampling on singular systems.
pub fn okvs_encode(
    pairs: &[(Vec<u8>, F128)],
    params: &OkvsParams,
    rng: &mut RandomSource,
) -> Result<OkvsEncoding, OprfError> {
    let mut seen = std::collections::HashSet::new();
    for (i, (key, _)) in pairs.iter().enumerate() {
        if !seen.insert(key.as_slice()) {
            return Err(OprfError::DuplicateKey(i));
        }
    }
    let m_slots = params.m_slots(pairs.len());
    for _ in 0..params.max_retries {
        let r = PrfKey::random(rng);
        if let Some(slots) = okvs_try_encode(pairs, &r, m_slots, params, rng) {
            return Ok(OkvsEncoding { slots, r });
        }
    }
    Err(OprfError::EncodeFailure(params.max_retries))
}

// ---------------------------------------------------------------------------
// VOLE correlation

/// Full correlation as a dealer produces it: C = A*Delta ^ B, with P1
/// holding (A, C) and P2 holding (B, Delta).
#[derive(Clone, Debug)]
pub struct VoleCorrelation {
    pub a: Vec<F128>,
    pub b: Vec<F128>,
    pub c: Vec<F128>,
    pub delta: F128,
}

pub fn vole_deal(m_slots: usize, rng: &mut RandomSource) -> VoleCorrelation {
    assert!(m_slots >= 1);
    let delta = rng.field_element();
    let a: Vec<F128> = (0..m_slots).map(|_| rng.field_element()).collect();
    let b: Vec<F128> = (0..m_slots).map(|_| rng.field_element()).collect();
    let c: Vec<F128> = a
        .iter()
        .zip(&b)
        .map(|(&ai, &bi)| gf128_mul(ai, delta) ^ bi)
        .collect();
    VoleCorrelation { a, b, c, delta }
}

/// Deterministic correlation both parties derive from a shared dealer seed.
pub fn vole_from_seed(seed: &DealerSeed, m_slots: usize) -> VoleCorrelation {
    let mut rng = RandomSource::from_seed(seed.0);
    // Distinct stream from the OT material derived from the same seed.
    let mut rng = rng.fork(0x56);
    vole_deal(m_slots, &mut rng)
}

/// Serializes one party's half over a DEALER_VOLE frame, for deployments
/// with an actual third-party dealer.
pub fn vole_send_p2_half(corr: &VoleCorrelation, chan: &mut dyn Channel) -> Result<(), OprfError> {
    let mut payload = Vec::with_capacity(16 * (corr.b.len() + 1));
    payload.extend_from_slice(&corr.delta.to_bytes());
    for e in &corr.b {
        payload.extend_from_slice(&e.to_bytes());
    }
    chan.send(Frame::new(MsgType::DealerVole, payload))?;
    Ok(())
}

pub fn vole_recv_p2_half(chan: &mut dyn Channel) -> Result<(Vec<F128>, F128), OprfError> {
    let payload = expect_frame(chan, MsgType::DealerVole)?;
    if payload.len() < 16 || payload.len() % 16 != 0 {
        return Err(OprfError::BadFrame);
    }
    let delta = F128::from_bytes(&payload[..16].try_into().unwrap());
    let b = payload[16..]
        .chunks_exact(16)
        .map(|c| F128::from_bytes(&c.try_into().unwrap()))
        .collect();
    Ok((b, delta))
}

// ---------------------------------------------------------------------------
// The OPRF protocol

/// Input-hashing oracle: the value the encoding stores per key.
pub fn hash_to_input_field(x: &[u8]) -> F128 {
    random_oracle_to_field(0x01, x)
}

/// Output oracle applied to the decoded field element.
pub fn hash_output(e: F128) -> [u8; 16] {
    let mut h = Sha256::new();
    h.update([0x02]);
    h.update(e.to_bytes());
    let d = h.finalize();
    d[..16].try_into().unwrap()
}

/// P2's take-away: enough to evaluate the PRF on any string.
#[derive(Clone, Debug)]
pub struct OprfSeed {
    pub b_prime: Vec<F128>,
    pub delta: F128,
    pub r: PrfKey,
    pub params: OkvsParams,
}

/// Evaluates the PRF from the seed side.
pub fn oprf_eval_seed(seed: &OprfSeed, y: &[u8]) -> [u8; 16] {
    let dec = okvs_decode(&seed.b_prime, y, &seed.r, &seed.params);
    let shift = gf128_mul(hash_to_input_field(y), seed.delta);
    hash_output(dec ^ shift)
}

/// P1 side: encodes its inputs, masks A, sends (r, A'), and outputs its PRF
/// values. The VOLE half is derived from the shared dealer seed.
pub fn oprf_p1_run(
    inputs: &[Vec<u8>],
    dealer: &DealerSeed,
    params: &OkvsParams,
    chan: &mut dyn Channel,
    rng: &mut RandomSource,
) -> Result<Vec<[u8; 16]>, OprfError> {
    if inputs.is_empty() {
        return Err(OprfError::EmptyInput);
    }
    let pairs: Vec<(Vec<u8>, F128)> = inputs
        .iter()
        .map(|x| (x.clone(), hash_to_input_field(x)))
        .collect();
    let encoding = okvs_encode(&pairs, params, rng)?;
    let m_slots = encoding.slots.len();
    let corr = vole_from_seed(dealer, m_slots);

    let mut payload = Vec::with_capacity(16 * (m_slots + 1));
    payload.extend_from_slice(&encoding.r.0);
    for (ai, pi) in corr.a.iter().zip(&encoding.slots) {
        payload.extend_from_slice(&(*ai ^ *pi).to_bytes());
    }
    chan.send(Frame::new(MsgType::OprfRAndAPrime, payload))?;

    Ok(inputs
        .iter()
        .map(|x| hash_output(okvs_decode(&corr.c, x, &encoding.r, params)))
        .collect())
}

/// P2 side: receives (r, A') and derives the evaluation seed.
pub fn oprf_p2_run(
    dealer: &DealerSeed,
    params: &OkvsParams,
    chan: &mut dyn Channel,
) -> Result<OprfSeed, OprfError> {
    let payload = expect_frame(chan, MsgType::OprfRAndAPrime)?;
    if payload.len() < 16 + 16 || (payload.len() - 16) % 16 != 0 {
        return Err(OprfError::BadFrame);
    }
    let r = PrfKey(payload[..16].try_into().unwrap());
    let a_prime: Vec<F128> = payload[16..]
        .chunks_exact(16)
        .map(|c| F128::from_bytes(&c.try_into().unwrap()))
        .collect();
    let corr = vole_from_seed(dealer, a_prime.len());
    let b_prime: Vec<F128> = corr
        .b
        .iter()
        .zip(&a_prime)
        .map(|(&bi, &ap)| bi ^ gf128_mul(ap, corr.delta))
        .collect();
    Ok(OprfSeed {
        b_prime,
        delta: corr.delta,
        r,
        params: *params,
    })
}
