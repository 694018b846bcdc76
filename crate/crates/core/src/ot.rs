//! Batched 1-out-of-2 oblivious transfer.
//!
//! Two interchangeable modes:
//!
//! * `group` — simplest-OT over Ristretto: the receiver sends one group
//!   element per instance, the sender answers with two ciphertexts per
//!   instance. Real two-party mode.
//! * `dealer` — both sides consume correlated randomness derived offline
//!   from a shared dealer seed (random pads plus random choice bits); the
//!   online phase is one message each way of pure XOR work.
//!
//! A production deployment would swap in an OT-extension backend behind the
//! same batch interface; the per-instance group mode is the baseline.

use crate::crypto::{xor_bytes, RandomSource};
use crate::transport::{expect_frame, Channel, Frame, MsgType, TransportError};
use curve25519_dalek::constants::RISTRETTO_BASEPOINT_TABLE;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OtError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("empty batch")]
    EmptyBatch,
    #[error("message length mismatch within batch")]
    LengthMismatch,
    #[error("batch size mismatch: sender {sender}, receiver {receiver}")]
    BatchMismatch { sender: usize, receiver: usize },
    #[error("malformed point encoding")]
    BadPoint,
    #[error("dealer material already consumed")]
    MaterialConsumed,
    #[error("dealer material sized for batch {expected}, got {actual}")]
    MaterialSize { expected: usize, actual: usize },
}

/// The two sender inputs of one OT instance, equal length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OtMessagePair {
    pub m0: Vec<u8>,
    pub m1: Vec<u8>,
}

pub type ChoiceVector = Vec<bool>;

fn check_batch(pairs: &[OtMessagePair]) -> Result<usize, OtError> {
    let first = pairs.first().ok_or(OtError::EmptyBatch)?;
    let len = first.m0.len();
    if pairs.iter().any(|p| p.m0.len() != len || p.m1.len() != len) {
        return Err(OtError::LengthMismatch);
    }
    Ok(len)
}

// ---------------------------------------------------------------------------
// Group mode (simplest OT over Ristretto)

/// Counter-mode SHA-256 expansion of a point to `len` key bytes.
fn kdf(point: &RistrettoPoint, instance: u64, len: usize) -> Vec<u8> {
    let compressed = point.compress();
    let mut out = Vec::with_capacity(len);
    let mut ctr = 0u32;
    while out.len() < len {
        let mut h = Sha256::new();
        h.update(b"ot-kdf");
        h.update(instance.to_be_bytes());
        h.update(ctr.to_be_bytes());
        h.update(compressed.as_bytes());
        out.extend_from_slice(&h.finalize());
        ctr += 1;
    }
    out.truncate(len);
    out
}

fn scalar_random(rng: &mut RandomSource) -> Scalar {
    let mut wide = [0u8; 64];
    rng.fill_bytes(&mut wide);
    Scalar::from_bytes_mod_order_wide(&wide)
}

/// Receiver side, group mode.
///
/// Flight order: sender announces A = aG, receiver answers one point
/// B_i = b_i*G + c_i*A per instance, sender replies with two ciphertexts
/// per instance. Only the chosen branch's key k = KDF(a*b_i*G) is
/// derivable from b_i.
pub fn ot_group_receive(
    choices: &ChoiceVector,
    msg_len: usize,
    chan: &mut dyn Channel,
    rng: &mut RandomSource,
) -> Result<Vec<Vec<u8>>, OtError> {
    if choices.is_empty() {
        return Err(OtError::EmptyBatch);
    }
    let a_frame = expect_frame(chan, MsgType::OtS2R)?;
    let a_bytes: [u8; 32] = a_frame.as_slice().try_into().map_err(|_| OtError::BadPoint)?;
    let big_a = CompressedRistretto(a_bytes)
        .decompress()
        .ok_or(OtError::BadPoint)?;

    let mut secrets = Vec::with_capacity(choices.len());
    let mut payload = Vec::with_capacity(32 * choices.len());
    for &c in choices {
        let b = scalar_random(rng);
        let mut point = RISTRETTO_BASEPOINT_TABLE * &b;
        if c {
            point += big_a;
        }
        secrets.push(b);
        payload.extend_from_slice(point.compress().as_bytes());
    }
    chan.send(Frame::new(MsgType::OtR2S, payload))?;

    let reply = expect_frame(chan, MsgType::OtS2R)?;
    let expected = choices.len() * 2 * msg_len;
    if reply.len() != expected {
        return Err(OtError::BatchMismatch {
            sender: reply.len() / (2 * msg_len).max(1),
            receiver: choices.len(),
        });
    }
    let mut out = Vec::with_capacity(choices.len());
    for (i, (&c, b)) in choices.iter().zip(&secrets).enumerate() {
        let k = kdf(&(big_a * *b), i as u64, msg_len);
        let base = i * 2 * msg_len + if c { msg_len } else { 0 };
        out.push(xor_bytes(&reply[base..base + msg_len], &k));
    }
    Ok(out)
}

/// Sender side, group mode; see [`ot_group_receive`] for the flight order.
pub fn ot_batch_send_group(
    pairs: &[OtMessagePair],
    chan: &mut dyn Channel,
    rng: &mut RandomSource,
) -> Result<(), OtError> {
    let msg_len = check_batch(pairs)?;
    let a = scalar_random(rng);
    let big_a = RISTRETTO_BASEPOINT_TABLE * &a;
    chan.send(Frame::new(
        MsgType::OtS2R,
        big_a.compress().as_bytes().to_vec(),
    ))?;

    let payload = expect_frame(chan, MsgType::OtR2S)?;
    if payload.len() != 32 * pairs.len() {
        return Err(OtError::BatchMismatch {
            sender: pairs.len(),
            receiver: payload.len() / 32,
        });
    }
    let a_big_a = big_a * a;
    let mut out = Vec::with_capacity(pairs.len() * 2 * msg_len);
    for (i, pair) in pairs.iter().enumerate() {
        let b_bytes: [u8; 32] = payload[32 * i..32 * (i + 1)].try_into().unwrap();
        let big_b = CompressedRistretto(b_bytes)
            .decompress()
            .ok_or(OtError::BadPoint)?;
        let shared = big_b * a;
        let k0 = kdf(&shared, i as u64, msg_len);
        let k1 = kdf(&(shared - a_big_a), i as u64, msg_len);
        out.extend_from_slice(&xor_bytes(&pair.m0, &k0));
        out.extend_from_slice(&xor_bytes(&pair.m1, &k1));
    }
    chan.send(Frame::new(MsgType::OtS2R, out))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Dealer mode (precomputed OT from a shared seed)

/// Seed from which both parties derive identical correlated randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DealerSeed(pub [u8; 32]);

impl DealerSeed {
    pub fn random(rng: &mut RandomSource) -> DealerSeed {
        let mut s = [0u8; 32];
        rng.fill_bytes(&mut s);
        DealerSeed(s)
    }
}

/// Sender half of the precomputation: two random pads per instance.
pub struct DealerSenderMaterial {
    pads: Vec<[Vec<u8>; 2]>,
    consumed: bool,
}

/// Receiver half: a random choice bit and the pad it selects, per instance.
pub struct DealerReceiverMaterial {
    bits: Vec<bool>,
    pads: Vec<Vec<u8>>,
    consumed: bool,
}

/// Expands a dealer seed into both halves of the precomputed material.
///
/// In a deployment each party receives only its half from the dealer; here
/// derivation is deterministic so a shared seed stands in for that delivery.
pub fn dealer_ot_setup(
    seed: &DealerSeed,
    batch_size: usize,
    msg_len: usize,
) -> (DealerSenderMaterial, DealerReceiverMaterial) {
    assert!(batch_size >= 1);
    let mut rng = RandomSource::from_seed(seed.0);
    let mut sender_pads = Vec::with_capacity(batch_size);
    let mut bits = Vec::with_capacity(batch_size);
    let mut recv_pads = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let r0 = rng.bytes(msg_len);
        let r1 = rng.bytes(msg_len);
        let d = rng.bool();
        recv_pads.push(if d { r1.clone() } else { r0.clone() });
        bits.push(d);
        sender_pads.push([r0, r1]);
    }
    (
        DealerSenderMaterial {
            pads: sender_pads,
            consumed: false,
        },
        DealerReceiverMaterial {
            bits,
            pads: recv_pads,
            consumed: false,
        },
    )
}

fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

fn unpack_bits(bytes: &[u8], n: usize) -> Vec<bool> {
    (0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect()
}

/// Sender side, dealer mode: one receive, one send, XOR-only.
///
/// The receiver's frame carries e_i = c_i ^ d_i; the reply carries
/// f0 = m0 ^ r_{e}, f1 = m1 ^ r_{1-e}, so the receiver's held pad r_d
/// opens exactly the chosen branch.
pub fn ot_batch_send_dealer(
    pairs: &[OtMessagePair],
    material: &mut DealerSenderMaterial,
    chan: &mut dyn Channel,
) -> Result<(), OtError> {
    let msg_len = check_batch(pairs)?;
    if material.consumed {
        return Err(OtError::MaterialConsumed);
    }
    if material.pads.len() != pairs.len() || material.pads[0][0].len() != msg_len {
        return Err(OtError::MaterialSize {
            expected: material.pads.len(),
            actual: pairs.len(),
        });
    }
    material.consumed = true;

    let payload = expect_frame(chan, MsgType::OtR2S)?;
    let e = unpack_bits(&payload, pairs.len());
    let mut out = Vec::with_capacity(pairs.len() * 2 * msg_len);
    for ((pair, pads), &e_i) in pairs.iter().zip(&material.pads).zip(&e) {
        let (pad_for_m0, pad_for_m1) = if e_i {
            (&pads[1], &pads[0])
        } else {
            (&pads[0], &pads[1])
        };
        out.extend_from_slice(&xor_bytes(&pair.m0, pad_for_m0));
        out.extend_from_slice(&xor_bytes(&pair.m1, pad_for_m1));
    }
    chan.send(Frame::new(MsgType::OtS2R, out))?;
    Ok(())
}

/// Receiver side, dealer mode.
pub fn ot_batch_receive_dealer(
    choices: &ChoiceVector,
    material: &mut DealerReceiverMaterial,
    chan: &mut dyn Channel,
) -> Result<Vec<Vec<u8>>, OtError> {
    if choices.is_empty() {
        return Err(OtError::EmptyBatch);
    }
    if material.consumed {
        return Err(OtError::MaterialConsumed);
    }
    if material.bits.len() != choices.len() {
        return Err(OtError::MaterialSize {
            expected: material.bits.len(),
            actual: choices.len(),
        });
    }
    material.consumed = true;
    let msg_len = material.pads[0].len();

    let e: Vec<bool> = choices
        .iter()
        .zip(&material.bits)
        .map(|(&c, &d)| c ^ d)
        .collect();
    chan.send(Frame::new(MsgType::OtR2S, pack_bits(&e)))?;

    let reply = expect_frame(chan, MsgType::OtS2R)?;
    if reply.len() != choices.len() * 2 * msg_len {
        return Err(OtError::BatchMismatch {
            sender: reply.len() / (2 * msg_len).max(1),
            receiver: choices.len(),
        });
    }
    let out = choices
        .iter()
        .zip(&material.pads)
        .enumerate()
        .map(|(i, (&c, pad))| {
            let base = i * 2 * msg_len + if c { msg_len } else { 0 };
            xor_bytes(&reply[base..base + msg_len], pad)
        })
        .collect();
    Ok(out)
}

// ---------------------------------------------------------------------------
// Mode-dispatching batch interface

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OtMode {
    Group,
    Dealer,
}

/// Sender-side dealer material holder for the dispatching interface.
pub enum SenderSetup {
    Group,
    Dealer(DealerSenderMaterial),
}

pub enum ReceiverSetup {
    Group,
    Dealer(DealerReceiverMaterial),
}

pub fn ot_batch_send(
    pairs: &[OtMessagePair],
    setup: &mut SenderSetup,
    chan: &mut dyn Channel,
    rng: &mut RandomSource,
) -> Result<(), OtError> {
    match setup {
        SenderSetup::Group => ot_batch_send_group(pairs, chan, rng),
        SenderSetup::Dealer(material) => ot_batch_send_dealer(pairs, material, chan),
    }
}

pub fn ot_batch_receive(
    choices: &ChoiceVector,
    msg_len: usize,
    setup: &mut ReceiverSetup,
    chan: &mut dyn Channel,
    rng: &mut RandomSource,
) -> Result<Vec<Vec<u8>>, OtError> {
    match setup {
        ReceiverSetup::Group => ot_group_receive(choices, msg_len, chan, rng),
        ReceiverSetup::Dealer(material) => ot_batch_receive_dealer(choices, material, chan),
    }
}
