//! Oblivious switching network: two parties evaluate a programmed Benes
//! network so that the sender's input vector ends up additively shared,
//! permuted by an injection only the receiver knows.
//!
//! The sender masks every wire of the network with random labels; one OT per
//! gate hands the receiver exactly the XOR correction matching that gate's
//! secret setting. The work splits into an offline phase (network
//! programming, label generation, and — in dealer mode — the OTs) and an
//! online phase touching the actual data, which is XOR-and-route only.

use crate::benes::{self, BenesError, Topology};
use crate::crypto::{xor_bytes, xor_in_place, RandomSource, ShareVector};
use crate::ot::{self, ChoiceVector, DealerSeed, OtError, OtMessagePair, OtMode};
use crate::perm::{compose_rho2, random_permutation, Injection, PermError, Permutation};
use crate::transport::{expect_frame, Channel, Frame, MsgType, TransportError};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OsnError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Ot(#[from] OtError),
    #[error(transparent)]
    Benes(#[from] BenesError),
    #[error(transparent)]
    Perm(#[from] PermError),
    #[error("vector length {actual} does not match network size {expected}")]
    InputSize { expected: usize, actual: usize },
    #[error("entry width {actual} does not match label width {expected}")]
    WidthMismatch { expected: usize, actual: usize },
    #[error("expected {expected} gate corrections, got {actual}")]
    GateCount { expected: usize, actual: usize },
    #[error("malformed index vector")]
    BadIndexVector,
}

/// Session parameters both parties must agree on beforehand.
#[derive(Clone, Copy, Debug)]
pub struct MosnParams {
    /// Network size: length of the sender's vector.
    pub m: usize,
    /// Label width in bytes; every vector entry must be exactly this wide.
    pub ell_bytes: usize,
    pub mode: OtMode,
}

/// Rounds a payload width up to whole label lanes.
pub fn padded_width(attr_width_bytes: usize, ell_bytes: usize) -> usize {
    attr_width_bytes.div_ceil(ell_bytes).max(1) * ell_bytes
}

/// Work counters for one protocol phase.
#[derive(Clone, Copy, Debug, Default)]
pub struct PhaseStats {
    pub looping_calls: u64,
    pub label_generations: u64,
    pub ot_instances: u64,
    /// Time inside the network-programming routine, part of `wall_ms`.
    pub looping_ms: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct MosnStats {
    pub offline: PhaseStats,
    pub online: PhaseStats,
}

// ---------------------------------------------------------------------------
// Sender-side label machinery

/// Per-wire masks: `a[col][j]` on the input and `b[col][j]` on the output
/// side of column `col`.
///
/// Hardwired connections carry their mask through (`a` of the next column
/// equals `b` of the feeding wire); gate wires get fresh outgoing masks.
pub struct WireLabels {
    pub ell_bytes: usize,
    a: Vec<Vec<Vec<u8>>>,
    b: Vec<Vec<Vec<u8>>>,
    generations: u64,
}

impl WireLabels {
    pub fn a(&self, col: usize, j: usize) -> &[u8] {
        &self.a[col][j]
    }

    pub fn b(&self, col: usize, j: usize) -> &[u8] {
        &self.b[col][j]
    }

    /// Masks on the outputs of the final column, the sender's share source.
    pub fn final_column(&self) -> &[Vec<u8>] {
        self.b.last().unwrap()
    }
}

/// Draws all wire masks for one session.
pub fn sender_labels(topo: &Topology, ell_bytes: usize, rng: &mut RandomSource) -> WireLabels {
    let m = topo.n_inputs();
    let cols = topo.cols();
    let mut a: Vec<Vec<Vec<u8>>> = Vec::with_capacity(cols);
    let mut b: Vec<Vec<Vec<u8>>> = Vec::with_capacity(cols);
    let mut generations = 0u64;
    for col in 0..cols {
        let a_col: Vec<Vec<u8>> = if col == 0 {
            (0..m)
                .map(|_| {
                    generations += 1;
                    rng.bytes(ell_bytes)
                })
                .collect()
        } else {
            (0..m).map(|j| b[col - 1][topo.conn(col, j)].clone()).collect()
        };
        let mut gate_wire = vec![false; m];
        for g in topo.gates_in_col(col) {
            gate_wire[g.j0] = true;
            gate_wire[g.j1] = true;
        }
        let b_col: Vec<Vec<u8>> = (0..m)
            .map(|j| {
                if gate_wire[j] {
                    generations += 1;
                    rng.bytes(ell_bytes)
                } else {
                    a_col[j].clone()
                }
            })
            .collect();
        a.push(a_col);
        b.push(b_col);
    }
    WireLabels {
        ell_bytes,
        a,
        b,
        generations,
    }
}

/// The two OT inputs for one gate: the straight-through and crossover
/// corrections, each two labels long.
pub fn sender_gate_messages(labels: &WireLabels, col: usize, gate: benes::Gate) -> OtMessagePair {
    let (j0, j1) = (gate.j0, gate.j1);
    let mut m0 = xor_bytes(labels.a(col, j0), labels.b(col, j0));
    m0.extend_from_slice(&xor_bytes(labels.a(col, j1), labels.b(col, j1)));
    let mut m1 = xor_bytes(labels.a(col, j0), labels.b(col, j1));
    m1.extend_from_slice(&xor_bytes(labels.a(col, j1), labels.b(col, j0)));
    OtMessagePair { m0, m1 }
}

/// All gate corrections in canonical gate order.
pub fn sender_all_gate_messages(topo: &Topology, labels: &WireLabels) -> Vec<OtMessagePair> {
    topo.iter_gates()
        .map(|(col, g)| sender_gate_messages(labels, col, g))
        .collect()
}

// ---------------------------------------------------------------------------
// Receiver-side evaluation

/// Applies the per-gate OT corrections column by column.
///
/// `masked[j]` must be the sender's value j XORed with its first-column
/// input mask; `ot_outputs` must be the corrections obtained with choice
/// bits equal to the program's gate settings, in canonical gate order. The
/// result is the programmed permutation of the values, each masked by the
/// sender's final-column outgoing label.
pub fn receiver_evaluate(
    topo: &Topology,
    prog: &benes::SwitchProgram,
    ot_outputs: &[Vec<u8>],
    masked: &[Vec<u8>],
    ell_bytes: usize,
) -> Result<Vec<Vec<u8>>, OsnError> {
    let m = topo.n_inputs();
    if masked.len() != m {
        return Err(OsnError::InputSize {
            expected: m,
            actual: masked.len(),
        });
    }
    if ot_outputs.len() != topo.used_gate_count() {
        return Err(OsnError::GateCount {
            expected: topo.used_gate_count(),
            actual: ot_outputs.len(),
        });
    }
    if masked.iter().any(|v| v.len() != ell_bytes)
        || ot_outputs.iter().any(|v| v.len() != 2 * ell_bytes)
    {
        return Err(OsnError::WidthMismatch {
            expected: ell_bytes,
            actual: masked
                .iter()
                .map(|v| v.len())
                .find(|&l| l != ell_bytes)
                .unwrap_or(0),
        });
    }

    let mut vals: Vec<Vec<u8>> = masked.to_vec();
    let mut scratch = vals.clone();
    let mut next_ot = 0usize;
    for col in 0..topo.cols() {
        if col > 0 {
            for j in 0..m {
                scratch[j].clone_from(&vals[topo.conn(col, j)]);
            }
            std::mem::swap(&mut vals, &mut scratch);
        }
        for g in topo.gates_in_col(col) {
            let corr = &ot_outputs[next_ot];
            next_ot += 1;
            xor_in_place(&mut vals[g.j0], &corr[..ell_bytes]);
            xor_in_place(&mut vals[g.j1], &corr[ell_bytes..]);
            if prog.bit(col, g.row) {
                vals.swap(g.j0, g.j1);
            }
        }
    }
    Ok(vals)
}

// ---------------------------------------------------------------------------
// Offline phase

/// Receiver state after the offline phase; consumed by the online phase.
pub struct MosnReceiverState {
    params: MosnParams,
    topo: Topology,
    rho1: Permutation,
    prog: benes::SwitchProgram,
    choices: ChoiceVector,
    /// Corrections already obtained offline (dealer mode only).
    ot_outputs: Option<Vec<Vec<u8>>>,
    rng: RandomSource,
    pub stats: MosnStats,
}

impl MosnReceiverState {
    /// The secret permutation chosen in the offline phase.
    pub fn rho1(&self) -> &Permutation {
        &self.rho1
    }
}

/// Sender state after the offline phase; consumed by the online phase.
pub struct MosnSenderState {
    params: MosnParams,
    labels: WireLabels,
    /// Gate corrections still to be transferred (group mode only).
    pending_pairs: Option<Vec<OtMessagePair>>,
    rng: RandomSource,
    pub stats: MosnStats,
}

/// Receiver offline phase: picks rho1, programs the network, and in dealer
/// mode runs the gate-correction OTs.
pub fn mosn_receiver_offline(
    params: MosnParams,
    dealer_seed: Option<&DealerSeed>,
    mut rng: RandomSource,
    chan: &mut dyn Channel,
) -> Result<MosnReceiverState, OsnError> {
    let start = Instant::now();
    let topo = benes::build_topology(params.m)?;
    let rho1 = random_permutation(params.m, &mut rng)?;

    let loop_start = Instant::now();
    let (prog, pstats) = benes::program_instrumented(&topo, &rho1)?;
    let looping_ms = loop_start.elapsed().as_secs_f64() * 1e3;

    let choices = prog.choice_bits(&topo);
    let msg_len = 2 * params.ell_bytes;
    let (ot_outputs, ot_instances) = match (params.mode, dealer_seed) {
        (OtMode::Dealer, Some(seed)) => {
            let (_, mut material) = ot::dealer_ot_setup(seed, choices.len(), msg_len);
            let outputs = ot::ot_batch_receive_dealer(&choices, &mut material, chan)?;
            (Some(outputs), choices.len() as u64)
        }
        (OtMode::Dealer, None) => panic!("dealer mode requires a dealer seed"),
        (OtMode::Group, _) => (None, 0),
    };

    let stats = MosnStats {
        offline: PhaseStats {
            looping_calls: pstats.looping_calls,
            label_generations: 0,
            ot_instances,
            looping_ms,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        },
        online: PhaseStats::default(),
    };
    Ok(MosnReceiverState {
        params,
        topo,
        rho1,
        prog,
        choices,
        ot_outputs,
        rng,
        stats,
    })
}

/// Sender offline phase: draws all wire labels and in dealer mode answers
/// the gate-correction OTs.
pub fn mosn_sender_offline(
    params: MosnParams,
    dealer_seed: Option<&DealerSeed>,
    mut rng: RandomSource,
    chan: &mut dyn Channel,
) -> Result<MosnSenderState, OsnError> {
    let start = Instant::now();
    let topo = benes::build_topology(params.m)?;
    let labels = sender_labels(&topo, params.ell_bytes, &mut rng);
    let pairs = sender_all_gate_messages(&topo, &labels);
    let msg_len = 2 * params.ell_bytes;

    let (pending_pairs, ot_instances) = match (params.mode, dealer_seed) {
        (OtMode::Dealer, Some(seed)) => {
            let (mut material, _) = ot::dealer_ot_setup(seed, pairs.len(), msg_len);
            ot::ot_batch_send_dealer(&pairs, &mut material, chan)?;
            (None, pairs.len() as u64)
        }
        (OtMode::Dealer, None) => panic!("dealer mode requires a dealer seed"),
        (OtMode::Group, _) => (Some(pairs), 0),
    };

    let stats = MosnStats {
        offline: PhaseStats {
            looping_calls: 0,
            label_generations: labels.generations,
            ot_instances,
            looping_ms: 0.0,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        },
        online: PhaseStats::default(),
    };
    Ok(MosnSenderState {
        params,
        labels,
        pending_pairs,
        rng,
        stats,
    })
}

// ---------------------------------------------------------------------------
// Online phase

fn encode_indices(inj: &Injection) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 * inj.domain_size());
    for &v in inj.as_slice() {
        out.extend_from_slice(&(v as u32).to_be_bytes());
    }
    out
}

fn decode_indices(bytes: &[u8], codomain: usize) -> Result<Injection, OsnError> {
    if bytes.len() % 4 != 0 {
        return Err(OsnError::BadIndexVector);
    }
    let map: Vec<usize> = bytes
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().unwrap()) as usize)
        .collect();
    Injection::from_map(map, codomain).map_err(OsnError::from)
}

/// Receiver online phase: consumes the offline state and the private
/// injection `pi`, returns this side's share of `(u_{pi(i)})_i` together
/// with the session stats.
pub fn mosn_receiver_online(
    mut state: MosnReceiverState,
    pi: &Injection,
    chan: &mut dyn Channel,
) -> Result<(ShareVector, MosnStats), OsnError> {
    let start = Instant::now();
    let params = state.params;
    if pi.codomain_size() != params.m {
        return Err(OsnError::InputSize {
            expected: params.m,
            actual: pi.codomain_size(),
        });
    }

    let masked_flat = expect_frame(chan, MsgType::MaskedVec)?;
    if masked_flat.len() != params.m * params.ell_bytes {
        return Err(OsnError::InputSize {
            expected: params.m * params.ell_bytes,
            actual: masked_flat.len(),
        });
    }
    let masked: Vec<Vec<u8>> = masked_flat
        .chunks_exact(params.ell_bytes)
        .map(|c| c.to_vec())
        .collect();

    let mut online_ot = 0u64;
    let ot_outputs = match state.ot_outputs.take() {
        Some(outputs) => outputs,
        None => {
            online_ot = state.choices.len() as u64;
            ot::ot_group_receive(
                &state.choices,
                2 * params.ell_bytes,
                chan,
                &mut state.rng,
            )?
        }
    };

    let vals = receiver_evaluate(
        &state.topo,
        &state.prog,
        &ot_outputs,
        &masked,
        params.ell_bytes,
    )?;

    let rho2 = compose_rho2(pi, &state.rho1)?;
    chan.send(Frame::new(MsgType::Rho2, encode_indices(&rho2)))?;

    let rows: Vec<Vec<u8>> = rho2.as_slice().iter().map(|&j| vals[j].clone()).collect();
    let mut stats = state.stats;
    stats.online = PhaseStats {
        looping_calls: 0,
        label_generations: 0,
        ot_instances: online_ot,
        looping_ms: 0.0,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok((ShareVector::new(params.ell_bytes, rows), stats))
}

/// Sender online phase: consumes the offline state and the private vector
/// `u`, returns this side's share.
pub fn mosn_sender_online(
    mut state: MosnSenderState,
    u: &[Vec<u8>],
    chan: &mut dyn Channel,
) -> Result<(ShareVector, MosnStats), OsnError> {
    let start = Instant::now();
    let params = state.params;
    if u.len() != params.m {
        return Err(OsnError::InputSize {
            expected: params.m,
            actual: u.len(),
        });
    }
    if let Some(bad) = u.iter().find(|v| v.len() != params.ell_bytes) {
        return Err(OsnError::WidthMismatch {
            expected: params.ell_bytes,
            actual: bad.len(),
        });
    }

    let mut masked_flat = Vec::with_capacity(params.m * params.ell_bytes);
    for (j, val) in u.iter().enumerate() {
        masked_flat.extend_from_slice(&xor_bytes(val, state.labels.a(0, j)));
    }
    chan.send(Frame::new(MsgType::MaskedVec, masked_flat))?;

    let mut online_ot = 0u64;
    if let Some(pairs) = state.pending_pairs.take() {
        online_ot = pairs.len() as u64;
        ot::ot_batch_send_group(&pairs, chan, &mut state.rng)?;
    }

    let rho2 = decode_indices(&expect_frame(chan, MsgType::Rho2)?, params.m)?;
    let final_col = state.labels.final_column();
    let rows: Vec<Vec<u8>> = rho2
        .as_slice()
        .iter()
        .map(|&j| final_col[j].clone())
        .collect();
    let mut stats = state.stats;
    stats.online = PhaseStats {
        looping_calls: 0,
        label_generations: 0,
        ot_instances: online_ot,
        looping_ms: 0.0,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok((ShareVector::new(params.ell_bytes, rows), stats))
}
