//! Private set alignment: secret-shared inner join of two ID-keyed datasets.
//!
//! Level 1 (two parties): P1 learns the intersection IDs and a share column;
//! P2 learns only the cardinality and the other share column. Built from the
//! OPRF (so P2's transcript never contains raw IDs) plus one oblivious
//! switching network run.
//!
//! Level 2 (two owners + server): neither owner learns the intersection; the
//! server matches keyed PRF values it cannot invert, runs one switching
//! network against each owner, and forwards its share columns crosswise.
//! The server learns only the cardinality and the two input sizes.

use crate::crypto::{prf_mmo, share_split, PrfKey, RandomSource, ShareVector};
use crate::oprf::{self, OkvsParams, OprfError};
use crate::osn::{
    self, padded_width, MosnParams, MosnStats, OsnError,
};
use crate::ot::{DealerSeed, OtMode};
use crate::perm::{random_permutation, Injection, PermError};
use crate::transport::{expect_frame, send_abort, Channel, Frame, MsgType, TransportError};
use curve25519_dalek::constants::RISTRETTO_BASEPOINT_TABLE;
use curve25519_dalek::ristretto::CompressedRistretto;
use curve25519_dalek::scalar::Scalar;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MAX_ID_BYTES: usize = 64;

#[derive(Debug, Error)]
pub enum PsaError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Oprf(#[from] OprfError),
    #[error(transparent)]
    Osn(#[from] OsnError),
    #[error(transparent)]
    Perm(#[from] PermError),
    #[error("duplicate id at record {0}")]
    DuplicateId(usize),
    #[error("id at record {0} exceeds {MAX_ID_BYTES} bytes")]
    IdTooLong(usize),
    #[error("attribute at record {index} has width {actual}, dataset declares {declared}")]
    AttrWidth {
        index: usize,
        actual: usize,
        declared: usize,
    },
    #[error("PRF collision within one vector; protocol aborted")]
    PrfCollision,
    #[error("attribute width {actual} does not match configured {expected}")]
    ConfigWidth { expected: usize, actual: usize },
    #[error("malformed frame")]
    BadFrame,
    #[error("share column length {share} disagrees with match count {matches}")]
    ShareCount { share: usize, matches: usize },
}

// ---------------------------------------------------------------------------
// Datasets and the plaintext oracle

/// One party's input: distinct IDs, each with a fixed-width attribute.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    attr_width: usize,
    records: Vec<(Vec<u8>, Vec<u8>)>,
}

impl Dataset {
    pub fn new(attr_width: usize, records: Vec<(Vec<u8>, Vec<u8>)>) -> Result<Dataset, PsaError> {
        let mut seen = std::collections::HashSet::new();
        for (i, (id, attr)) in records.iter().enumerate() {
            if id.len() > MAX_ID_BYTES {
                return Err(PsaError::IdTooLong(i));
            }
            if !seen.insert(id.as_slice()) {
                return Err(PsaError::DuplicateId(i));
            }
            if attr.len() != attr_width {
                return Err(PsaError::AttrWidth {
                    index: i,
                    actual: attr.len(),
                    declared: attr_width,
                });
            }
        }
        Ok(Dataset {
            attr_width,
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn attr_width(&self) -> usize {
        self.attr_width
    }

    pub fn records(&self) -> &[(Vec<u8>, Vec<u8>)] {
        &self.records
    }

    pub fn ids(&self) -> Vec<Vec<u8>> {
        self.records.iter().map(|(id, _)| id.clone()).collect()
    }

    pub fn attrs(&self) -> Vec<Vec<u8>> {
        self.records.iter().map(|(_, a)| a.clone()).collect()
    }
}

/// Test oracle: the exact plaintext inner join on ID equality.
pub fn plain_inner_join(p1: &Dataset, p2: &Dataset) -> Vec<(Vec<u8>, Vec<u8>, Vec<u8>)> {
    let by_id: std::collections::HashMap<&[u8], &[u8]> = p2
        .records
        .iter()
        .map(|(id, v)| (id.as_slice(), v.as_slice()))
        .collect();
    p1.records
        .iter()
        .filter_map(|(id, u)| {
            by_id
                .get(id.as_slice())
                .map(|v| (id.clone(), u.clone(), v.to_vec()))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Matching

/// Aligned index vectors: `y[j[i]] == x[k[i]]` for every matched pair i,
/// in a uniformly shuffled order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexVectors {
    pub j: Vec<usize>,
    pub k: Vec<usize>,
}

impl IndexVectors {
    pub fn cardinality(&self) -> usize {
        self.j.len()
    }
}

/// Matches two PRF-value vectors; duplicates within one vector mean a PRF
/// collision and abort the protocol.
pub fn compute_index_vectors(
    x_prf: &[[u8; 16]],
    y_prf: &[[u8; 16]],
    rng: &mut RandomSource,
) -> Result<IndexVectors, PsaError> {
    let mut y_pos = std::collections::HashMap::with_capacity(y_prf.len());
    for (idx, v) in y_prf.iter().enumerate() {
        if y_pos.insert(*v, idx).is_some() {
            return Err(PsaError::PrfCollision);
        }
    }
    let mut x_seen = std::collections::HashSet::with_capacity(x_prf.len());
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (kx, v) in x_prf.iter().enumerate() {
        if !x_seen.insert(*v) {
            return Err(PsaError::PrfCollision);
        }
        if let Some(&jy) = y_pos.get(v) {
            pairs.push((jy, kx));
        }
    }
    if pairs.len() > 1 {
        let shuffle = random_permutation(pairs.len(), rng).expect("non-empty");
        pairs = shuffle.select(&pairs);
    }
    let (j, k) = pairs.into_iter().unzip();
    Ok(IndexVectors { j, k })
}

// ---------------------------------------------------------------------------
// Shares

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShareRole {
    P1,
    P2,
}

/// One party's half of the joined table: aligned u and v share columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JoinedShares {
    pub role: ShareRole,
    pub u: ShareVector,
    pub v: ShareVector,
}

/// Reconstructs the joined (u, v) rows from both parties' halves.
pub fn reveal_join(a: &JoinedShares, b: &JoinedShares) -> Vec<(Vec<u8>, Vec<u8>)> {
    assert_ne!(a.role, b.role, "need one half from each party");
    a.u.reveal(&b.u)
        .into_iter()
        .zip(a.v.reveal(&b.v))
        .collect()
}

fn trim_rows(sv: ShareVector, width: usize) -> ShareVector {
    ShareVector::new(
        width,
        sv.rows.into_iter().map(|r| r[..width].to_vec()).collect(),
    )
}

fn derived_seed(seed: &DealerSeed, label: &[u8]) -> DealerSeed {
    let mut h = Sha256::new();
    h.update(b"psa-subseed");
    h.update(seed.0);
    h.update(label);
    DealerSeed(h.finalize().into())
}

fn prf_vec_payload(entries: &[[u8; 16]]) -> Vec<u8> {
    entries.iter().flat_map(|e| e.iter().copied()).collect()
}

fn parse_prf_vec(payload: &[u8]) -> Result<Vec<[u8; 16]>, PsaError> {
    if payload.len() % 16 != 0 {
        return Err(PsaError::BadFrame);
    }
    Ok(payload
        .chunks_exact(16)
        .map(|c| c.try_into().unwrap())
        .collect())
}

/// Pads each row with zero bytes up to `width` and appends zero rows up to
/// `rows`, so short vectors fit the switching network's fixed shape.
fn pad_matrix(mut rows_vec: Vec<Vec<u8>>, width: usize, rows: usize) -> Vec<Vec<u8>> {
    for r in &mut rows_vec {
        r.resize(width, 0);
    }
    while rows_vec.len() < rows {
        rows_vec.push(vec![0u8; width]);
    }
    rows_vec
}

// ---------------------------------------------------------------------------
// Level 1

/// Parameters both parties of a level-1 session agree on.
#[derive(Clone, Copy, Debug)]
pub struct Level1Config {
    pub u_width: usize,
    pub v_width: usize,
    /// Base label width in bytes; wider attributes use whole lanes.
    pub ell_bytes: usize,
    pub ot_mode: OtMode,
    pub okvs: OkvsParams,
}

impl Level1Config {
    pub fn new(u_width: usize, v_width: usize, ot_mode: OtMode) -> Level1Config {
        Level1Config {
            u_width,
            v_width,
            ell_bytes: 16,
            ot_mode,
            okvs: OkvsParams::default(),
        }
    }
}

pub struct Level1P1Output {
    /// Matched IDs, in the shuffled output row order.
    pub intersection: Vec<Vec<u8>>,
    pub shares: JoinedShares,
    pub mosn: MosnStats,
}

pub struct Level1P2Output {
    pub cardinality: usize,
    pub shares: JoinedShares,
    pub mosn: MosnStats,
}

fn check_width(ds: &Dataset, expected: usize) -> Result<(), PsaError> {
    if ds.attr_width() != expected {
        return Err(PsaError::ConfigWidth {
            expected,
            actual: ds.attr_width(),
        });
    }
    Ok(())
}

/// P1 side of the single-blinded protocol.
pub fn psa_level1_p1(
    ds: &Dataset,
    cfg: &Level1Config,
    dealer: &DealerSeed,
    chan: &mut dyn Channel,
    rng: &mut RandomSource,
) -> Result<Level1P1Output, PsaError> {
    check_width(ds, cfg.u_width)?;
    let ids = ds.ids();
    let x_prf = oprf::oprf_p1_run(&ids, dealer, &cfg.okvs, chan, rng)?;

    let y_prf = parse_prf_vec(&expect_frame(chan, MsgType::PrfVec)?)?;
    let m = y_prf.len();
    let iv = match compute_index_vectors(&x_prf, &y_prf, rng) {
        Ok(iv) => iv,
        Err(e) => {
            send_abort(chan, "prf collision")?;
            return Err(e);
        }
    };
    let c = iv.cardinality();

    // Oblivious selection of the matched v values.
    let m_net = m.max(2);
    let ell = padded_width(cfg.v_width, cfg.ell_bytes);
    let params = MosnParams {
        m: m_net,
        ell_bytes: ell,
        mode: cfg.ot_mode,
    };
    let mosn_seed = derived_seed(dealer, b"mosn-l1");
    let seed_opt = matches!(cfg.ot_mode, OtMode::Dealer).then_some(&mosn_seed);
    let state = osn::mosn_receiver_offline(params, seed_opt, rng.fork(0x11), chan)?;
    let pi = Injection::from_map(iv.j.clone(), m_net)?;
    let (v_share, mosn) = osn::mosn_receiver_online(state, &pi, chan)?;

    // Share out the matched u values; one share column goes to P2.
    let attrs = ds.attrs();
    let mut u_rows = Vec::with_capacity(c);
    let mut payload = Vec::with_capacity(c * cfg.u_width);
    for &kx in &iv.k {
        let (mine, theirs) = share_split(&attrs[kx], rng);
        u_rows.push(mine);
        payload.extend_from_slice(&theirs);
    }
    chan.send(Frame::new(MsgType::ShareVec, payload))?;

    let intersection = iv.k.iter().map(|&kx| ids[kx].clone()).collect();
    Ok(Level1P1Output {
        intersection,
        shares: JoinedShares {
            role: ShareRole::P1,
            u: ShareVector::new(cfg.u_width, u_rows),
            v: trim_rows(v_share, cfg.v_width),
        },
        mosn,
    })
}

/// P2 side of the single-blinded protocol.
pub fn psa_level1_p2(
    ds: &Dataset,
    cfg: &Level1Config,
    dealer: &DealerSeed,
    chan: &mut dyn Channel,
    rng: &mut RandomSource,
) -> Result<Level1P2Output, PsaError> {
    check_width(ds, cfg.v_width)?;
    let seed = oprf::oprf_p2_run(dealer, &cfg.okvs, chan)?;
    let y_tilde: Vec<[u8; 16]> = ds.ids().iter().map(|y| oprf::oprf_eval_seed(&seed, y)).collect();

    // One permutation shuffles the PRF vector and the attributes together.
    let m = ds.len();
    let (y_shuf, v_shuf) = if m > 1 {
        let shuffle = random_permutation(m, rng)?;
        (shuffle.select(&y_tilde), shuffle.select(&ds.attrs()))
    } else {
        (y_tilde, ds.attrs())
    };
    chan.send(Frame::new(MsgType::PrfVec, prf_vec_payload(&y_shuf)))?;

    let m_net = m.max(2);
    let ell = padded_width(cfg.v_width, cfg.ell_bytes);
    let params = MosnParams {
        m: m_net,
        ell_bytes: ell,
        mode: cfg.ot_mode,
    };
    let mosn_seed = derived_seed(dealer, b"mosn-l1");
    let seed_opt = matches!(cfg.ot_mode, OtMode::Dealer).then_some(&mosn_seed);
    let state = osn::mosn_sender_offline(params, seed_opt, rng.fork(0x12), chan)?;
    let v_padded = pad_matrix(v_shuf, ell, m_net);
    let (v_share, mosn) = osn::mosn_sender_online(state, &v_padded, chan)?;
    let c = v_share.len();

    let payload = expect_frame(chan, MsgType::ShareVec)?;
    if cfg.u_width != 0 && payload.len() != c * cfg.u_width {
        return Err(PsaError::ShareCount {
            share: payload.len() / cfg.u_width.max(1),
            matches: c,
        });
    }
    let u_rows: Vec<Vec<u8>> = payload
        .chunks(cfg.u_width.max(1))
        .take(c)
        .map(|r| r.to_vec())
        .collect();
    debug_assert_eq!(u_rows.len(), c);

    Ok(Level1P2Output {
        cardinality: c,
        shares: JoinedShares {
            role: ShareRole::P2,
            u: ShareVector::new(cfg.u_width, u_rows),
            v: trim_rows(v_share, cfg.v_width),
        },
        mosn,
    })
}

// ---------------------------------------------------------------------------
// Level 2

/// Parameters all three parties of a level-2 session agree on.
#[derive(Clone, Copy, Debug)]
pub struct Level2Config {
    pub u_width: usize,
    pub v_width: usize,
    pub ell_bytes: usize,
    pub ot_mode: OtMode,
}

impl Level2Config {
    pub fn new(u_width: usize, v_width: usize, ot_mode: OtMode) -> Level2Config {
        Level2Config {
            u_width,
            v_width,
            ell_bytes: 16,
            ot_mode,
        }
    }
}

pub struct Level2OwnerOutput {
    pub cardinality: usize,
    pub shares: JoinedShares,
    pub mosn: MosnStats,
}

pub struct Level2ServerOutput {
    pub cardinality: usize,
    pub n: usize,
    pub m: usize,
    pub mosn_u: MosnStats,
    pub mosn_v: MosnStats,
}

/// Ephemeral Diffie-Hellman over the owners' mutual channel; both sides
/// derive the same 128-bit PRF key. The server never sees these frames.
pub fn key_exchange(chan: &mut dyn Channel, rng: &mut RandomSource) -> Result<PrfKey, PsaError> {
    let mut wide = [0u8; 64];
    rng.fill_bytes(&mut wide);
    let sk = Scalar::from_bytes_mod_order_wide(&wide);
    let pk = RISTRETTO_BASEPOINT_TABLE * &sk;
    chan.send(Frame::new(MsgType::Keyx, pk.compress().as_bytes().to_vec()))?;
    let peer_bytes = expect_frame(chan, MsgType::Keyx)?;
    let peer_arr: [u8; 32] = peer_bytes.as_slice().try_into().map_err(|_| PsaError::BadFrame)?;
    let peer = CompressedRistretto(peer_arr)
        .decompress()
        .ok_or(PsaError::BadFrame)?;
    let shared = peer * sk;
    let mut h = Sha256::new();
    h.update(b"psa-keyx");
    h.update(shared.compress().as_bytes());
    let digest = h.finalize();
    Ok(PrfKey(digest[..16].try_into().unwrap()))
}

/// Common owner-side flow: PRF the IDs, shuffle jointly with the attributes,
/// send the PRF vector to the server, act as switching-network sender, then
/// receive the forwarded share column of the other attribute.
fn level2_owner(
    ds: &Dataset,
    own_width: usize,
    other_width: usize,
    cfg: &Level2Config,
    dealer: Option<&DealerSeed>,
    ch_peer: &mut dyn Channel,
    ch_server: &mut dyn Channel,
    rng: &mut RandomSource,
    role: ShareRole,
) -> Result<Level2OwnerOutput, PsaError> {
    check_width(ds, own_width)?;
    let r = key_exchange(ch_peer, rng)?;
    let prf: Vec<[u8; 16]> = ds.ids().iter().map(|id| prf_mmo(&r, id)).collect();

    let n = ds.len();
    let (prf_shuf, attr_shuf) = if n > 1 {
        let shuffle = random_permutation(n, rng)?;
        (shuffle.select(&prf), shuffle.select(&ds.attrs()))
    } else {
        (prf, ds.attrs())
    };
    ch_server.send(Frame::new(MsgType::PrfVec, prf_vec_payload(&prf_shuf)))?;

    let n_net = n.max(2);
    let ell = padded_width(own_width, cfg.ell_bytes);
    let params = MosnParams {
        m: n_net,
        ell_bytes: ell,
        mode: cfg.ot_mode,
    };
    if matches!(cfg.ot_mode, OtMode::Dealer) {
        assert!(dealer.is_some(), "dealer mode requires a pre-shared seed");
    }
    let state = osn::mosn_sender_offline(params, dealer, rng.fork(0x21), ch_server)?;
    let padded = pad_matrix(attr_shuf, ell, n_net);
    let (own_share, mosn) = osn::mosn_sender_online(state, &padded, ch_server)?;
    let c = own_share.len();

    // The server's share of the *other* owner's column, forwarded here.
    let fwd = expect_frame(ch_server, MsgType::ShareVec)?;
    let other_ell = padded_width(other_width, cfg.ell_bytes);
    if fwd.len() != c * other_ell {
        return Err(PsaError::ShareCount {
            share: fwd.len() / other_ell.max(1),
            matches: c,
        });
    }
    let other_rows: Vec<Vec<u8>> = fwd.chunks_exact(other_ell).map(|r| r.to_vec()).collect();
    let other_share = trim_rows(ShareVector::new(other_ell, other_rows), other_width);
    let own_share = trim_rows(own_share, own_width);

    let (u, v) = match role {
        ShareRole::P1 => (own_share, other_share),
        ShareRole::P2 => (other_share, own_share),
    };
    Ok(Level2OwnerOutput {
        cardinality: c,
        shares: JoinedShares { role, u, v },
        mosn,
    })
}

/// P1 side of the double-blinded protocol.
pub fn psa_level2_p1(
    ds: &Dataset,
    cfg: &Level2Config,
    dealer: Option<&DealerSeed>,
    ch_p2: &mut dyn Channel,
    ch_server: &mut dyn Channel,
    rng: &mut RandomSource,
) -> Result<Level2OwnerOutput, PsaError> {
    level2_owner(
        ds,
        cfg.u_width,
        cfg.v_width,
        cfg,
        dealer,
        ch_p2,
        ch_server,
        rng,
        ShareRole::P1,
    )
}

/// P2 side of the double-blinded protocol.
pub fn psa_level2_p2(
    ds: &Dataset,
    cfg: &Level2Config,
    dealer: Option<&DealerSeed>,
    ch_p1: &mut dyn Channel,
    ch_server: &mut dyn Channel,
    rng: &mut RandomSource,
) -> Result<Level2OwnerOutput, PsaError> {
    level2_owner(
        ds,
        cfg.v_width,
        cfg.u_width,
        cfg,
        dealer,
        ch_p1,
        ch_server,
        rng,
        ShareRole::P2,
    )
}

/// Server side: matches the two PRF vectors, runs one switching network per
/// owner as receiver, and forwards its share columns crosswise.
pub fn psa_level2_server(
    cfg: &Level2Config,
    dealer_p1: Option<&DealerSeed>,
    dealer_p2: Option<&DealerSeed>,
    ch_p1: &mut dyn Channel,
    ch_p2: &mut dyn Channel,
    rng: &mut RandomSource,
) -> Result<Level2ServerOutput, PsaError> {
    let x_prf = parse_prf_vec(&expect_frame(ch_p1, MsgType::PrfVec)?)?;
    let y_prf = parse_prf_vec(&expect_frame(ch_p2, MsgType::PrfVec)?)?;
    let (n, m) = (x_prf.len(), y_prf.len());
    let iv = match compute_index_vectors(&x_prf, &y_prf, rng) {
        Ok(iv) => iv,
        Err(e) => {
            send_abort(ch_p1, "prf collision")?;
            send_abort(ch_p2, "prf collision")?;
            return Err(e);
        }
    };
    let c = iv.cardinality();

    // Selection of matched u values from P1.
    let u_ell = padded_width(cfg.u_width, cfg.ell_bytes);
    let params_u = MosnParams {
        m: n.max(2),
        ell_bytes: u_ell,
        mode: cfg.ot_mode,
    };
    let state = osn::mosn_receiver_offline(params_u, dealer_p1, rng.fork(0x31), ch_p1)?;
    let pi_k = Injection::from_map(iv.k.clone(), n.max(2))?;
    let (u_share, mosn_u) = osn::mosn_receiver_online(state, &pi_k, ch_p1)?;

    // Selection of matched v values from P2.
    let v_ell = padded_width(cfg.v_width, cfg.ell_bytes);
    let params_v = MosnParams {
        m: m.max(2),
        ell_bytes: v_ell,
        mode: cfg.ot_mode,
    };
    let state = osn::mosn_receiver_offline(params_v, dealer_p2, rng.fork(0x32), ch_p2)?;
    let pi_j = Injection::from_map(iv.j.clone(), m.max(2))?;
    let (v_share, mosn_v) = osn::mosn_receiver_online(state, &pi_j, ch_p2)?;

    // Crosswise forwarding: u column to P2, v column to P1.
    let u_payload: Vec<u8> = u_share.rows.iter().flatten().copied().collect();
    ch_p2.send(Frame::new(MsgType::ShareVec, u_payload))?;
    let v_payload: Vec<u8> = v_share.rows.iter().flatten().copied().collect();
    ch_p1.send(Frame::new(MsgType::ShareVec, v_payload))?;

    Ok(Level2ServerOutput {
        cardinality: c,
        n,
        m,
        mosn_u,
        mosn_v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::memory_pair;

    fn rng(seed: u8) -> RandomSource {
        RandomSource::from_seed([seed; 32])
    }

    fn dataset(ids: &[&str], width: usize, seed: u8) -> Dataset {
        let mut r = rng(seed);
        Dataset::new(
            width,
            ids.iter().map(|id| (id.as_bytes().to_vec(), r.bytes(width))).collect(),
        )
        .unwrap()
    }

    #[test]
    fn dataset_validation() {
        assert!(matches!(
            Dataset::new(2, vec![(b"a".to_vec(), vec![0, 1]), (b"a".to_vec(), vec![2, 3])]),
            Err(PsaError::DuplicateId(1))
        ));
        assert!(matches!(
            Dataset::new(2, vec![(b"a".to_vec(), vec![0])]),
            Err(PsaError::AttrWidth { .. })
        ));
        assert!(matches!(
            Dataset::new(1, vec![(vec![0u8; 65], vec![0])]),
            Err(PsaError::IdTooLong(0))
        ));
    }

    #[test]
    fn plain_join_examples() {
        let d1 = dataset(&["a", "b", "c"], 4, 1);
        let d2 = dataset(&["b", "c", "d"], 4, 2);
        let join = plain_inner_join(&d1, &d2);
        let ids: Vec<&[u8]> = join.iter().map(|(id, _, _)| id.as_slice()).collect();
        assert_eq!(ids, vec![b"b".as_slice(), b"c".as_slice()]);
        assert!(plain_inner_join(&d1, &dataset(&["x", "y"], 4, 3)).is_empty());
        assert_eq!(plain_inner_join(&d1, &dataset(&["a", "b", "c"], 4, 4)).len(), 3);
    }

    #[test]
    fn index_vectors_matching() {
        let p = [1u8; 16];
        let q = [2u8; 16];
        let r_ = [3u8; 16];
        let s = [4u8; 16];
        let mut rg = rng(5);
        let iv = compute_index_vectors(&[p, q, r_], &[s, q, p], &mut rg).unwrap();
        assert_eq!(iv.cardinality(), 2);
        let set: std::collections::HashSet<(usize, usize)> =
            iv.j.iter().copied().zip(iv.k.iter().copied()).collect();
        assert_eq!(set, [(2usize, 0usize), (1, 1)].into_iter().collect());
    }

    #[test]
    fn index_vectors_disjoint_and_identical() {
        let mut rg = rng(6);
        let a: Vec<[u8; 16]> = (0u8..8).map(|i| [i; 16]).collect();
        let b: Vec<[u8; 16]> = (8u8..16).map(|i| [i; 16]).collect();
        let iv = compute_index_vectors(&a, &b, &mut rg).unwrap();
        assert_eq!(iv.cardinality(), 0);
        let iv = compute_index_vectors(&a, &a, &mut rg).unwrap();
        assert_eq!(iv.cardinality(), 8);
        let mut k = iv.k.clone();
        k.sort_unstable();
        assert_eq!(k, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn index_vectors_collision_aborts() {
        let mut rg = rng(7);
        let dup = [[1u8; 16], [1u8; 16]];
        let other = [[9u8; 16]];
        assert!(matches!(
            compute_index_vectors(&dup, &other, &mut rg),
            Err(PsaError::PrfCollision)
        ));
        assert!(matches!(
            compute_index_vectors(&other, &dup, &mut rg),
            Err(PsaError::PrfCollision)
        ));
    }

    fn run_level1(
        d1: Dataset,
        d2: Dataset,
        mode: OtMode,
        seed: u8,
    ) -> (Level1P1Output, Level1P2Output) {
        let cfg = Level1Config::new(d1.attr_width(), d2.attr_width(), mode);
        let dealer = DealerSeed([seed; 32]);
        let (mut ch1, mut ch2) = memory_pair();
        let p2 = std::thread::spawn(move || {
            let mut r = rng(seed.wrapping_add(1));
            psa_level1_p2(&d2, &cfg, &DealerSeed([seed; 32]), &mut ch2, &mut r).unwrap()
        });
        let mut r = rng(seed.wrapping_add(2));
        let out1 = psa_level1_p1(&d1, &cfg, &dealer, &mut ch1, &mut r).unwrap();
        (out1, p2.join().unwrap())
    }

    fn join_multiset(join: &[(Vec<u8>, Vec<u8>, Vec<u8>)]) -> Vec<(Vec<u8>, Vec<u8>)> {
        let mut v: Vec<(Vec<u8>, Vec<u8>)> =
            join.iter().map(|(_, u, w)| (u.clone(), w.clone())).collect();
        v.sort();
        v
    }

    #[test]
    fn level1_three_record_example() {
        let d1 = dataset(&["a", "b", "c"], 8, 10);
        let d2 = dataset(&["b", "c", "d"], 8, 11);
        let expect = plain_inner_join(&d1, &d2);
        let (o1, o2) = run_level1(d1, d2, OtMode::Dealer, 12);
        assert_eq!(o1.intersection.len(), 2);
        let mut ids = o1.intersection.clone();
        ids.sort();
        assert_eq!(ids, vec![b"b".to_vec(), b"c".to_vec()]);
        let mut got = reveal_join(&o1.shares, &o2.shares);
        got.sort();
        assert_eq!(got, join_multiset(&expect));
        assert_eq!(o2.cardinality, 2);
    }

    #[test]
    fn level1_disjoint() {
        let d1 = dataset(&["a", "b"], 4, 13);
        let d2 = dataset(&["x", "y", "z"], 4, 14);
        let (o1, o2) = run_level1(d1, d2, OtMode::Dealer, 15);
        assert!(o1.intersection.is_empty());
        assert_eq!(o2.cardinality, 0);
        assert!(reveal_join(&o1.shares, &o2.shares).is_empty());
    }

    #[test]
    fn level1_full_overlap_group_mode() {
        let ids: Vec<String> = (0..64).map(|i| format!("id{i:03}")).collect();
        let refs: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
        let d1 = dataset(&refs, 16, 16);
        let d2 = dataset(&refs, 16, 17);
        let expect = plain_inner_join(&d1, &d2);
        let (o1, o2) = run_level1(d1, d2, OtMode::Group, 18);
        assert_eq!(o1.intersection.len(), 64);
        let mut got = reveal_join(&o1.shares, &o2.shares);
        got.sort();
        assert_eq!(got, join_multiset(&expect));
    }

    #[test]
    fn level1_mismatched_widths() {
        // u and v widths differ, v wider than one lane.
        let d1 = dataset(&["a", "b", "c", "d"], 3, 20);
        let d2 = dataset(&["c", "d", "e"], 37, 21);
        let expect = plain_inner_join(&d1, &d2);
        let (o1, o2) = run_level1(d1, d2, OtMode::Dealer, 22);
        let mut got = reveal_join(&o1.shares, &o2.shares);
        got.sort();
        assert_eq!(got, join_multiset(&expect));
    }

    #[test]
    fn level1_output_order_uniform() {
        // Fixed inputs, fresh randomness: a fixed matched ID's row position
        // should be uniform over [c].
        let d1 = dataset(&["a", "b", "c", "d"], 4, 23);
        let d2 = dataset(&["a", "b", "c", "d"], 4, 24);
        let c = 4;
        let trials = 400;
        let mut counts = vec![0u32; c];
        for t in 0..trials {
            let (o1, _) = run_level1(d1.clone(), d2.clone(), OtMode::Dealer, t as u8);
            let pos = o1
                .intersection
                .iter()
                .position(|id| id == b"a")
                .expect("a is matched");
            counts[pos] += 1;
        }
        let mean = trials as f64 / c as f64;
        let sigma = (mean * (1.0 - 1.0 / c as f64)).sqrt();
        for (slot, &cnt) in counts.iter().enumerate() {
            assert!(
                (cnt as f64 - mean).abs() < 4.0 * sigma,
                "slot {slot}: {cnt} of {trials}"
            );
        }
    }

    #[test]
    fn level1_p2_transcript_has_no_raw_id_frames() {
        let d1 = dataset(&["a", "b", "c"], 8, 25);
        let d2 = dataset(&["b", "c", "d"], 8, 26);
        let cfg = Level1Config::new(8, 8, OtMode::Dealer);
        let dealer = DealerSeed([27u8; 32]);
        let (mut ch1, mut ch2) = memory_pair();
        let p2 = std::thread::spawn(move || {
            let mut r = rng(28);
            let out = psa_level1_p2(&d2, &cfg, &DealerSeed([27u8; 32]), &mut ch2, &mut r).unwrap();
            (out, ch2.stats())
        });
        let mut r = rng(29);
        psa_level1_p1(&d1, &cfg, &dealer, &mut ch1, &mut r).unwrap();
        let (_, stats) = p2.join().unwrap();
        let allowed = [
            MsgType::OprfRAndAPrime,
            MsgType::OtR2S,
            MsgType::Rho2,
            MsgType::ShareVec,
        ];
        for t in stats.received_types() {
            assert!(allowed.contains(&t), "unexpected frame type {t:?} at P2");
        }
    }

    fn run_level2(
        d1: Dataset,
        d2: Dataset,
        mode: OtMode,
        seed: u8,
    ) -> (Level2OwnerOutput, Level2OwnerOutput, Level2ServerOutput) {
        let cfg = Level2Config::new(d1.attr_width(), d2.attr_width(), mode);
        let dealer1 = DealerSeed([seed; 32]);
        let dealer2 = DealerSeed([seed.wrapping_add(1); 32]);
        let use_dealer = matches!(mode, OtMode::Dealer);
        let (mut p1_p2, mut p2_p1) = memory_pair();
        let (mut p1_sv, mut sv_p1) = memory_pair();
        let (mut p2_sv, mut sv_p2) = memory_pair();
        let h1 = std::thread::spawn(move || {
            let mut r = rng(seed.wrapping_add(2));
            let d = use_dealer.then_some(&dealer1);
            psa_level2_p1(&d1, &cfg, d, &mut p1_p2, &mut p1_sv, &mut r).unwrap()
        });
        let h2 = std::thread::spawn(move || {
            let mut r = rng(seed.wrapping_add(3));
            let d = use_dealer.then_some(&dealer2);
            psa_level2_p2(&d2, &cfg, d, &mut p2_p1, &mut p2_sv, &mut r).unwrap()
        });
        let mut r = rng(seed.wrapping_add(4));
        let d1s = DealerSeed([seed; 32]);
        let d2s = DealerSeed([seed.wrapping_add(1); 32]);
        let server = psa_level2_server(
            &cfg,
            use_dealer.then_some(&d1s),
            use_dealer.then_some(&d2s),
            &mut sv_p1,
            &mut sv_p2,
            &mut r,
        )
        .unwrap();
        (h1.join().unwrap(), h2.join().unwrap(), server)
    }

    #[test]
    fn level2_three_record_example() {
        let d1 = dataset(&["a", "b", "c"], 8, 30);
        let d2 = dataset(&["b", "c", "d"], 8, 31);
        let expect = plain_inner_join(&d1, &d2);
        let (o1, o2, sv) = run_level2(d1, d2, OtMode::Dealer, 32);
        assert_eq!((sv.cardinality, sv.n, sv.m), (2, 3, 3));
        assert_eq!(o1.cardinality, 2);
        assert_eq!(o2.cardinality, 2);
        let mut got = reveal_join(&o1.shares, &o2.shares);
        got.sort();
        assert_eq!(got, join_multiset(&expect));
    }

    #[test]
    fn level2_disjoint() {
        let d1 = dataset(&["a"], 4, 33);
        let d2 = dataset(&["z", "w"], 4, 34);
        let (o1, o2, sv) = run_level2(d1, d2, OtMode::Dealer, 35);
        assert_eq!(sv.cardinality, 0);
        assert!(reveal_join(&o1.shares, &o2.shares).is_empty());
    }

    #[test]
    fn level2_group_mode_random() {
        let ids1: Vec<String> = (0..40).map(|i| format!("k{i}")).collect();
        let ids2: Vec<String> = (20..60).map(|i| format!("k{i}")).collect();
        let r1: Vec<&str> = ids1.iter().map(|s| s.as_str()).collect();
        let r2: Vec<&str> = ids2.iter().map(|s| s.as_str()).collect();
        let d1 = dataset(&r1, 12, 36);
        let d2 = dataset(&r2, 20, 37);
        let expect = plain_inner_join(&d1, &d2);
        let (o1, o2, sv) = run_level2(d1, d2, OtMode::Group, 38);
        assert_eq!(sv.cardinality, 20);
        let mut got = reveal_join(&o1.shares, &o2.shares);
        got.sort();
        assert_eq!(got, join_multiset(&expect));
    }

    #[test]
    fn level2_server_transcript_scope() {
        let d1 = dataset(&["a", "b", "c"], 8, 40);
        let d2 = dataset(&["b", "c"], 8, 41);
        let cfg = Level2Config::new(8, 8, OtMode::Dealer);
        let ds1 = DealerSeed([42u8; 32]);
        let ds2 = DealerSeed([43u8; 32]);
        let (mut p1_p2, mut p2_p1) = memory_pair();
        let (mut p1_sv, mut sv_p1) = memory_pair();
        let (mut p2_sv, mut sv_p2) = memory_pair();
        let h1 = std::thread::spawn(move || {
            let mut r = rng(44);
            psa_level2_p1(&d1, &cfg, Some(&DealerSeed([42u8; 32])), &mut p1_p2, &mut p1_sv, &mut r)
                .unwrap()
        });
        let h2 = std::thread::spawn(move || {
            let mut r = rng(45);
            psa_level2_p2(&d2, &cfg, Some(&DealerSeed([43u8; 32])), &mut p2_p1, &mut p2_sv, &mut r)
                .unwrap()
        });
        let mut r = rng(46);
        psa_level2_server(&cfg, Some(&ds1), Some(&ds2), &mut sv_p1, &mut sv_p2, &mut r).unwrap();
        h1.join().unwrap();
        h2.join().unwrap();
        let allowed = [MsgType::PrfVec, MsgType::OtS2R, MsgType::MaskedVec];
        for stats in [sv_p1.stats(), sv_p2.stats()] {
            for t in stats.received_types() {
                assert!(allowed.contains(&t), "unexpected frame {t:?} at server");
            }
            // Every PRF-vector entry is a fixed-width PRF output.
            assert_eq!(stats.payload_received_of(MsgType::PrfVec) % 16, 0);
        }
    }

    #[test]
    fn key_exchange_agrees() {
        let (mut a, mut b) = memory_pair();
        let h = std::thread::spawn(move || {
            let mut r = rng(50);
            key_exchange(&mut b, &mut r).unwrap()
        });
        let mut r = rng(51);
        let k1 = key_exchange(&mut a, &mut r).unwrap();
        let k2 = h.join().unwrap();
        assert_eq!(k1.0, k2.0);
    }
}
