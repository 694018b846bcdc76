//! Closed-form cost model for a homomorphic-encryption baseline of the same
//! join, used for comparison tables.
//!
//! All per-record costs are milliseconds on the reference hardware the
//! constants were measured on; communication is exact.

/// Per-operation constants: encrypt, subtract, decrypt, key generation
/// (milliseconds) and key size (bits) at 128-bit security.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeCostModel {
    pub encrypt_ms: f64,
    pub subtract_ms: f64,
    pub decrypt_ms: f64,
    pub keygen_ms: f64,
    pub key_size_bits: u64,
}

impl Default for HeCostModel {
    fn default() -> HeCostModel {
        HeCostModel {
            encrypt_ms: 0.25,
            subtract_ms: 0.065,
            decrypt_ms: 2.38,
            keygen_ms: 1175.16,
            key_size_bits: 3072,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeEstimate {
    pub comm_bytes: u64,
    pub runtime_s: f64,
}

/// Predicted total communication and wall time for an HE-based join of two
/// n-record sets with overlap fraction `alpha` over a link of
/// `bandwidth_bits_per_s`.
///
/// Both directions pay n ciphertexts plus 2*alpha*n for the matched records;
/// each party encrypts its inputs, and the matched records additionally cost
/// one subtraction and one decryption. The leading factor 2 counts both
/// parties; `keygen` and the transfer delay are paid once per party.
pub fn estimate_he(
    n: u64,
    alpha: f64,
    bandwidth_bits_per_s: u64,
    model: &HeCostModel,
) -> HeEstimate {
    assert!((0.0..=1.0).contains(&alpha), "alpha must be in [0, 1]");
    assert!(bandwidth_bits_per_s > 0);
    let comm_bits = 2.0 * n as f64 * model.key_size_bits as f64 * (1.0 + 2.0 * alpha);
    let delay_ms = comm_bits / bandwidth_bits_per_s as f64 * 1000.0;
    let compute_ms = n as f64
        * ((1.0 + alpha) * model.encrypt_ms
            + alpha * model.subtract_ms
            + alpha * model.decrypt_ms);
    let runtime_ms = 2.0 * (compute_ms + model.keygen_ms + delay_ms);
    HeEstimate {
        comm_bytes: (comm_bits / 8.0).round() as u64,
        runtime_s: runtime_ms / 1000.0,
    }
}

pub const MIB: f64 = 1024.0 * 1024.0;
