//! Field arithmetic, keyed PRF, random oracles and XOR secret sharing.
//!
//! Everything here is deterministic given its inputs; the only source of
//! randomness is an explicit [`RandomSource`].

use aes::cipher::{Array, BlockCipherEncrypt, KeyInit};
use aes::Aes128;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// An element of GF(2^128) with reduction polynomial x^128 + x^7 + x^2 + x + 1.
///
/// Bit i of the inner value is the coefficient of x^i. Addition is XOR.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct F128(pub u128);

impl F128 {
    pub const ZERO: F128 = F128(0);
    pub const ONE: F128 = F128(1);

    pub fn from_bytes(b: &[u8; 16]) -> F128 {
        F128(u128::from_le_bytes(*b))
    }

    pub fn to_bytes(self) -> [u8; 16] {
        self.0.to_le_bytes()
    }
}

impl std::ops::Add for F128 {
    type Output = F128;
    fn add(self, rhs: F128) -> F128 {
        F128(self.0 ^ rhs.0)
    }
}

impl std::ops::BitXor for F128 {
    type Output = F128;
    fn bitxor(self, rhs: F128) -> F128 {
        F128(self.0 ^ rhs.0)
    }
}

impl std::ops::Mul for F128 {
    type Output = F128;
    fn mul(self, rhs: F128) -> F128 {
        gf128_mul(self, rhs)
    }
}

impl std::fmt::Debug for F128 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "F128({:032x})", self.0)
    }
}

/// Carry-less 64x64 -> 128 bit multiplication.
fn clmul64(a: u64, b: u64) -> u128 {
    let a = a as u128;
    let mut acc = 0u128;
    let mut b = b;
    let mut shift = 0;
    while b != 0 {
        let tz = b.trailing_zeros();
        shift += tz;
        acc ^= a << shift;
        b >>= tz;
        b >>= 1;
        shift += 1;
    }
    acc
}

/// Multiplication in GF(2^128) under x^128 + x^7 + x^2 + x + 1.
///
/// Schoolbook split into 64-bit halves, then reduction of the 256-bit
/// carry-less product. x^128 == x^7 + x^2 + x + 1, i.e. 0x87.
pub fn gf128_mul(a: F128, b: F128) -> F128 {
    let (a0, a1) = (a.0 as u64, (a.0 >> 64) as u64);
    let (b0, b1) = (b.0 as u64, (b.0 >> 64) as u64);
    let z0 = clmul64(a0, b0);
    let z2 = clmul64(a1, b1);
    let z1 = clmul64(a0, b1) ^ clmul64(a1, b0);
    let mut lo = z0 ^ (z1 << 64);
    let mut hi = z2 ^ (z1 >> 64);

    // Two folding rounds; the second input is at most 7 bits wide so the
    // second round cannot overflow again.
    for _ in 0..2 {
        if hi == 0 {
            break;
        }
        let mut new_lo = 0u128;
        let mut new_hi = 0u128;
        for j in [0u32, 1, 2, 7] {
            new_lo ^= hi << j;
            if j > 0 {
                new_hi ^= hi >> (128 - j);
            }
        }
        lo ^= new_lo;
        hi = new_hi;
    }
    F128(lo)
}

/// A 128-bit AES key for the MMO hash.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrfKey(pub [u8; 16]);

impl PrfKey {
    pub fn random(rng: &mut RandomSource) -> PrfKey {
        let mut k = [0u8; 16];
        rng.fill_bytes(&mut k);
        PrfKey(k)
    }
}

/// Keyed hash in Matyas-Meyer-Oseas mode: E_k(sigma(msg)) ^ sigma(msg).
///
/// Messages of at most 16 bytes are zero-padded to one AES block; longer
/// messages are first compressed with SHA-256 truncated to 16 bytes.
pub fn prf_mmo(key: &PrfKey, msg: &[u8]) -> [u8; 16] {
    let mut block = [0u8; 16];
    if msg.len() <= 16 {
        block[..msg.len()].copy_from_slice(msg);
    } else {
        let digest = Sha256::digest(msg);
        block.copy_from_slice(&digest[..16]);
    }
    let cipher = Aes128::new(&Array::from(key.0));
    let mut ct = Array::from(block);
    cipher.encrypt_block(&mut ct);
    let mut out = [0u8; 16];
    for i in 0..16 {
        out[i] = ct[i] ^ block[i];
    }
    out
}

/// Domain-separated random oracle into GF(2^128).
pub fn random_oracle_to_field(domain_tag: u8, msg: &[u8]) -> F128 {
    let mut h = Sha256::new();
    h.update([domain_tag]);
    h.update(msg);
    let digest = h.finalize();
    let mut b = [0u8; 16];
    b.copy_from_slice(&digest[..16]);
    F128::from_bytes(&b)
}

/// Deterministic CSPRNG stream seeded with 256 bits.
///
/// Protocol runs use [`RandomSource::from_entropy`]; tests pass a fixed seed
/// for bit-for-bit reproducibility. Not shareable between threads; each
/// protocol session owns one.
pub struct RandomSource {
    rng: ChaCha20Rng,
}

impl RandomSource {
    pub fn from_seed(seed: [u8; 32]) -> RandomSource {
        RandomSource {
            rng: ChaCha20Rng::from_seed(seed),
        }
    }

    pub fn from_entropy() -> RandomSource {
        let mut seed = [0u8; 32];
        rand::rng().fill_bytes(&mut seed);
        RandomSource::from_seed(seed)
    }

    /// Derives an independent child stream, tagged so siblings never collide.
    pub fn fork(&mut self, tag: u8) -> RandomSource {
        let mut seed = [0u8; 32];
        self.fill_bytes(&mut seed);
        seed[0] ^= tag;
        RandomSource::from_seed(seed)
    }

    pub fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst);
    }

    pub fn bytes(&mut self, n: usize) -> Vec<u8> {
        let mut v = vec![0u8; n];
        self.fill_bytes(&mut v);
        v
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw from [0, bound) by rejection sampling.
    pub fn index(&mut self, bound: usize) -> usize {
        assert!(bound > 0);
        let bound = bound as u64;
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.rng.next_u64();
            if v < zone {
                return (v % bound) as usize;
            }
        }
    }

    pub fn bool(&mut self) -> bool {
        self.rng.next_u64() & 1 == 1
    }

    pub fn field_element(&mut self) -> F128 {
        let mut b = [0u8; 16];
        self.fill_bytes(&mut b);
        F128::from_bytes(&b)
    }
}

/// Splits `x` into two XOR shares: a uniform mask and `x ^ mask`.
pub fn share_split(x: &[u8], rng: &mut RandomSource) -> (Vec<u8>, Vec<u8>) {
    let share1 = rng.bytes(x.len());
    let share2: Vec<u8> = x.iter().zip(&share1).map(|(a, b)| a ^ b).collect();
    (share1, share2)
}

/// One party's half of a vector of fixed-width XOR-shared values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareVector {
    pub width_bytes: usize,
    pub rows: Vec<Vec<u8>>,
}

impl ShareVector {
    pub fn new(width_bytes: usize, rows: Vec<Vec<u8>>) -> ShareVector {
        assert!(rows.iter().all(|r| r.len() == width_bytes));
        ShareVector { width_bytes, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Coordinate-wise XOR with the other party's half.
    pub fn reveal(&self, other: &ShareVector) -> Vec<Vec<u8>> {
        assert_eq!(self.width_bytes, other.width_bytes);
        assert_eq!(self.rows.len(), other.rows.len());
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x ^ y).collect())
            .collect()
    }
}

pub fn xor_bytes(a: &[u8], b: &[u8]) -> Vec<u8> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

pub fn xor_in_place(dst: &mut [u8], src: &[u8]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}
