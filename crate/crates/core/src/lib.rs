//! Private set alignment (PSA): secret-shared inner join of two ID-keyed
//! datasets, built around an obliviously evaluated Benes switching network.
//!
//! Modules, bottom-up:
//!
//! * [`crypto`] - GF(2^128), MMO-mode keyed PRF, random oracles, XOR sharing.
//! * [`perm`] - permutations and injections.
//! * [`benes`] - generalized Benes network construction and programming.
//! * [`transport`] - frame format, in-memory / TCP / throttled channels.
//! * [`ot`] - batched 1-out-of-2 oblivious transfer (group and dealer modes).
//! * [`osn`] - oblivious switching network protocol with offline/online split.
//! * [`oprf`] - OKVS + VOLE based oblivious PRF.
//! * [`psa`] - the level-1 and level-2 alignment protocols.
//! * [`hecost`] - cost model for the homomorphic-encryption baseline.

pub mod benes;
pub mod crypto;
pub mod hecost;
pub mod oprf;
pub mod osn;
pub mod ot;
pub mod perm;
pub mod psa;
pub mod transport;
