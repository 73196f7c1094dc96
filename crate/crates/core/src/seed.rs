//! Stable seed derivation.
//!
//! Every random decision in a build is drawn from a generator seeded by
//! hashing the run seed together with the identity of the decision (which
//! conversation, which turn, which tombstone). SHA-256 is used so the
//! derivation is identical across platforms and toolchains.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Field separator fed between parts so that `("ab", "c")` and `("a", "bc")`
/// hash differently.
const SEP: u8 = 0x1f;

/// Hashes the seed and parts into a 64-bit value (big-endian prefix of the digest).
pub fn derive(seed: u64, parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update([SEP]);
        h.update(p);
    }
    let digest = h.finalize();
    let mut prefix = [0u8; 8];
    prefix.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(prefix)
}

/// A ChaCha8 generator seeded from [`derive`].
pub fn rng(seed: u64, parts: &[&[u8]]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, parts))
}
