//! Seed derivation and random streams.
//!
//! Every random quantity in the library is drawn from a ChaCha8 stream whose
//! 256-bit key is derived from a single `u64` seed. Per-replication seeds are
//! derived with [`mix`], so a whole experiment grid is reproducible from one
//! base seed regardless of execution order.
//!
//! Bit-exact definitions (all arithmetic is wrapping on `u64`):
//!
//! ```text
//! splitmix64(z):
//!     z = z + 0x9E3779B97F4A7C15
//!     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!     return z ^ (z >> 31)
//!
//! mix(base, grid, rep) = splitmix64(splitmix64(splitmix64(base) ^ grid) ^ rep)
//!
//! key(seed) = le_bytes(k0) || le_bytes(k1) || le_bytes(k2) || le_bytes(k3)
//!     where k0 = splitmix64(seed), k(i+1) = splitmix64(k(i))
//! ```
//!
//! ChaCha stream id 0 carries the primary innovations, stream id 1 the
//! independently drawn partner innovations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function applied to `z + GOLDEN_GAMMA`.
pub fn splitmix64(z: u64) -> u64 {
    let mut z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of replication `rep` at grid point `grid`.
pub fn mix(base: u64, grid: u64, rep: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ grid) ^ rep)
}

/// Expands a `u64` seed into a ChaCha8 key.
pub fn key(seed: u64) -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut k = seed;
    for chunk in out.chunks_exact_mut(8) {
        k = splitmix64(k);
        chunk.copy_from_slice(&k.to_le_bytes());
    }
    out
}

/// ChaCha8 generator on the given stream id.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key(seed));
    rng.set_stream(stream);
    rng
}
