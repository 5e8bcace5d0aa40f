//! Counter-based random substreams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 keystream
//! selected by `(seed, domain)` for the key and `(replication, index)` for the
//! 64-bit stream id. A replication therefore sees the same numbers no matter
//! which worker thread runs it or in what order replications are scheduled.
//!
//! Gaussian variates come from `rand_distr::StandardNormal` (ziggurat) applied
//! to that keystream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Separates independent uses of one user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    /// Observation noise of synthetic panels.
    Noise = 1,
    /// Per-replication random shift sizes.
    Shift = 2,
    /// Brownian paths of the limiting process.
    Brownian = 3,
    /// Replication seeds derived inside experiments.
    Replication = 4,
}

const INDEX_BITS: u32 = 24;

/// Returns the generator for one `(replication, index)` cell of a domain.
///
/// `index` must be below 2^24 and `replication` below 2^40.
pub fn substream(seed: u64, domain: Domain, replication: u64, index: u64) -> ChaCha8Rng {
    debug_assert!(index < (1 << INDEX_BITS));
    debug_assert!(replication < (1 << (64 - INDEX_BITS)));
    let key = splitmix64(seed ^ splitmix64(domain as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream((replication << INDEX_BITS) | index);
    rng
}

/// Derives the seed for replication `rep` of an experiment seeded with `seed`.
pub fn replication_seed(seed: u64, rep: u64) -> u64 {
    splitmix64(splitmix64(seed ^ (Domain::Replication as u64).rotate_left(32)) ^ rep)
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
