//! Deterministic RNG substream derivation.
//!
//! Every parallelizable unit of work (chain, replication, fold, Monte Carlo
//! block) owns an RNG derived from the master seed and its task coordinates.
//! Results are therefore independent of worker count and scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Domain tags keeping unrelated substreams of one master seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    Chain = 1,
    McBlock = 2,
    ScenarioX = 3,
    ScenarioCoef = 4,
    ScenarioIntercept = 5,
    ScenarioNoise = 6,
    TestX = 7,
    TestNoise = 8,
    Replication = 9,
    LooFold = 10,
    PriorSample = 11,
}

/// Build a ChaCha20 generator keyed by (master seed, tag, up to two indices).
///
/// The 32-byte key is the little-endian concatenation of the four words, so
/// distinct coordinates give independent streams by construction.
pub fn substream(master: u64, tag: StreamTag, idx0: u64, idx1: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&(tag as u64).to_le_bytes());
    key[16..24].copy_from_slice(&idx0.to_le_bytes());
    key[24..32].copy_from_slice(&idx1.to_le_bytes());
    ChaCha20Rng::from_seed(key)
}

/// Derive a child master seed, for nested task hierarchies
/// (e.g. replication -> chains).
pub fn child_seed(master: u64, tag: StreamTag, idx: u64) -> u64 {
    use rand_chacha::rand_core::RngCore;
    substream(master, tag, idx, 0).next_u64()
}
