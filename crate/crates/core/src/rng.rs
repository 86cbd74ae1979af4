//! Seed plumbing.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from a 64-bit
//! seed and positioned on a ChaCha stream id. Monte-Carlo work is cut into
//! fixed-size chunks of [`CHUNK_ROWS`] rows; chunk `c` always draws from stream
//! `c` of the run seed, so the output does not depend on how many threads
//! processed the chunks. Chunk results are merged in chunk order.
//!
//! Named sub-seeds (per subcommand, per trial, per role) come from
//! [`derive_seed`], a SplitMix64 finalizer over the parent seed, an FNV-1a hash
//! of the label and an index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Rows per Monte-Carlo chunk.
pub const CHUNK_ROWS: usize = 4096;

/// Returns the generator for chunk `chunk` of a run seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Returns a generator on stream 0 of `seed`.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    chunk_rng(seed, 0)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives a child seed from `parent`, a text label and an index.
///
/// `derive_seed(master, "reproduce/fig1a/trial", 3)` is the seed of trial 3.
pub fn derive_seed(parent: u64, label: &str, index: u64) -> u64 {
    splitmix64(splitmix64(parent ^ fnv1a(label)).wrapping_add(index))
}

/// Number of chunks needed for `count` rows.
pub fn chunk_count(count: usize) -> usize {
    count.div_ceil(CHUNK_ROWS)
}

/// Row range `[start, end)` of chunk `chunk` in a run of `count` rows.
pub fn chunk_range(count: usize, chunk: usize) -> (usize, usize) {
    let start = chunk * CHUNK_ROWS;
    (start, (start + CHUNK_ROWS).min(count))
}
