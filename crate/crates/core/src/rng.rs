//! Seedable random streams and the rule used to split them.
//!
//! Every sampling operation takes an explicit `&mut impl Rng`; nothing in the
//! crate touches a global generator. Independent streams are derived from a
//! master seed plus a list of coordinates with [`derive_seed`], which folds
//! each coordinate through the SplitMix64 finalizer. The derived seed depends
//! only on the coordinates given, so a stream can be recreated in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The concrete stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes `master` together with `coords` into a 64-bit seed.
///
/// `derive_seed(m, &[a, b])` is `h(h(h(m) ^ a) ^ b)` with `h` the SplitMix64
/// finalizer.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(master), |acc, &c| splitmix64(acc ^ c))
}

/// Creates a stream from a plain seed.
pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Creates the stream for `derive_seed(master, coords)`.
pub fn substream(master: u64, coords: &[u64]) -> Stream {
    stream(derive_seed(master, coords))
}

/// Stream labels, so that e.g. graph and noise streams for the same cell never
/// coincide.
pub mod label {
    pub const GRAPH: u64 = 0x0067_7261_7068;
    pub const CODED_NOISE: u64 = 0x006e_6f69_7365;
    pub const GI_PATTERNS: u64 = 0x0067_6970_6174;
    pub const GI_NOISE: u64 = 0x0067_696e_6f69;
}
