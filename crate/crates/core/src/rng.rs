//! Counter-based random streams.
//!
//! Every random draw in the crate is addressed by `(seed, domain, index)`.
//! The seed and domain select a ChaCha8 key and the index selects the
//! ChaCha stream, so the stream for path `i` is the same no matter which
//! worker produces it or in which order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Domain tags keep unrelated consumers of one seed on disjoint keys.
pub mod domain {
    pub const BRIDGE: u64 = 0x6272_6964_6765;
    pub const FIELD: u64 = 0x66_6965_6c64;
    pub const KATO: u64 = 0x6b61_746f;
    pub const WEIGHTS: u64 = 0x7765_6967_6874;
}

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent child seed, e.g. one per quadrature node or per
/// disorder realization.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix64(mix64(seed) ^ tag.rotate_left(17))
}

/// Random stream number `index` of `(seed, domain)`.
pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, domain));
    rng.set_stream(index);
    rng
}

/// `n` site weights with real and imaginary parts uniform on `[−1, 1)`,
/// drawn from the `WEIGHTS` domain of `seed`.
pub fn uniform_weights(seed: u64, n: usize) -> Vec<Complex64> {
    let mut rng = stream(seed, domain::WEIGHTS, 0);
    (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

/// Address of one bridge path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathSeed {
    pub seed: u64,
    pub index: u64,
}

impl PathSeed {
    pub fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    pub fn rng(self) -> ChaCha8Rng {
        stream(self.seed, domain::BRIDGE, self.index)
    }
}
