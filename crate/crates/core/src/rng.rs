//! One user seed fans out into independent named random streams, so that adding a draw
//! in one subsystem never shifts the numbers another subsystem sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Derives a generator for `name` from the root seed.
pub fn stream(seed: u64, name: &str) -> Rng {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(h);
    rng
}

/// Stream for a name plus an index, e.g. per-domain samplers.
pub fn indexed_stream(seed: u64, name: &str, index: usize) -> Rng {
    stream(seed, &format!("{name}/{index}"))
}
