//! Keyed random streams. Each (seed, purpose, replication, year) tuple gets its
//! own ChaCha stream, so adding a consumer never shifts the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Sizes,
    Panel,
    Prediction,
    LikelihoodOracle,
    Starts,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Sizes => 1,
            Purpose::Panel => 2,
            Purpose::Prediction => 3,
            Purpose::LikelihoodOracle => 4,
            Purpose::Starts => 5,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream for one (seed, purpose, replication, year) key.
pub fn stream(seed: u64, purpose: Purpose, replication: u64, year: u64) -> ChaCha8Rng {
    substream(seed, purpose, replication, year, 0)
}

/// Stream further keyed by `sub`, e.g. a category label hash from [`label_key`].
pub fn substream(seed: u64, purpose: Purpose, replication: u64, year: u64, sub: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut key = splitmix(purpose.tag());
    key = splitmix(key ^ replication);
    key = splitmix(key ^ year.rotate_left(32));
    key = splitmix(key ^ sub);
    rng.set_stream(key);
    rng
}

/// FNV-1a hash of a label; never 0, so it cannot collide with the unkeyed stream.
pub fn label_key(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h.max(1)
}
