//! Seed derivation for independent random streams.
//!
//! Every experiment cell (method, network size, seed) and every episode draws
//! from its own ChaCha8 stream. Stream seeds are derived by hashing the labels
//! with 64-bit FNV-1a and passing the result through the SplitMix64 finalizer,
//! so serial and parallel execution consume identical streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Incremental builder for a stream seed.
#[derive(Debug, Clone, Copy)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(master_seed: u64) -> Self {
        StreamKey(FNV_OFFSET).bytes(&master_seed.to_le_bytes())
    }

    fn bytes(self, data: &[u8]) -> Self {
        let mut h = self.0;
        for &b in data {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        StreamKey(h)
    }

    pub fn label(self, label: &str) -> Self {
        // Length prefix keeps ("ab", "c") and ("a", "bc") apart.
        self.bytes(&(label.len() as u64).to_le_bytes())
            .bytes(label.as_bytes())
    }

    pub fn number(self, n: u64) -> Self {
        self.bytes(&n.to_le_bytes())
    }

    pub fn seed(self) -> u64 {
        splitmix64(self.0)
    }

    pub fn rng(self) -> SimRng {
        seeded_rng(self.seed())
    }
}

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
