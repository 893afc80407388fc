//! Seed derivation and counter-based randomness.
//!
//! Every random quantity in a replicate is drawn from one of a few named
//! substreams derived from a single 64-bit seed:
//!
//! * `field`: the Gaussian field behind the chaos measure,
//! * `nodes`: the Poisson node count and node positions,
//! * `edge-coin`: the per-pair acceptance coins.
//!
//! Derivation is `mix64` (the SplitMix64 finalizer) folded over the parts,
//! and substream names are hashed with 64-bit FNV-1a, so results are
//! reproducible across machines and independent of thread count. Edge coins
//! are keyed by the unordered node pair rather than drawn sequentially, which
//! makes the exact and cell-list pair loops consume identical coins.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a.
pub fn name_hash(name: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Folds `parts` into `master`, order-sensitively.
pub fn derive(master: u64, parts: &[u64]) -> u64 {
    let mut state = mix64(master.wrapping_add(GOLDEN_GAMMA));
    for &p in parts {
        state = mix64(state.wrapping_add(GOLDEN_GAMMA) ^ mix64(p ^ 0xD6E8_FEB8_6659_FD93));
    }
    state
}

/// Seed of replicate `replicate_id` at size parameter `n`.
pub fn replicate_seed(master: u64, n: u64, replicate_id: u64) -> u64 {
    derive(master, &[n, replicate_id])
}

/// Named per-replicate random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Substream {
    Field,
    /// Second field of the two-community model.
    FieldSecond,
    Nodes,
    NodesSecond,
    EdgeCoin,
}

impl Substream {
    pub fn name(self) -> &'static str {
        match self {
            Substream::Field => "field",
            Substream::FieldSecond => "field-2",
            Substream::Nodes => "nodes",
            Substream::NodesSecond => "nodes-2",
            Substream::EdgeCoin => "edge-coin",
        }
    }

    pub fn seed(self, replicate_seed: u64) -> u64 {
        derive(replicate_seed, &[name_hash(self.name())])
    }

    pub fn rng(self, replicate_seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed(replicate_seed))
    }
}

/// Uniform in [0, 1) attached to the unordered pair {i, j}.
#[inline]
pub fn pair_uniform(coin_seed: u64, i: u32, j: u32) -> f64 {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    let key = (u64::from(a) << 32) | u64::from(b);
    let h = mix64(mix64(key ^ coin_seed).wrapping_add(coin_seed.rotate_left(17)));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
