use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive a seed from a base seed and a label.
pub fn mix(seed: u64, label: u64) -> u64 {
    let s = seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(label.wrapping_add(1));
    s ^ (s >> 31)
}

/// Derive an independent stream from a base seed and a label.
pub fn substream(seed: u64, label: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, label))
}
