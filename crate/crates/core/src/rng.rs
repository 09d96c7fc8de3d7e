use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic uniform in [0, 1) for the pair (seed, index).
pub(crate) fn unit(seed: u64, index: i64) -> f64 {
    let h = mix64(seed ^ mix64(index as u64));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Child seed derived from a root seed and a path of labels.
pub(crate) fn derive(seed: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(mix64(seed), |acc, &l| mix64(acc ^ mix64(l.wrapping_add(0x51))))
}

pub(crate) fn chacha(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
