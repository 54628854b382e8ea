//! Counter-based randomness.
//!
//! Every random quantity in the crate is derived from a root seed and a
//! tuple of integer labels (replica, particle, tree node, ...). Hashing the
//! labels gives substreams that do not depend on evaluation order, so
//! parallel and sequential runs agree bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable hash of a seed and a list of labels.
#[inline]
pub fn hash_key(seed: u64, labels: &[u64]) -> u64 {
    let mut h = mix64(seed ^ GOLDEN);
    for (i, &l) in labels.iter().enumerate() {
        h = mix64(h ^ l.wrapping_add((i as u64 + 1).wrapping_mul(GOLDEN)));
    }
    h
}

#[inline]
pub(crate) fn hash4(seed: u64, a: u64, b: u64, c: u64) -> u64 {
    let h = mix64(seed ^ a.wrapping_mul(GOLDEN));
    let h = mix64(h ^ b.wrapping_add(0x6a09_e667_f3bc_c909));
    mix64(h ^ c.wrapping_add(0xbb67_ae85_84ca_a73b))
}

/// Uniform in [0, 1) from the top 53 bits.
#[inline]
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Two independent standard normals from one key (Box-Muller).
#[inline]
pub fn normal_pair(key: u64) -> (f64, f64) {
    let u1 = 1.0 - unit_f64(mix64(key ^ 0x243f_6a88_85a3_08d3));
    let u2 = unit_f64(mix64(key ^ 0x1319_8a2e_0370_7344));
    let rad = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (rad * c, rad * s)
}

/// A ChaCha stream for the given labels.
pub fn stream(seed: u64, labels: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash_key(seed, labels))
}

/// Label constants used to separate independent uses of one seed.
pub mod tag {
    pub const PPP: u64 = 1;
    pub const FROG: u64 = 2;
    pub const REPLICA: u64 = 3;
    pub const ENV: u64 = 4;
    pub const OFFSPRING: u64 = 5;
    pub const NU: u64 = 6;
    pub const PATH: u64 = 7;
    pub const BRIDGE: u64 = 8;
    pub const FIELD: u64 = 9;
    pub const CONTROL: u64 = 10;
}
