//! Stateless seeded hashing used wherever a value must depend only on its
//! coordinates (OOV fill, pseudo-encoder), never on call order.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed, a string key and integer coordinates into one 64-bit value.
pub(crate) fn mix(seed: u64, key: &str, coords: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ fnv1a(key.as_bytes()));
    for &c in coords {
        h = splitmix64(h ^ c);
    }
    h
}

/// Maps a hash to a uniform value in `[0, 1)` using its top 53 bits.
pub(crate) fn unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
