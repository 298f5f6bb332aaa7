//! Stable hashing for deterministic backends and the embedding cache.
//!
//! `std::hash` offers no cross-release stability guarantee, so the stub and
//! local providers roll their own FNV-1a plus a SplitMix64 stream.

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub(crate) struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform value in [-1, 1].
    pub fn next_unit(&mut self) -> f32 {
        let x = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        (x * 2.0 - 1.0) as f32
    }
}
