//! Self-contained pseudo-random number generation.
//!
//! Synthetic instances must be bit-for-bit reproducible from a single `u64`
//! seed, across platforms and across releases of third-party crates. The
//! generators here are therefore implemented directly: a SplitMix64 stream
//! expands the seed into state for xoshiro256++, uniform doubles take the top
//! 53 bits of each word, and standard normals come from the Box-Muller
//! transform.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 stream, used to expand seeds and to derive per-cell seeds.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// xoshiro256++ generator with Box-Muller sampling for standard normals.
#[derive(Clone, Debug)]
pub struct Xoshiro256PlusPlus {
    s: [u64; 4],
    spare_normal: Option<f64>,
}

impl Xoshiro256PlusPlus {
    /// Seeds the four state words from a SplitMix64 stream, the expansion
    /// recommended by the generator's authors.
    pub fn seed_from_u64(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        let s = [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()];
        Self {
            s,
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[0]
            .wrapping_add(self.s[3])
            .rotate_left(23)
            .wrapping_add(self.s[0]);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw. Box-Muller produces pairs; the second value is
    /// cached and returned on the next call.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 lies in (0, 1] so the logarithm stays finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Derives a seed from a base seed and a sequence of indices (for example
/// sweep cell and replication numbers) so every unit of work draws from an
/// independently reproducible stream.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut acc = base;
    for &part in parts {
        let mut sm = SplitMix64::new(acc ^ part.wrapping_mul(GOLDEN_GAMMA));
        acc = sm.next_u64();
    }
    acc
}
