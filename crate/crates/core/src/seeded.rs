//! Platform-stable seeded randomness.
//!
//! Everything that needs reproducible draws (the mock embedding function,
//! the profile-shift sampler, balanced domain selection) goes through
//! [`SeededRng`], a SplitMix64 generator seeded via FNV-1a hashing. No
//! OS entropy, no hasher randomization, identical sequences on every
//! platform.

/// 64-bit FNV-1a hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SeededRng {
    state: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Per-persona generator: seed = FNV-1a-64(global seed bytes ∥ persona id bytes).
    ///
    /// The global seed contributes its little-endian bytes; the persona id
    /// contributes its UTF-8 bytes.
    pub fn for_persona(global_seed: u64, persona_id: &str) -> Self {
        let mut bytes = Vec::with_capacity(8 + persona_id.len());
        bytes.extend_from_slice(&global_seed.to_le_bytes());
        bytes.extend_from_slice(persona_id.as_bytes());
        Self::new(fnv1a64(&bytes))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform f64 in [0,1) from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n) via rejection sampling (no modulo bias).
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Bernoulli draw.
    pub fn coin(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Index into `weights`, drawn proportionally to each weight.
    pub fn weighted_index(&mut self, weights: &[u64]) -> usize {
        let total: u64 = weights.iter().sum();
        assert!(total > 0, "weighted_index with zero total weight");
        let mut draw = self.next_below(total);
        for (i, &w) in weights.iter().enumerate() {
            if draw < w {
                return i;
            }
            draw -= w;
        }
        unreachable!("weighted_index: draw exceeded total weight")
    }

    /// Sample `k` distinct indices from [0, n) via partial Fisher-Yates.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "sample_indices: k > n");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.next_below((n - i) as u64) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
