//! Deterministic random number generation.
//!
//! All randomness in the crate flows through [`SplitMix64`], a 64-bit
//! counter-based generator with a fixed, platform-independent algorithm
//! (Steele, Lea & Flood 2014). Traces and probe reports are therefore
//! reproducible bit-for-bit from their seeds on any platform.
//!
//! The algorithm identifier [`RNG_ID`] is recorded in serialized run
//! metadata; a future change of generator must change the identifier.

/// Name and version of the generator, embedded in run metadata.
pub const RNG_ID: &str = "splitmix64/v1";

/// SplitMix64: output stage of a Weyl-sequence counter.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    /// Generator seeded directly with `seed`.
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Independent stream derived from a base seed and a stream tag.
    ///
    /// Used to give each probe cell / trial its own generator so cells can
    /// run in parallel with no shared state.
    pub fn stream(seed: u64, tag: u64) -> Self {
        let mut g = SplitMix64::new(seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        // Burn one output so (seed, 0) and (seed ^ 0, _) streams decorrelate.
        g.next_u64();
        g
    }

    /// Next raw 64-bit output.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Modulo bias is < 2^-50 for the n used here (n ⩽ a few hundred).
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal pair via Box–Muller.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        // Avoid log(0): u1 ∈ (0, 1].
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        (r * th.cos(), r * th.sin())
    }

    /// Uniform point in the closed Euclidean ball B(center, radius).
    ///
    /// Gaussian direction scaled by U^{1/n}, the standard exact sampler.
    pub fn in_ball(&mut self, center: &[f64], radius: f64) -> Vec<f64> {
        let n = center.len();
        let mut dir = Vec::with_capacity(n);
        while dir.len() < n {
            let (a, b) = self.normal_pair();
            dir.push(a);
            if dir.len() < n {
                dir.push(b);
            }
        }
        let nrm = crate::norm(&dir);
        let scale = if nrm > 0.0 {
            radius * self.next_f64().powf(1.0 / n as f64) / nrm
        } else {
            0.0
        };
        center
            .iter()
            .zip(&dir)
            .map(|(c, d)| c + scale * d)
            .collect()
    }

    /// Uniform point in an axis-aligned box given by per-coordinate bounds.
    pub fn in_box(&mut self, bounds: &[(f64, f64)]) -> Vec<f64> {
        bounds.iter().map(|&(lo, hi)| self.uniform(lo, hi)).collect()
    }

    /// Seeded Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }

    /// Random permutation of 0..n.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }
}

/// Stable 64-bit mix of a float vector's bit pattern with a seed.
///
/// Used by the seeded-random-extreme selection rule so the chosen extreme
/// point is a pure function of (x, seed), as the selection contract requires.
pub fn hash_point(seed: u64, x: &[f64]) -> u64 {
    let mut h = seed ^ 0x51_7c_c1_b7_27_22_0a_95;
    for &v in x {
        h ^= v.to_bits();
        h = h.rotate_left(23).wrapping_mul(0x2545_f491_4f6c_dd1d);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_across_instances() {
        let mut g1 = SplitMix64::new(42);
        let mut g2 = SplitMix64::new(42);
        for _ in 0..100 {
            assert_eq!(g1.next_u64(), g2.next_u64());
        }
    }

    #[test]
    fn known_splitmix_vector() {
        // Reference outputs for seed 0 from the published algorithm.
        let mut g = SplitMix64::new(0);
        assert_eq!(g.next_u64(), 0xe220a8397b1dcdaf);
        assert_eq!(g.next_u64(), 0x6e789e6aa1b965f4);
        assert_eq!(g.next_u64(), 0x06c45d188009454f);
    }

    #[test]
    fn permutation_is_bijection() {
        let mut g = SplitMix64::new(7);
        for n in 1..20 {
            let p = g.permutation(n);
            let mut seen = vec![false; n];
            for &i in &p {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
    }

    #[test]
    fn ball_samples_inside() {
        let mut g = SplitMix64::new(3);
        let c = [1.0, -2.0, 0.5];
        for _ in 0..200 {
            let x = g.in_ball(&c, 0.7);
            assert!(crate::dist(&x, &c) <= 0.7 + 1e-12);
        }
    }
}
