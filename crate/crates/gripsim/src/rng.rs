//! Deterministic, splittable pseudo-randomness.
//!
//! Every stream is identified by a 64-bit key derived from a seed and a
//! short label, and draws come from the splitmix64 sequence of that key.
//! The construction is counter-based (`output_i = mix(key + i*GOLDEN)`),
//! so the same `(seed, label)` yields the identical sequence on every
//! platform, and labeled substreams can be derived without consuming
//! draws from the parent.
//!
//! Floating-point uniforms are 53-bit (`[0, 1)`); Gaussians use
//! Box-Muller on those uniforms. Not cryptographic.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 output mix.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

#[derive(Debug, Clone)]
pub struct RngStream {
    key: u64,
    counter: u64,
    spare_gauss: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64, label: &str) -> Self {
        RngStream {
            key: mix(seed ^ fnv1a(label.as_bytes())),
            counter: 0,
            spare_gauss: None,
        }
    }

    /// Derive an independent labeled substream. Does not consume draws
    /// from `self` and is independent of how many draws were taken.
    pub fn derive(&self, label: &str) -> Self {
        RngStream {
            key: mix(self.key ^ fnv1a(label.as_bytes())),
            counter: 0,
            spare_gauss: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`.
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal draw (Box-Muller; the second value is cached).
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(g) = self.spare_gauss.take() {
            return g;
        }
        // Guard against ln(0).
        let mut u1 = self.next_f64();
        if u1 <= f64::MIN_POSITIVE {
            u1 = f64::MIN_POSITIVE;
        }
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = 2.0 * std::f64::consts::PI * u2;
        self.spare_gauss = Some(r * t.sin());
        r * t.cos()
    }

    /// Fisher-Yates shuffle of indices `0..n`.
    pub fn shuffled_indices(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.next_index(i + 1);
            idx.swap(i, j);
        }
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_label_reproduce() {
        let mut a = RngStream::new(42, "trace");
        let mut b = RngStream::new(42, "trace");
        for _ in 0..10_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_labels_diverge() {
        let mut a = RngStream::new(42, "x");
        let mut b = RngStream::new(42, "y");
        let va: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let vb: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        assert_ne!(va, vb);
    }

    #[test]
    fn derive_is_draw_independent() {
        let parent = RngStream::new(7, "root");
        let mut consumed = parent.clone();
        for _ in 0..100 {
            consumed.next_u64();
        }
        let mut d1 = parent.derive("child");
        let mut d2 = consumed.derive("child");
        for _ in 0..100 {
            assert_eq!(d1.next_u64(), d2.next_u64());
        }
    }

    #[test]
    fn uniform_bounds_and_moments() {
        let mut rng = RngStream::new(1, "u");
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let u = rng.next_f64();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = RngStream::new(3, "g");
        let n = 100_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let g = rng.next_gaussian();
            s += g;
            s2 += g * g;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn shuffle_is_permutation() {
        let mut rng = RngStream::new(9, "s");
        let mut idx = rng.shuffled_indices(100);
        idx.sort_unstable();
        assert_eq!(idx, (0..100).collect::<Vec<_>>());
    }
}
