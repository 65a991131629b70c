//! Counter-based deterministic random number generation.
//!
//! Every random draw in the crate is a pure function of
//! `(seed, domain, stream, counter)`, so outputs never depend on thread
//! scheduling, batch order, or how many draws other samples consumed.
//! `domain` separates unrelated uses of the same seed (operator
//! coefficients, partner selection, synthetic data, ...), `stream` is
//! typically a sample id, and `counter` an element index.

/// Draw domains. Each gets an independent stream for a given (seed, stream).
pub mod domain {
    /// Operator coefficient draws, one stream per output sample.
    pub const COEFF: u64 = 0x01;
    /// Partner selection for interpolation-style operators.
    pub const PARTNER: u64 = 0x02;
    /// Random-oversampling source selection.
    pub const ROS: u64 = 0x03;
    /// Synthetic embedding rows.
    pub const SYNTH_EMB: u64 = 0x04;
    /// Synthetic token ids.
    pub const SYNTH_TOK: u64 = 0x05;
    /// Synthetic flaw-span placement and sample lengths.
    pub const SYNTH_SPAN: u64 = 0x06;
    /// Probe epoch shuffling.
    pub const PROBE_SHUFFLE: u64 = 0x07;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer; bijective with strong avalanche.
#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(tag))
}

/// A keyed counter generator. Cheap to construct; holds no mutable state.
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64, domain: u64, stream: u64) -> Self {
        let key = splitmix64(splitmix64(splitmix64(seed).wrapping_add(domain)).wrapping_add(stream));
        CounterRng { key }
    }

    #[inline]
    pub fn u64_at(&self, counter: u64) -> u64 {
        splitmix64(self.key ^ counter.wrapping_mul(GOLDEN))
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn uniform_at(&self, counter: u64) -> f64 {
        (self.u64_at(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    #[inline]
    pub fn uniform_in_at(&self, counter: u64, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform_at(counter)
    }

    /// Bernoulli(p).
    #[inline]
    pub fn bernoulli_at(&self, counter: u64, p: f64) -> bool {
        self.uniform_at(counter) < p
    }

    /// Standard normal scaled to N(mean, sd), via Box-Muller.
    ///
    /// Consumes the sub-counters `2*counter` and `2*counter + 1`; a stream
    /// must not mix `normal_at` and the uniform draws above.
    #[inline]
    pub fn normal_at(&self, counter: u64, mean: f64, sd: f64) -> f64 {
        // u1 in (0, 1] so ln(u1) stays finite.
        let u1 = (((self.u64_at(2 * counter) >> 11) + 1) as f64) * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform_at(2 * counter + 1);
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        mean + sd * z
    }

    /// Uniform integer in [0, n). `n` must be > 0.
    #[inline]
    pub fn index_at(&self, counter: u64, n: u64) -> u64 {
        debug_assert!(n > 0);
        // 128-bit multiply avoids modulo bias for any n far below 2^64.
        ((self.u64_at(counter) as u128 * n as u128) >> 64) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_pure_functions_of_the_key() {
        let a = CounterRng::new(7, domain::COEFF, 3);
        let b = CounterRng::new(7, domain::COEFF, 3);
        for c in 0..64 {
            assert_eq!(a.u64_at(c), b.u64_at(c));
        }
    }

    #[test]
    fn domains_and_streams_decorrelate() {
        let a = CounterRng::new(7, domain::COEFF, 3);
        let b = CounterRng::new(7, domain::PARTNER, 3);
        let c = CounterRng::new(7, domain::COEFF, 4);
        assert_ne!(a.u64_at(0), b.u64_at(0));
        assert_ne!(a.u64_at(0), c.u64_at(0));
    }

    #[test]
    fn uniform_in_unit_interval() {
        let rng = CounterRng::new(11, domain::COEFF, 0);
        for c in 0..10_000 {
            let u = rng.uniform_at(c);
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn uniform_mean_near_half() {
        let rng = CounterRng::new(5, domain::COEFF, 9);
        let n = 100_000u64;
        let mean = (0..n).map(|c| rng.uniform_at(c)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn normal_moments() {
        let rng = CounterRng::new(13, domain::SYNTH_EMB, 1);
        let n = 100_000u64;
        let xs: Vec<f64> = (0..n).map(|c| rng.normal_at(c, 1.0, 0.1)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.002, "mean {mean}");
        assert!((var.sqrt() - 0.1).abs() < 0.005, "sd {}", var.sqrt());
    }

    #[test]
    fn index_in_range_and_roughly_uniform() {
        let rng = CounterRng::new(3, domain::PARTNER, 2);
        let mut counts = [0u32; 7];
        for c in 0..70_000 {
            let i = rng.index_at(c, 7) as usize;
            counts[i] += 1;
        }
        for &k in &counts {
            assert!((k as i64 - 10_000).abs() < 500, "counts {counts:?}");
        }
    }

    #[test]
    fn derive_seed_changes_with_tag() {
        assert_ne!(derive_seed(42, 1), derive_seed(42, 2));
        assert_eq!(derive_seed(42, 1), derive_seed(42, 1));
    }
}
