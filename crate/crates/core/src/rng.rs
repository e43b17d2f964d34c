//! Counter-based splittable random number streams.
//!
//! Every source of randomness in the crate is a [`Stream`] derived from a
//! master seed and a chain of labels (experiment kind, replica index, path
//! index, ...). Derivation is a SplitMix64-style bit mix, so any worker can
//! open the stream for path `i` directly; results never depend on how work
//! is scheduled across threads.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deterministic random stream identified by a 64-bit key.
#[derive(Clone, Copy, Debug)]
pub struct Stream {
    key: u64,
    counter: u64,
    /// Cached second Box-Muller value.
    spare_normal: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream {
            key: mix64(seed ^ GOLDEN),
            counter: 0,
            spare_normal: None,
        }
    }

    /// Derive an independent child stream. Chained derivations with distinct
    /// labels give (statistically) independent streams.
    pub fn derive(&self, label: u64) -> Stream {
        Stream {
            key: mix64(self.key ^ label.wrapping_mul(GOLDEN).wrapping_add(0x6A09_E667_F3BC_C909)),
            counter: 0,
            spare_normal: None,
        }
    }

    /// Derive from a string label (stable across runs).
    pub fn derive_str(&self, label: &str) -> Stream {
        let mut h = 0xCBF2_9CE4_8422_2325u64;
        for b in label.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01B3);
        }
        self.derive(h)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in [0, 1) with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform in (0, 1], safe as a log argument.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: u64) -> u64 {
        // Rejection sampling on the top bits keeps the draw unbiased.
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        if let Some(v) = self.spare_normal.take() {
            return v;
        }
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Poisson draw. Large means are split into sub-Poisson sums so the
    /// multiplication method never underflows.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        assert!(mean >= 0.0 && mean.is_finite());
        let mut remaining = mean;
        let mut total = 0u64;
        while remaining > 30.0 {
            total += self.poisson_small(30.0);
            remaining -= 30.0;
        }
        total + self.poisson_small(remaining)
    }

    fn poisson_small(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        let limit = (-mean).exp();
        let mut prod = 1.0;
        let mut count = 0u64;
        loop {
            prod *= self.uniform_open();
            if prod <= limit {
                return count;
            }
            count += 1;
        }
    }

    /// Index draw from unnormalized nonnegative weights (CDF inversion).
    pub fn discrete(&mut self, cdf: &[f64]) -> usize {
        let total = *cdf.last().expect("empty cdf");
        let target = self.uniform() * total;
        match cdf.binary_search_by(|v| v.partial_cmp(&target).unwrap()) {
            Ok(i) => (i + 1).min(cdf.len() - 1),
            Err(i) => i.min(cdf.len() - 1),
        }
    }

    /// Point uniform on the Euclidean unit sphere of R^d.
    pub fn unit_vector(&mut self, dim: usize, out: &mut [f64]) {
        loop {
            let mut s = 0.0;
            for v in out.iter_mut().take(dim) {
                *v = self.normal();
                s += *v * *v;
            }
            if s > 1e-30 {
                let inv = 1.0 / s.sqrt();
                for v in out.iter_mut().take(dim) {
                    *v *= inv;
                }
                return;
            }
        }
    }
}

/// Build a cumulative-sum table for [`Stream::discrete`].
pub fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w.max(0.0);
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let mut a = Stream::new(42).derive(7);
        let mut b = Stream::new(42).derive(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn sibling_streams_differ() {
        let root = Stream::new(42);
        let mut a = root.derive(1);
        let mut b = root.derive(2);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn normal_moments() {
        let mut s = Stream::new(7);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let v = s.normal();
            sum += v;
            sum2 += v * v;
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn poisson_mean_and_variance() {
        let mut s = Stream::new(3);
        for lambda in [0.5, 5.0, 75.0] {
            let n = 40_000;
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for _ in 0..n {
                let v = s.poisson(lambda) as f64;
                sum += v;
                sum2 += v * v;
            }
            let mean = sum / n as f64;
            let var = sum2 / n as f64 - mean * mean;
            let se = (lambda / n as f64).sqrt();
            assert!((mean - lambda).abs() < 5.0 * se, "lambda {lambda} mean {mean}");
            assert!((var / lambda - 1.0).abs() < 0.1, "lambda {lambda} var {var}");
        }
    }

    #[test]
    fn discrete_respects_weights() {
        let cdf = cumulative(&[1.0, 0.0, 3.0]);
        let mut s = Stream::new(11);
        let mut counts = [0usize; 3];
        for _ in 0..40_000 {
            counts[s.discrete(&cdf)] += 1;
        }
        assert_eq!(counts[1], 0);
        let frac = counts[2] as f64 / 40_000.0;
        assert!((frac - 0.75).abs() < 0.02);
    }
}
