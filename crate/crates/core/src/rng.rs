//! Keyed counter-based random numbers.
//!
//! A value is a pure function of a 64-bit key and a 64-bit counter, so any
//! draw can be recomputed on demand without stored state. Keys are derived by
//! hashing a seed together with a short list of words (clock identity,
//! replica index, ...).

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a seed and a word list into a key.
pub fn derive_key(seed: u64, words: &[u64]) -> u64 {
    let mut h = mix64(seed ^ 0x6A09_E667_F3BC_C908);
    for (i, &w) in words.iter().enumerate() {
        let salt = GOLDEN.wrapping_mul(i as u64 + 1);
        h = mix64(h.rotate_left(23) ^ mix64(w.wrapping_add(salt)));
    }
    h
}

/// Seed for replica `index` of a run with the given master seed.
///
/// Adding replicas never changes the seeds of existing ones.
pub fn replica_seed(master: u64, index: u64) -> u64 {
    derive_key(master, &[0x0072_6570_6c69_6361, index])
}

/// Raw 64 bits at `(key, counter)`.
#[inline]
pub fn bits(key: u64, counter: u64) -> u64 {
    mix64(mix64(key.wrapping_add(counter.wrapping_mul(GOLDEN))) ^ key.rotate_left(29))
}

/// Uniform draw in the open interval (0, 1).
#[inline]
pub fn uniform(key: u64, counter: u64) -> f64 {
    ((bits(key, counter) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Sequential view of one key's counter space.
#[derive(Debug, Clone)]
pub struct Stream {
    key: u64,
    counter: u64,
}

impl Stream {
    pub fn new(key: u64) -> Self {
        Stream { key, counter: 0 }
    }

    pub fn from_words(seed: u64, words: &[u64]) -> Self {
        Stream::new(derive_key(seed, words))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let v = bits(self.key, self.counter);
        self.counter += 1;
        v
    }

    /// Uniform in (0, 1).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        let v = uniform(self.key, self.counter);
        self.counter += 1;
        v
    }

    /// Exponential with the given rate; infinite for rate 0.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        if rate <= 0.0 {
            return f64::INFINITY;
        }
        -libm::log(self.next_f64()) / rate
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Uniform integer in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_is_open_unit_interval() {
        let mut s = Stream::new(7);
        for _ in 0..10_000 {
            let u = s.next_f64();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn keys_differ_by_word_order() {
        assert_ne!(derive_key(1, &[2, 3]), derive_key(1, &[3, 2]));
        assert_ne!(derive_key(1, &[0]), derive_key(1, &[0, 0]));
    }

    #[test]
    fn uniform_mean_and_variance() {
        let mut s = Stream::from_words(99, &[1]);
        let n = 200_000;
        let (mut m, mut q) = (0.0, 0.0);
        for _ in 0..n {
            let u = s.next_f64();
            m += u;
            q += u * u;
        }
        m /= n as f64;
        q = q / n as f64 - m * m;
        assert!((m - 0.5).abs() < 4.0 * (1.0f64 / 12.0 / n as f64).sqrt());
        assert!((q - 1.0 / 12.0).abs() < 1e-3);
    }

    #[test]
    fn replica_seeds_are_distinct() {
        let mut v: Vec<u64> = (0..1000).map(|i| replica_seed(5, i)).collect();
        v.sort_unstable();
        v.dedup();
        assert_eq!(v.len(), 1000);
    }

    #[test]
    fn below_stays_in_range() {
        let mut s = Stream::new(3);
        let mut seen = [false; 5];
        for _ in 0..1000 {
            seen[s.below(5) as usize] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }
}
