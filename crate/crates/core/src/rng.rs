use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random stream.
///
/// Sub-streams derived with [`Rng::split`] depend only on the root seed and
/// the label, never on how much of the parent stream was consumed.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn split(&self, label: &str) -> Rng {
        Rng::new(splitmix(self.seed ^ splitmix(fnv1a(label.as_bytes()))))
    }

    pub fn split_index(&self, label: &str, index: u64) -> Rng {
        Rng::new(splitmix(self.split(label).seed ^ splitmix(index.wrapping_add(1))))
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform on `(0, 1]`, quantised to multiples of `2^-32`.
    ///
    /// Sums of up to 2^20 such values are exact in `f64`, so path lengths
    /// do not depend on summation order.
    pub fn uniform_grid(&mut self) -> f64 {
        (self.inner.next_u32() as u64 + 1) as f64 / (1u64 << 32) as f64
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "empty range");
        // Lemire-style rejection keeps the draw unbiased.
        let n64 = n as u64;
        let zone = u64::MAX - u64::MAX % n64;
        loop {
            let x = self.inner.next_u64();
            if x < zone {
                return (x % n64) as usize;
            }
        }
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        lo + self.below(hi - lo + 1)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(7);
        let mut b = Rng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn split_ignores_parent_consumption() {
        let a = Rng::new(3);
        let mut b = Rng::new(3);
        b.next_u64();
        assert_eq!(a.split("x").next_u64(), b.split("x").next_u64());
        assert_ne!(a.split("x").next_u64(), a.split("y").next_u64());
        assert_ne!(a.split_index("x", 0).next_u64(), a.split_index("x", 1).next_u64());
    }

    #[test]
    fn grid_uniform_in_half_open_unit() {
        let mut r = Rng::new(1);
        for _ in 0..10_000 {
            let x = r.uniform_grid();
            assert!(x > 0.0 && x <= 1.0);
            assert_eq!((x * 4294967296.0).fract(), 0.0);
        }
    }
}
