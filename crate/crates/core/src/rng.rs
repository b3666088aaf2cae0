//! The single seeded pseudorandom stream behind every randomized step.
//!
//! Algorithm, fixed so outputs can be reproduced by other implementations:
//!
//! * generator: ChaCha with 8 rounds, seeded from a `u64` through the
//!   `rand_core` 0.6 `seed_from_u64` expansion (PCG32 fills the 32-byte key);
//! * `next_u64`: the generator's native 64-bit output;
//! * `below(n)`: `(next_u64() * n) >> 64` computed in 128 bits, one draw;
//! * `unit()`: `(next_u64() >> 11) * 2^-53`, uniform on `[0, 1)`, one draw;
//! * `shuffle`: Fisher-Yates from the last index down, `j = below(i + 1)`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct Stream {
    inner: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Stream::new(42);
        let mut b = Stream::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_ne!(Stream::new(1).next_u64(), Stream::new(2).next_u64());
    }

    #[test]
    fn draws_stay_in_range() {
        let mut s = Stream::new(7);
        for n in 1..50u64 {
            assert!(s.below(n) < n);
            let u = s.unit();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut v: Vec<usize> = (0..20).collect();
        Stream::new(3).shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort();
        assert_eq!(sorted, (0..20).collect::<Vec<_>>());
    }
}
