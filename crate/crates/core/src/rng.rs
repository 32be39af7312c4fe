//! Seeded, counted random stream.
//!
//! All randomness in a run derives from one 64-bit seed. The stream counts the
//! random unit vectors it has produced so a call can be replayed from
//! `(seed, draw_index)`.

use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::vecops;

#[derive(Debug, Clone)]
pub struct SeedStream {
    seed: u64,
    draws: u64,
    rng: ChaCha8Rng,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, draws: 0, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Re-creates the stream positioned just before draw `draw_index`.
    pub fn replay(seed: u64, draw_index: u64, dim: usize) -> Self {
        let mut s = Self::new(seed);
        for _ in 0..draw_index {
            s.unit_vector(dim);
        }
        s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of unit vectors drawn so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// A vector drawn uniformly from the unit sphere in `R^dim`
    /// (normalized standard Gaussian).
    pub fn unit_vector(&mut self, dim: usize) -> Vec<f64> {
        self.draws += 1;
        loop {
            let mut v: Vec<f64> = (0..dim).map(|_| self.rng.sample(StandardNormal)).collect();
            let n = vecops::norm(&v);
            if n > 1e-300 {
                vecops::scale(1.0 / n, &mut v);
                return v;
            }
        }
    }

    pub fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }

    /// Child stream for an independent consumer (e.g. a problem generator).
    pub fn fork(&mut self) -> SeedStream {
        SeedStream::new(self.rng.random())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_vectors_are_unit_and_counted() {
        let mut s = SeedStream::new(7);
        for d in [1, 2, 5, 40] {
            let v = s.unit_vector(d);
            assert!((vecops::norm(&v) - 1.0).abs() < 1e-14);
        }
        assert_eq!(s.draws(), 4);
    }

    #[test]
    fn replay_reproduces_draw() {
        let mut s = SeedStream::new(11);
        s.unit_vector(6);
        s.unit_vector(6);
        let third = s.unit_vector(6);
        let mut r = SeedStream::replay(11, 2, 6);
        assert_eq!(r.unit_vector(6), third);
    }
}
