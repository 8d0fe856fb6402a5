use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A set of distinct component indices, stored in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Minibatch {
    indices: Vec<usize>,
}

impl Minibatch {
    /// Validates and sorts `indices` against a problem with `n` components.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::param("batch", "must contain at least one index"));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("batch", "indices must be distinct"));
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::Precondition(format!("batch index {last} out of range for n = {n}")));
            }
        }
        Ok(Minibatch { indices })
    }

    /// All indices `0..n`.
    pub fn full(n: usize) -> Self {
        Minibatch { indices: (0..n).collect() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Draws batches of size `B` uniformly without replacement, independently
/// at every call.
///
/// Each run gets its own ChaCha stream selected by `(seed, stream)`, so runs
/// with different stream ids never share random numbers.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    rng: ChaCha8Rng,
    n: usize,
    batch_size: usize,
}

impl BatchSampler {
    pub fn new(n: usize, batch_size: usize, seed: u64, stream: u64) -> Result<Self> {
        if batch_size == 0 || batch_size > n {
            return Err(Error::param("batch_size", format!("must lie in [1, {n}], got {batch_size}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(BatchSampler { rng, n, batch_size })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn next_batch(&mut self) -> Minibatch {
        if self.batch_size == self.n {
            return Minibatch::full(self.n);
        }
        let mut indices = rand::seq::index::sample(&mut self.rng, self.n, self.batch_size).into_vec();
        indices.sort_unstable();
        Minibatch { indices }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_are_sorted_distinct_and_in_range() {
        let mut s = BatchSampler::new(50, 7, 3, 0).unwrap();
        for _ in 0..200 {
            let b = s.next_batch();
            assert_eq!(b.len(), 7);
            assert!(b.indices().windows(2).all(|w| w[0] < w[1]));
            assert!(b.indices().iter().all(|&i| i < 50));
        }
    }

    #[test]
    fn same_seed_and_stream_reproduce() {
        let mut a = BatchSampler::new(30, 3, 11, 2).unwrap();
        let mut b = BatchSampler::new(30, 3, 11, 2).unwrap();
        let mut c = BatchSampler::new(30, 3, 11, 3).unwrap();
        let xs: Vec<_> = (0..20).map(|_| a.next_batch()).collect();
        let ys: Vec<_> = (0..20).map(|_| b.next_batch()).collect();
        let zs: Vec<_> = (0..20).map(|_| c.next_batch()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
    }

    #[test]
    fn singleton_batches_are_roughly_uniform() {
        let mut s = BatchSampler::new(4, 1, 5, 0).unwrap();
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[s.next_batch().indices()[0]] += 1;
        }
        // each cell expects 10_000 with sd ≈ 87
        assert!(counts.iter().all(|&c| (c as i64 - 10_000).abs() < 500), "{counts:?}");
    }

    #[test]
    fn invalid_batches() {
        assert!(Minibatch::new(vec![], 3).is_err());
        assert!(Minibatch::new(vec![1, 1], 3).is_err());
        assert!(Minibatch::new(vec![3], 3).is_err());
        assert!(BatchSampler::new(3, 4, 0, 0).is_err());
        assert!(BatchSampler::new(3, 0, 0, 0).is_err());
    }
}
