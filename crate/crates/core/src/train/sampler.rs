use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::data::{FeatureSequence, PartialView};
use crate::error::{Error, Result};

/// Sampling without replacement within an epoch; a fresh shuffle starts
/// whenever the current one is exhausted, so batches may straddle epochs.
#[derive(Clone, Debug)]
pub struct EpochSampler {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl EpochSampler {
    pub fn new(n: usize, rng: ChaCha8Rng) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("sampling pool"));
        }
        let mut s = EpochSampler {
            order: (0..n).collect(),
            pos: 0,
            rng,
        };
        s.order.shuffle(&mut s.rng);
        Ok(s)
    }

    pub fn next_index(&mut self) -> usize {
        if self.pos == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }

    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        (0..size).map(|_| self.next_index()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Batch<'a> {
    pub fakes: Vec<&'a PartialView>,
    pub reals: Vec<&'a FeatureSequence>,
    /// Labels of `fakes`.
    pub labels: Vec<usize>,
}

/// Independent epoch samplers over partial views and complete sequences.
#[derive(Clone, Debug)]
pub struct BatchSampler {
    views: EpochSampler,
    reals: EpochSampler,
}

impl BatchSampler {
    pub fn new(n_views: usize, n_reals: usize, view_rng: ChaCha8Rng, real_rng: ChaCha8Rng) -> Result<Self> {
        Ok(BatchSampler {
            views: EpochSampler::new(n_views, view_rng)?,
            reals: EpochSampler::new(n_reals, real_rng)?,
        })
    }

    pub fn make_batch<'a>(
        &mut self,
        views: &'a [PartialView],
        reals: &'a [FeatureSequence],
        batch: usize,
    ) -> Result<Batch<'a>> {
        if batch == 0 {
            return Err(Error::Empty("batch"));
        }
        let fakes: Vec<&PartialView> = self.views.next_batch(batch).into_iter().map(|i| &views[i]).collect();
        let reals = self.reals.next_batch(batch).into_iter().map(|i| &reals[i]).collect();
        let labels = fakes.iter().map(|v| v.label).collect();
        Ok(Batch { fakes, reals, labels })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn full_batch_covers_pool_once() {
        let mut s = EpochSampler::new(64, rng(1)).unwrap();
        let mut b = s.next_batch(64);
        b.sort_unstable();
        assert_eq!(b, (0..64).collect::<Vec<_>>());
    }

    #[test]
    fn fixed_seed_repeats() {
        let mut a = EpochSampler::new(30, rng(2)).unwrap();
        let mut b = EpochSampler::new(30, rng(2)).unwrap();
        for _ in 0..10 {
            assert_eq!(a.next_batch(7), b.next_batch(7));
        }
    }

    #[test]
    fn oversized_batch_wraps() {
        let mut s = EpochSampler::new(5, rng(3)).unwrap();
        let b = s.next_batch(12);
        assert_eq!(b.len(), 12);
        let mut first: Vec<_> = b[..5].to_vec();
        first.sort_unstable();
        assert_eq!(first, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn empty_pool_rejected() {
        assert!(EpochSampler::new(0, rng(0)).is_err());
    }

    #[test]
    fn chi_square_uniformity() {
        // Leading element of 10k batches drawn from a pool of 100: 99 degrees
        // of freedom, and the 0.999 quantile of chi^2_99 is 148.23, so
        // p > 0.001 iff the statistic stays below it.
        let mut s = EpochSampler::new(100, rng(4)).unwrap();
        let mut counts = [0usize; 100];
        for _ in 0..10_000 {
            counts[s.next_batch(7)[0]] += 1;
        }
        let expected = 100.0;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(stat < 148.23, "chi-square {stat}");
    }
}
