//! Random set generation: uniform cardinality, standard-normal elements.

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Scalar;
use crate::set::ElementSet;

/// A seeded batch of random sets.
#[derive(Debug, Clone, PartialEq)]
pub struct SetBatch<T> {
    pub sets: Vec<ElementSet<T>>,
    pub seed: u64,
    pub dx: usize,
}

impl<T: Scalar> SetBatch<T> {
    /// `count` sets with cardinality uniform over `n_range` and `N(0, I)` elements.
    pub fn generate(seed: u64, count: usize, dx: usize, n_range: RangeInclusive<usize>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sets = (0..count)
            .map(|_| sample_set(&mut rng, dx, *n_range.start(), *n_range.end()))
            .collect();
        Self { sets, seed, dx }
    }

    pub fn refs(&self) -> Vec<&ElementSet<T>> {
        self.sets.iter().collect()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

/// One set: `n ~ U{n_lo..=n_hi}`, each element `~ N(0, I_dx)`.
pub fn sample_set<T: Scalar, R: Rng + ?Sized>(rng: &mut R, dx: usize, n_lo: usize, n_hi: usize) -> ElementSet<T> {
    let n = rng.random_range(n_lo..=n_hi);
    let data = (0..n * dx)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            T::lit(v)
        })
        .collect();
    ElementSet::from_flat(dx, data).expect("dx ≥ 1")
}
