//! Synthetic multi-instance data with a planted positive concept.
//!
//! Every instance of a negative bag is drawn from a standard normal
//! background cluster centred at the origin. Positive bags are built the same
//! way and then have between `min_witnesses` and `max_witnesses` of their
//! instances replaced by draws from a unit-variance cluster centred at
//! `separation` in every coordinate.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Bag, BagLabel, Dataset, Instance};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub bags: usize,
    pub dim: usize,
    pub min_instances: usize,
    pub max_instances: usize,
    pub min_witnesses: usize,
    pub max_witnesses: usize,
    /// Per-coordinate offset of the positive cluster centre.
    pub separation: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            bags: 100,
            dim: 10,
            min_instances: 4,
            max_instances: 8,
            min_witnesses: 1,
            max_witnesses: 3,
            separation: 3.0,
            seed: 7,
        }
    }
}

/// Bags alternate positive/negative, so labels are balanced.
pub fn generate(cfg: &SyntheticConfig) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = |rng: &mut ChaCha8Rng, centre: f64| -> Instance {
        Instance::new(
            (0..cfg.dim)
                .map(|_| centre + rng.sample::<f64, _>(StandardNormal))
                .collect(),
        )
    };
    let mut bags = Vec::with_capacity(cfg.bags);
    for b in 0..cfg.bags {
        let positive = b % 2 == 0;
        let n = rng.random_range(cfg.min_instances..=cfg.max_instances);
        let mut instances: Vec<Instance> = (0..n).map(|_| normal(&mut rng, 0.0)).collect();
        if positive {
            let witnesses = rng
                .random_range(cfg.min_witnesses..=cfg.max_witnesses)
                .min(n);
            let mut slots: Vec<usize> = (0..n).collect();
            slots.shuffle(&mut rng);
            for &s in &slots[..witnesses] {
                instances[s] = normal(&mut rng, cfg.separation);
            }
        }
        let label = if positive {
            BagLabel::Positive
        } else {
            BagLabel::Negative
        };
        bags.push(Bag::new(format!("bag{b:04}"), instances, Some(label)));
    }
    Dataset::new(bags)
}

/// Randomly permutes the labels among the bags.
pub fn shuffle_labels(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let mut labels = ds.labels();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Dataset::new(
        ds.bags()
            .iter()
            .zip(labels)
            .map(|(b, l)| b.clone().with_label(l))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_balance() {
        let ds = generate(&SyntheticConfig::default()).unwrap();
        assert_eq!(ds.len(), 100);
        assert_eq!(ds.dim(), 10);
        let pos = ds.labels().iter().filter(|l| **l == Some(BagLabel::Positive)).count();
        assert_eq!(pos, 50);
        assert!(ds.bags().iter().all(|b| (4..=8).contains(&b.len())));
        assert_eq!(generate(&SyntheticConfig::default()).unwrap(), ds);
    }

    #[test]
    fn shuffled_labels_keep_counts() {
        let ds = generate(&SyntheticConfig::default()).unwrap();
        let sh = shuffle_labels(&ds, 1).unwrap();
        let count = |d: &Dataset| d.labels().iter().filter(|l| **l == Some(BagLabel::Positive)).count();
        assert_eq!(count(&sh), count(&ds));
        assert_ne!(sh.labels(), ds.labels());
    }
}
