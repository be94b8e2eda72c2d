use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One independently optimized slice of the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shard {
    /// Position of this shard's first slot within its split.
    pub parent_offset: usize,
    /// Global sample indices, ascending.
    pub indices: Vec<usize>,
}

impl Shard {
    /// The whole corpus as a single shard.
    pub fn whole(n: usize) -> Self {
        Shard {
            parent_offset: 0,
            indices: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Randomly partitions `0..n` into `ceil(n / shard_size)` shards. Only the
/// last shard may be short.
pub fn split_shards(n: usize, shard_size: usize, seed: u64) -> Result<Vec<Shard>> {
    if shard_size == 0 {
        return Err(Error::invalid("shard size must be at least 1"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(perm
        .chunks(shard_size)
        .enumerate()
        .map(|(k, chunk)| {
            let mut indices = chunk.to_vec();
            indices.sort_unstable();
            Shard {
                parent_offset: k * shard_size,
                indices,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn ten_by_four() {
        let shards = split_shards(10, 4, 1).unwrap();
        let sizes: Vec<usize> = shards.iter().map(Shard::len).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        let all: BTreeSet<usize> = shards.iter().flat_map(|s| s.indices.clone()).collect();
        assert_eq!(all, (0..10).collect());
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(
            split_shards(100, 7, 42).unwrap(),
            split_shards(100, 7, 42).unwrap()
        );
        assert_ne!(
            split_shards(100, 7, 42).unwrap(),
            split_shards(100, 7, 43).unwrap()
        );
    }

    #[test]
    fn thousand_is_a_partition() {
        let shards = split_shards(1000, 64, 9).unwrap();
        let mut seen = BTreeSet::new();
        let mut total = 0;
        for s in &shards {
            total += s.len();
            for &i in &s.indices {
                assert!(i < 1000);
                assert!(seen.insert(i), "duplicate {i}");
            }
        }
        assert_eq!(total, 1000);
        assert_eq!(seen, (0..1000).collect::<BTreeSet<_>>());
        assert_eq!(shards.len(), 1000usize.div_ceil(64));
    }

    #[test]
    fn zero_shard_size_rejected() {
        assert!(split_shards(5, 0, 0).is_err());
    }
}
