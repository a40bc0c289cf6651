//! IID partitioning of a sample set across simulated edge servers.

use crate::error::{Error, Result};
use crate::util::seeded_permutation;

/// The slice of a dataset owned by one edge server.
#[derive(Debug, Clone, PartialEq)]
pub struct Shard {
    pub owner: usize,
    /// Sample indices into the parent set.
    pub indices: Vec<usize>,
}

impl Shard {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Splits `0..set_size` into `servers` disjoint covering shards of size
/// floor(N/K) or ceil(N/K), by seeded random permutation.
pub fn partition_iid(set_size: usize, servers: usize, seed: u64) -> Result<Vec<Shard>> {
    if servers == 0 {
        return Err(Error::Argument("need at least one server".into()));
    }
    if servers > set_size {
        return Err(Error::Argument(format!(
            "{servers} servers for {set_size} samples"
        )));
    }
    let perm = seeded_permutation(set_size, seed);
    let base = set_size / servers;
    let extra = set_size % servers;
    let mut shards = Vec::with_capacity(servers);
    let mut cursor = 0;
    for owner in 0..servers {
        let take = base + usize::from(owner < extra);
        shards.push(Shard {
            owner,
            indices: perm[cursor..cursor + take].to_vec(),
        });
        cursor += take;
    }
    Ok(shards)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_server_takes_everything() {
        let shards = partition_iid(10, 1, 0).unwrap();
        assert_eq!(shards.len(), 1);
        assert_eq!(shards[0].len(), 10);
    }

    #[test]
    fn sizes_split_as_floor_and_ceil() {
        let shards = partition_iid(10, 4, 3).unwrap();
        let mut sizes: Vec<usize> = shards.iter().map(Shard::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 3, 3]);
    }

    #[test]
    fn deterministic_replay_at_scale() {
        let a = partition_iid(60000, 8, 42).unwrap();
        let b = partition_iid(60000, 8, 42).unwrap();
        assert_eq!(a, b);
        let c = partition_iid(60000, 8, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn too_many_servers_is_an_argument_error() {
        assert!(partition_iid(3, 4, 0).is_err());
        assert!(partition_iid(3, 0, 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn prop_disjoint_and_covering(n in 1usize..500, k in 1usize..16, seed in 0u64..1000) {
            prop_assume!(k <= n);
            let shards = partition_iid(n, k, seed).unwrap();
            let mut seen = vec![false; n];
            for s in &shards {
                for &i in &s.indices {
                    prop_assert!(!seen[i], "index {} in two shards", i);
                    seen[i] = true;
                }
            }
            prop_assert!(seen.iter().all(|&b| b));
            let max = shards.iter().map(Shard::len).max().unwrap();
            let min = shards.iter().map(Shard::len).min().unwrap();
            prop_assert!(max - min <= 1);
        }
    }
}
