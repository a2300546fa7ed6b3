use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Rotating k-fold split over `n` items. Items are shuffled with `seed` and
/// cut into `k` shards of near-equal size; fold `i` tests on shard `i`,
/// validates on shard `(i + 1) mod k` and trains on the rest.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 3 {
        return Err(Error::Config(format!("k-fold needs k >= 3, got {k}")));
    }
    if n < k {
        return Err(Error::Data(format!(
            "{n} matches is fewer than the {k} folds requested"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, &["kfold"]));
    let mut shards = Vec::with_capacity(k);
    let (base, extra) = (n / k, n % k);
    let mut at = 0;
    for s in 0..k {
        let len = base + usize::from(s < extra);
        let mut shard = order[at..at + len].to_vec();
        shard.sort_unstable();
        shards.push(shard);
        at += len;
    }
    Ok((0..k)
        .map(|i| {
            let v = (i + 1) % k;
            let mut train: Vec<usize> = (0..k)
                .filter(|&s| s != i && s != v)
                .flat_map(|s| shards[s].iter().copied())
                .collect();
            train.sort_unstable();
            Fold {
                index: i,
                train,
                validation: shards[v].clone(),
                test: shards[i].clone(),
            }
        })
        .collect())
}
