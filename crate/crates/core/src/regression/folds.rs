use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Partitions `0..nobs` into `k` folds. The first `nobs % k` folds hold one
/// extra observation. Contiguous folds are blocks in index order; otherwise
/// indices are shuffled with `seed` before splitting.
pub fn kfold_splits(nobs: usize, k: usize, contiguous: bool, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > nobs {
        return Err(Error::InvalidArgument(format!(
            "fold count k = {k} must satisfy 2 <= k <= {nobs}"
        )));
    }
    let mut order: Vec<usize> = (0..nobs).collect();
    if !contiguous {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let (base, extra) = (nobs / k, nobs % k);
    let mut folds = Vec::with_capacity(k);
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = order[pos..pos + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        pos += size;
    }
    Ok(folds)
}
