use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::classifier::LabeledPair;
use crate::error::{Error, Result};

/// Draws `m` distinct indices uniformly from `0..pool`, never `src_index`.
pub fn sample_negatives(
    src_index: usize,
    pool: usize,
    m: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::Config("negatives per source must be at least 1".into()));
    }
    if pool < m + 1 || src_index >= pool {
        return Err(Error::PoolTooSmall { pool, m });
    }
    Ok(index::sample(rng, pool - 1, m)
        .into_iter()
        .map(|j| if j >= src_index { j + 1 } else { j })
        .collect())
}

/// One epoch of training examples: every bootstrap pair once with label 1 and
/// `m` times with a sampled wrong target and label 0, in shuffled order.
pub fn build_epoch(bootstrap: &[LabeledPair], m: usize, rng: &mut impl Rng) -> Result<Vec<LabeledPair>> {
    if bootstrap.is_empty() {
        return Err(Error::EmptyCorpus("bootstrap has no pairs".into()));
    }
    if let Some(i) = bootstrap.iter().position(|p| !p.label) {
        return Err(Error::Config(format!("bootstrap pair {i} is not labeled positive")));
    }
    let n = bootstrap.len();
    let mut out = Vec::with_capacity(n * (1 + m));
    for (i, pair) in bootstrap.iter().enumerate() {
        out.push(pair.clone());
        for j in sample_negatives(i, n, m, rng)? {
            out.push(LabeledPair {
                src: pair.src.clone(),
                tgt: bootstrap[j].tgt.clone(),
                label: false,
            });
        }
    }
    out.shuffle(rng);
    Ok(out)
}
