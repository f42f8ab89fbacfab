use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};

/// One train/test partition of a dataset's example indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified `k`-fold split.
///
/// Each class's indices are shuffled with the seeded generator and dealt
/// round-robin into the folds. The dealing position carries over from one
/// class to the next so fold sizes also stay within one of each other.
pub fn stratified_folds(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::param(format!("stratified folds need k >= 2, got {k}")));
    }
    let labels = dataset.labels()?;
    let mut by_class = vec![Vec::new(); dataset.n_classes()];
    for (i, l) in labels.iter().enumerate() {
        by_class[l.index()].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < k {
            return Err(Error::TooFewClassMembers {
                class: dataset.classes()[c].clone(),
                count: members.len(),
                k,
            });
        }
    }

    let mut rng = rng_for(seed, Stream::Folds, &[]);
    let mut assignment = vec![0usize; labels.len()];
    let mut slot = 0usize;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignment[i] = slot % k;
            slot += 1;
        }
    }

    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| assignment[i] == f);
            Fold { train, test }
        })
        .collect())
}
