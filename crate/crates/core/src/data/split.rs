use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::types::{Conversation, DatasetSplit};
use crate::error::{Error, Result};

/// Seeded train/validation split. The validation side receives
/// `round(val_fraction * N)` conversations; both sides keep input order.
pub fn split_dataset(conversations: &[Conversation], val_fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if conversations.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} conversation(s); need at least 2",
            conversations.len()
        )));
    }
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction {val_fraction} must lie strictly between 0 and 1"
        )));
    }
    let n = conversations.len();
    let n_val = (val_fraction * n as f64).round() as usize;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_val = vec![false; n];
    for &i in &order[..n_val] {
        in_val[i] = true;
    }

    let (mut train, mut validation) = (Vec::new(), Vec::new());
    for (conv, val) in conversations.iter().zip(in_val) {
        if val {
            validation.push(conv.clone());
        } else {
            train.push(conv.clone());
        }
    }
    Ok(DatasetSplit {
        train,
        validation,
        test: Vec::new(),
        seed,
    })
}

/// Partition `conversations` into `k` disjoint seeded folds of near-equal size.
pub fn folds(conversations: &[Conversation], k: usize, seed: u64) -> Result<Vec<Vec<Conversation>>> {
    if k == 0 || k > conversations.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot build {k} folds from {} conversations",
            conversations.len()
        )));
    }
    let mut order: Vec<usize> = (0..conversations.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = vec![Vec::new(); k];
    for (pos, &i) in order.iter().enumerate() {
        out[pos % k].push(conversations[i].clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::types::Turn;
    use std::collections::HashSet;

    fn corpus(n: usize) -> Vec<Conversation> {
        (0..n)
            .map(|i| Conversation::new(format!("c{i}"), vec![Turn::new(1, "hi", "hello")]))
            .collect()
    }

    #[test]
    fn official_training_size() {
        // round(0.10 * 373) = round(37.3) = 37
        let split = split_dataset(&corpus(373), 0.10, 7).unwrap();
        assert_eq!(split.validation.len(), 37);
        assert_eq!(split.train.len(), 336);
    }

    #[test]
    fn deterministic_and_disjoint() {
        let data = corpus(50);
        let a = split_dataset(&data, 0.2, 11).unwrap();
        let b = split_dataset(&data, 0.2, 11).unwrap();
        assert_eq!(a, b);
        let train: HashSet<_> = a.train.iter().map(|c| c.id.clone()).collect();
        let val: HashSet<_> = a.validation.iter().map(|c| c.id.clone()).collect();
        assert!(train.is_disjoint(&val));
        assert_eq!(train.len() + val.len(), 50);
    }

    #[test]
    fn minimal_split() {
        let split = split_dataset(&corpus(2), 0.5, 0).unwrap();
        assert_eq!((split.train.len(), split.validation.len()), (1, 1));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(split_dataset(&corpus(1), 0.5, 0).is_err());
        assert!(split_dataset(&corpus(10), 0.0, 0).is_err());
        assert!(split_dataset(&corpus(10), 1.0, 0).is_err());
    }

    #[test]
    fn folds_partition_the_input() {
        let data = corpus(23);
        let f = folds(&data, 5, 3).unwrap();
        assert_eq!(f.len(), 5);
        let ids: HashSet<_> = f.iter().flatten().map(|c| c.id.clone()).collect();
        assert_eq!(ids.len(), 23);
        assert!(f.iter().all(|fold| fold.len() == 4 || fold.len() == 5));
    }
}
