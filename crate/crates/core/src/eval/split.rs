use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EvalError;

const MIN_ITEMS: usize = 5;

/// Seeded, class-stratified train/test split. Each class contributes
/// `round(ratio * class_size)` items to the training set.
pub fn split_train_test<T: Clone, L: Ord + Clone>(
    items: &[(T, L)],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<(T, L)>, Vec<(T, L)>), EvalError> {
    if items.len() < MIN_ITEMS {
        return Err(EvalError::TooFewItems { needed: MIN_ITEMS, got: items.len() });
    }
    if !(0.0..=1.0).contains(&ratio) || ratio.is_nan() {
        return Err(EvalError::InvalidRatio(ratio.to_string()));
    }
    let mut by_class: BTreeMap<L, Vec<usize>> = BTreeMap::new();
    for (i, (_, label)) in items.iter().enumerate() {
        by_class.entry(label.clone()).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for idx in by_class.values_mut() {
        idx.shuffle(&mut rng);
        let n_train = (ratio * idx.len() as f64).round() as usize;
        train.extend(idx[..n_train].iter().map(|&i| items[i].clone()));
        test.extend(idx[n_train..].iter().map(|&i| items[i].clone()));
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok((train, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(pos: usize, neg: usize) -> Vec<(usize, bool)> {
        (0..pos).map(|i| (i, true)).chain((0..neg).map(|i| (100 + i, false))).collect()
    }

    #[test]
    fn stratified_four_to_one() {
        let (train, test) = split_train_test(&items(5, 5), 0.8, 1).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        assert_eq!(test.iter().filter(|(_, l)| *l).count(), 1);
        assert_eq!(test.iter().filter(|(_, l)| !*l).count(), 1);
    }

    #[test]
    fn deterministic_per_seed() {
        let data = items(30, 12);
        assert_eq!(split_train_test(&data, 0.8, 9).unwrap(), split_train_test(&data, 0.8, 9).unwrap());
        assert_ne!(split_train_test(&data, 0.8, 9).unwrap(), split_train_test(&data, 0.8, 10).unwrap());
    }

    #[test]
    fn too_few_items() {
        assert_eq!(split_train_test(&items(2, 1), 0.8, 1).unwrap_err(), EvalError::TooFewItems { needed: 5, got: 3 });
        assert!(split_train_test(&items(3, 3), 1.5, 1).is_err());
    }

    #[test]
    fn preserves_class_proportions() {
        let data = items(37, 13);
        let (train, test) = split_train_test(&data, 0.8, 4).unwrap();
        assert_eq!(train.len() + test.len(), 50);
        let pos_train = train.iter().filter(|(_, l)| *l).count() as f64;
        assert!((pos_train - 0.8 * 37.0).abs() <= 1.0);
        let neg_train = train.iter().filter(|(_, l)| !*l).count() as f64;
        assert!((neg_train - 0.8 * 13.0).abs() <= 1.0);
    }
}
