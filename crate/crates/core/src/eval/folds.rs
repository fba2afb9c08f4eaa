use rand::seq::SliceRandom;

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::rng;

/// Test-index sets of `k` folds. Each class (clean, defective, unlabeled) is
/// shuffled separately and dealt round-robin, the dealer position carrying
/// over between classes so fold sizes also stay within one of each other.
pub fn stratified_k_fold(labels: &[Option<Label>], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config("k must be at least 2".into()));
    }
    if k > labels.len() {
        return Err(Error::Input(format!("k = {k} exceeds the {} records", labels.len())));
    }
    let mut rng = rng::stream(seed, "folds");
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in [Some(Label::Clean), Some(Label::Defective), None] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(pos: usize, neg: usize) -> Vec<Option<Label>> {
        (0..pos + neg)
            .map(|i| Some(if i < pos { Label::Defective } else { Label::Clean }))
            .collect()
    }

    fn class_counts(l: &[Option<Label>], fold: &[usize]) -> (usize, usize) {
        let pos = fold.iter().filter(|&&i| l[i] == Some(Label::Defective)).count();
        (pos, fold.len() - pos)
    }

    #[test]
    fn divisible_case_is_exact() {
        let l = labels(10, 10);
        for f in stratified_k_fold(&l, 5, 1).unwrap() {
            assert_eq!(class_counts(&l, &f), (2, 2));
        }
    }

    #[test]
    fn uneven_case_within_one() {
        let l = labels(7, 13);
        let folds = stratified_k_fold(&l, 10, 2).unwrap();
        let counts: Vec<_> = folds.iter().map(|f| class_counts(&l, f)).collect();
        for c in [counts.iter().map(|c| c.0).collect::<Vec<_>>(), counts.iter().map(|c| c.1).collect()] {
            assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1);
        }
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..20).collect::<Vec<_>>());
        assert_eq!(folds, stratified_k_fold(&l, 10, 2).unwrap());
    }

    #[test]
    fn bad_k_rejected() {
        assert!(stratified_k_fold(&labels(1, 1), 3, 0).is_err());
        assert!(stratified_k_fold(&labels(3, 3), 1, 0).is_err());
    }
}
