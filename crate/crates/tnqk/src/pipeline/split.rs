//! Stratified train/test splitting and cross-validation fold assignment.
//!
//! Both are driven by one seeded stream consumed in ascending class order,
//! so a (labels, seed) pair pins the partition exactly. Index lists are
//! returned sorted ascending; the shuffle only decides membership.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::preprocess::Dataset;

fn classes_present(labels: &[usize]) -> Vec<usize> {
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes
}

/// Split a dataset into train/test, per class: each class contributes
/// round(ratio * size) training samples, clamped so both sides keep at
/// least one.
pub fn split(d: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !ratio.is_finite() || ratio <= 0.0 || ratio >= 1.0 {
        return Err(Error::invalid(format!(
            "split ratio must lie strictly inside (0, 1), got {ratio}"
        )));
    }
    if d.is_empty() {
        return Err(Error::invalid("cannot split an empty dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for class in classes_present(&d.labels) {
        let mut members = d.indices_of_class(class);
        if members.len() < 2 {
            return Err(Error::invalid(format!(
                "class {class} has {} samples, need at least 2 to split",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n_train = ((ratio * members.len() as f64).round() as usize)
            .clamp(1, members.len() - 1);
        train_idx.extend_from_slice(&members[..n_train]);
        test_idx.extend_from_slice(&members[n_train..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((d.subset(&train_idx), d.subset(&test_idx)))
}

/// Assign indices 0..labels.len() to `folds` validation folds, stratified:
/// each class's shuffled members are dealt round-robin. Folds come back
/// sorted ascending and form a disjoint cover.
pub fn cv_folds(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {folds}")));
    }
    if labels.len() < folds {
        return Err(Error::invalid(format!(
            "{} samples cannot fill {folds} folds",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![Vec::new(); folds];
    for class in classes_present(labels) {
        let mut members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        members.shuffle(&mut rng);
        for (k, idx) in members.into_iter().enumerate() {
            assignment[k % folds].push(idx);
        }
    }
    if let Some(empty) = assignment.iter().position(Vec::is_empty) {
        return Err(Error::invalid(format!(
            "fold {empty} would be empty; too many folds for this label balance"
        )));
    }
    for fold in &mut assignment {
        fold.sort_unstable();
    }
    Ok(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::pipeline::synth::{synth_dataset, SynthSpec};

    fn toy(labels: Vec<usize>) -> Dataset {
        let m = labels.len();
        let features =
            Matrix::from_vec(m, 1, (0..m).map(|i| i as f64).collect()).unwrap();
        Dataset::raw(features, labels).unwrap()
    }

    #[test]
    fn hundred_samples_split_eighty_twenty() {
        let d = synth_dataset(&SynthSpec::new(10, 10, 5)).unwrap();
        let (train, test) = split(&d, 0.8, 11).unwrap();
        assert_eq!(train.len(), 80);
        assert_eq!(test.len(), 20);
        for class in 0..10 {
            assert_eq!(train.indices_of_class(class).len(), 8);
            assert_eq!(test.indices_of_class(class).len(), 2);
        }
    }

    #[test]
    fn same_seed_reproduces_the_partition() {
        let d = synth_dataset(&SynthSpec::new(3, 20, 9)).unwrap();
        let (tr1, te1) = split(&d, 0.7, 4).unwrap();
        let (tr2, te2) = split(&d, 0.7, 4).unwrap();
        assert_eq!(tr1.labels, tr2.labels);
        assert_eq!(tr1.features.data(), tr2.features.data());
        assert_eq!(te1.features.data(), te2.features.data());
        let (tr3, _) = split(&d, 0.7, 5).unwrap();
        assert_ne!(tr1.features.data(), tr3.features.data());
    }

    #[test]
    fn per_class_proportion_is_kept_within_one() {
        // Unbalanced 10-class toy set: class c has 5 + 3c samples.
        let mut labels = Vec::new();
        for c in 0..10 {
            labels.extend(std::iter::repeat(c).take(5 + 3 * c));
        }
        let d = toy(labels);
        let (train, _) = split(&d, 0.8, 2).unwrap();
        for c in 0..10 {
            let total = 5 + 3 * c;
            let got = train.indices_of_class(c).len() as f64;
            assert!((got - 0.8 * total as f64).abs() <= 1.0, "class {c}: {got}");
        }
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let d = toy(vec![0, 0, 1]);
        assert!(split(&d, 0.8, 0).is_err(), "class 1 has a single sample");
        let d2 = toy(vec![0, 0, 1, 1]);
        assert!(split(&d2, 0.0, 0).is_err());
        assert!(split(&d2, 1.0, 0).is_err());
        assert!(split(&d2, f64::NAN, 0).is_err());
    }

    #[test]
    fn folds_cover_disjointly_and_stratify() {
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let folds = cv_folds(&labels, 5, 3).unwrap();
        assert_eq!(folds.len(), 5);
        let mut seen = vec![false; 40];
        for fold in &folds {
            assert_eq!(fold.len(), 8);
            for &i in fold {
                assert!(!seen[i], "index {i} assigned twice");
                seen[i] = true;
            }
            // 10 members per class dealt over 5 folds: 2 of each class.
            for c in 0..4 {
                assert_eq!(fold.iter().filter(|&&i| labels[i] == c).count(), 2);
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(cv_folds(&labels, 5, 3).unwrap(), folds);
    }

    #[test]
    fn fold_parameters_are_validated() {
        let labels = vec![0usize, 1, 0, 1];
        assert!(cv_folds(&labels, 1, 0).is_err());
        assert!(cv_folds(&labels, 5, 0).is_err());
        assert!(cv_folds(&[], 2, 0).is_err());
    }
}
