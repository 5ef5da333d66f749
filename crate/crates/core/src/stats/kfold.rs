use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Splits patients into `k` disjoint folds, dealing each shuffled class
/// round-robin so per-fold class counts differ by at most one.
///
/// Returns indices into `patient_ids`.
pub fn stratified_kfold(patient_ids: &[String], labels: &[bool], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if patient_ids.len() != labels.len() {
        return Err(Error::InvalidInput("patient ids and labels differ in length".into()));
    }
    if k < 2 {
        return Err(Error::InvalidInput(format!("k = {k}; need at least 2 folds")));
    }
    let mut seen = HashMap::new();
    for (i, id) in patient_ids.iter().enumerate() {
        if let Some(j) = seen.insert(id.as_str(), i) {
            return Err(Error::InvalidInput(format!(
                "patient `{id}` listed twice (entries {j} and {i})"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for (class, name) in [(true, "positive"), (false, "negative")] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::Stratification {
                class: name,
                count: members.len(),
                k,
            });
        }
        members.shuffle(&mut rng);
        for m in members {
            folds[next].push(m);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn exact_stratification() {
        let labels: Vec<bool> = (0..20).map(|i| i < 10).collect();
        let folds = stratified_kfold(&ids(20), &labels, 10, 3).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 2);
            assert_eq!(f.iter().filter(|&&i| labels[i]).count(), 1);
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let labels: Vec<bool> = (0..30).map(|i| i % 3 == 0).collect();
        let a = stratified_kfold(&ids(30), &labels, 5, 1).unwrap();
        assert_eq!(a, stratified_kfold(&ids(30), &labels, 5, 1).unwrap());
        assert_ne!(a, stratified_kfold(&ids(30), &labels, 5, 2).unwrap());
    }

    #[test]
    fn too_few_patients_in_a_class() {
        let labels = [true, true, false, false, false];
        assert!(matches!(
            stratified_kfold(&ids(5), &labels, 3, 0),
            Err(Error::Stratification { class: "positive", count: 2, k: 3 })
        ));
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(stratified_kfold(&dup, &[true, false], 2, 0).is_err());
    }

    proptest! {
        #[test]
        fn partition_with_balanced_classes(
            labels in proptest::collection::vec(any::<bool>(), 4..80),
            k in 2usize..6,
            seed in any::<u64>(),
        ) {
            let pos = labels.iter().filter(|&&l| l).count();
            let neg = labels.len() - pos;
            prop_assume!(pos >= k && neg >= k);
            let folds = stratified_kfold(&ids(labels.len()), &labels, k, seed).unwrap();
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for (class, total) in [(true, pos), (false, neg)] {
                let ideal = total as f64 / k as f64;
                for f in &folds {
                    let c = f.iter().filter(|&&i| labels[i] == class).count() as f64;
                    prop_assert!((c - ideal).abs() < 1.0);
                }
            }
        }
    }
}
