mod common;

use std::collections::BTreeMap;

use camid::evalstat::{
    accuracy, classify_significance, mcnemar_chi2_p, mcnemar_contingency, mcnemar_exact_p, mcnemar_test, mean_std,
    read_fold_csv, stratified_kfold, write_fold_csv, ContingencyTable, FoldAssignment, McNemarMethod, Verdict,
};
use camid::Error;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

/// Disjoint covering test sets, train/val/test disjoint within each fold,
/// and per-class test counts within one of `N_c / k`.
fn check_folds(labels: &[usize], k: usize, folds: &[FoldAssignment]) {
    assert_eq!(folds.len(), k);
    let mut seen = vec![0usize; labels.len()];
    let mut class_sizes: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *class_sizes.entry(l).or_default() += 1;
    }
    for f in folds {
        for &i in &f.test {
            seen[i] += 1;
        }
        let mut all: Vec<usize> = f.train.iter().chain(&f.val).chain(&f.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for (&class, &size) in &class_sizes {
            let got = f.test.iter().filter(|&&i| labels[i] == class).count() as f64;
            assert!((got - size as f64 / k as f64).abs() < 1.0 + 1e-12, "class {class}: {got} of {size}");
        }
    }
    assert!(seen.iter().all(|&s| s == 1));
}

#[test]
fn exact_p_matches_enumeration() {
    let hists: Vec<Vec<u64>> = (0..=20).map(common::popcount_histogram).collect();
    for n in 0..=20usize {
        for b in 0..=n {
            let c = n - b;
            let expected = common::mcnemar_by_enumeration(&hists[n], b, c);
            assert_eq!(mcnemar_exact_p(b as u64, c as u64), expected, "b={b} c={c}");
            assert_eq!(mcnemar_exact_p(b as u64, c as u64), mcnemar_exact_p(c as u64, b as u64));
        }
    }
}

#[test]
fn exact_p_examples() {
    assert_eq!(mcnemar_exact_p(0, 0), 1.0);
    assert_eq!(mcnemar_exact_p(0, 2), 0.5);
    assert_eq!(mcnemar_exact_p(1, 9), 0.021484375);
    for b in 0..60 {
        assert_eq!(mcnemar_exact_p(b, b), 1.0);
    }
    // large-n branch against the integer branch at the boundary
    let small = mcnemar_exact_p(50, 70);
    let big = mcnemar_exact_p(51, 70);
    assert!(big > small && big < 1.0);
    assert!(mcnemar_exact_p(0, 400) > 0.0);
    // chi-square approaches the exact value for large counts
    assert!((mcnemar_chi2_p(200, 260) - mcnemar_exact_p(200, 260)).abs() < 2e-3);
    assert_eq!(McNemarMethod::ChiSquareAbove25.p_value(3, 9), mcnemar_exact_p(3, 9));
}

#[test]
fn significance_bands() {
    assert_eq!(classify_significance(0.5).unwrap(), Verdict::NotSignificant);
    assert_eq!(classify_significance(0.03).unwrap(), Verdict::Significant);
    assert_eq!(classify_significance(0.05).unwrap(), Verdict::Significant);
    assert_eq!(classify_significance(0.01).unwrap(), Verdict::Significant);
    assert_eq!(classify_significance(0.001).unwrap(), Verdict::HighlySignificant);
    assert!(matches!(classify_significance(1.5), Err(Error::Domain(_))));
    assert!(matches!(classify_significance(-0.1), Err(Error::Domain(_))));
}

#[test]
fn contingency_examples() {
    let truth = [0, 1, 2, 0, 1, 2];
    let p1 = [0, 1, 0, 0, 2, 1];
    let p2 = [0, 1, 2, 1, 1, 1];
    let t = mcnemar_contingency(&p1, &p2, &truth).unwrap();
    assert_eq!(t, ContingencyTable { a: 2, b: 1, c: 2, d: 1 });
    assert_eq!(t.total(), 6);

    let same = mcnemar_contingency(&p1, &p1, &truth).unwrap();
    assert_eq!((same.b, same.c), (0, 0));
    let all = mcnemar_contingency(&[0, 1, 2, 3], &[1, 2, 3, 0], &[0, 1, 2, 3]).unwrap();
    assert_eq!((all.b, all.c), (4, 0));
    assert!(matches!(mcnemar_contingency(&[0], &[0, 1], &[0, 1]), Err(Error::Shape(_))));

    let r = mcnemar_test(&p1, &p2, &truth, McNemarMethod::Exact).unwrap();
    assert_eq!(r.p_value, 1.0);
    assert_eq!(r.verdict, Verdict::NotSignificant);
}

#[test]
fn accuracy_and_mean_std_examples() {
    let truth = vec![3usize; 77];
    let mut preds = truth.clone();
    preds[10] = 0;
    preds[40] = 1;
    assert_eq!(format!("{:.2}", accuracy(&preds, &truth).unwrap()), "97.40");
    assert_eq!(accuracy(&preds, &preds).unwrap(), 100.0);
    assert!(matches!(accuracy(&[1], &[1, 2]), Err(Error::Shape(_))));

    assert_eq!(mean_std(&[5.0, 5.0, 5.0]).unwrap(), (5.0, 0.0));
    let (m, s) = mean_std(&[0.0, 10.0]).unwrap();
    assert_eq!(m, 5.0);
    assert_eq!(s, 5.0);
    let (_, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert!((s - 1.25f64.sqrt()).abs() < 1e-12);
    let (m, s) = mean_std(&[88.31, 85.70, 89.60, 89.47, 88.15]).unwrap();
    assert!((m - 88.24).abs() <= 0.01 && (s - 1.4).abs() <= 0.1);
    assert!(matches!(mean_std(&[1.0]), Err(Error::InvalidInput(_))));
}

#[test]
fn stratification_examples() {
    let labels: Vec<usize> = (0..20).map(|i| i / 10).collect();
    let folds = stratified_kfold(&labels, 5, 1).unwrap();
    check_folds(&labels, 5, &folds);
    for f in &folds {
        assert_eq!(f.test.len(), 4);
        assert_eq!(f.test.iter().filter(|&&i| labels[i] == 0).count(), 2);
    }
    assert_eq!(stratified_kfold(&labels, 5, 1).unwrap(), folds);
    assert_ne!(stratified_kfold(&labels, 5, 2).unwrap(), folds);

    let labels: Vec<usize> = std::iter::repeat_n(0, 7).chain(std::iter::repeat_n(1, 9)).collect();
    let folds = stratified_kfold(&labels, 5, 3).unwrap();
    check_folds(&labels, 5, &folds);
    for class in 0..2 {
        let counts: Vec<usize> = folds
            .iter()
            .map(|f| f.test.iter().filter(|&&i| labels[i] == class).count())
            .collect();
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    }
    let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
}

#[test]
fn short_classes_are_named() {
    let labels = ["native/class 0", "native/class 0", "native/class 0", "youtube/class 4"];
    match stratified_kfold(&labels, 2, 0).unwrap_err() {
        Error::Stratification(msg) => assert!(msg.contains("youtube/class 4"), "{msg}"),
        other => panic!("unexpected {other}"),
    }
    assert!(matches!(stratified_kfold(&labels, 1, 0), Err(Error::InvalidConfig(_))));
}

#[test]
fn validation_is_carved_per_class_from_training() {
    let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
    for f in stratified_kfold(&labels, 5, 9).unwrap() {
        // 40 training samples per class, 10% of each held out
        assert_eq!(f.val.len(), 8);
        assert_eq!(f.val.iter().filter(|&&i| labels[i] == 0).count(), 4);
    }
}

#[test]
fn fold_csv_round_trip() {
    let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let ids = common::ids("v", 30);
    let folds = stratified_kfold(&labels, 3, 7).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("folds.csv");
    write_fold_csv(&path, &folds, &ids).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("sample_id,fold,split\n"));
    assert_eq!(text.lines().count(), 1 + 30 * 3);
    let back = read_fold_csv(&path, &ids).unwrap();
    assert_eq!(back.len(), folds.len());
    for (a, b) in back.iter().zip(&folds) {
        assert_eq!((&a.train, &a.val, &a.test), (&b.train, &b.val, &b.test));
    }
    write_fold_csv(&path, &back, &ids).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
}

#[test]
fn hundred_random_label_multisets() {
    let mut rng = common::rng(77);
    for _ in 0..100 {
        let k = rng.random_range(2..=6);
        let classes = rng.random_range(1..=6);
        let mut labels = Vec::new();
        for c in 0..classes {
            labels.extend(std::iter::repeat_n(c, rng.random_range(k..=k * 6)));
        }
        labels.shuffle(&mut rng);
        let folds = stratified_kfold(&labels, k, rng.random()).unwrap();
        check_folds(&labels, k, &folds);
    }
}

proptest! {
    #[test]
    fn mean_std_is_permutation_invariant(mut v in prop::collection::vec(0.0f64..100.0, 2..12), seed in any::<u64>()) {
        let (m1, s1) = mean_std(&v).unwrap();
        v.shuffle(&mut common::rng(seed));
        let (m2, s2) = mean_std(&v).unwrap();
        prop_assert!((m1 - m2).abs() < 1e-9 && (s1 - s2).abs() < 1e-9);
    }

    #[test]
    fn self_accuracy_is_full(preds in prop::collection::vec(0usize..10, 1..50)) {
        prop_assert_eq!(accuracy(&preds, &preds).unwrap(), 100.0);
    }
}
