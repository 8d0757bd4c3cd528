//! Stratified cross-validation, accuracy aggregation and McNemar tests.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Share of each class's training portion held out for validation.
pub const VALIDATION_SHARE: f64 = 0.1;

/// Train/validation/test partition of sample indices for one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub fold_index: usize,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl FoldAssignment {
    pub fn split_of(&self, index: usize) -> Option<Split> {
        if self.test.binary_search(&index).is_ok() {
            Some(Split::Test)
        } else if self.val.binary_search(&index).is_ok() {
            Some(Split::Val)
        } else if self.train.binary_search(&index).is_ok() {
            Some(Split::Train)
        } else {
            None
        }
    }
}

/// Stratified `k`-fold split over `labels`. Each class is shuffled with a
/// ChaCha8 stream seeded by `seed` and dealt round-robin over the folds,
/// starting where the previous class stopped so fold sizes stay balanced.
/// Within each fold, [`VALIDATION_SHARE`] of every class's training samples
/// (rounded) becomes the validation set. Index lists are sorted.
pub fn stratified_kfold<L>(labels: &[L], k: usize, seed: u64) -> Result<Vec<FoldAssignment>>
where
    L: Ord + Clone + fmt::Display,
{
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k = {k}; need at least 2 folds")));
    }
    let mut by_class: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let short: Vec<String> = by_class
        .iter()
        .filter(|(_, v)| v.len() < k)
        .map(|(l, v)| format!("class {l} has {} sample(s)", v.len()))
        .collect();
    if !short.is_empty() {
        return Err(Error::Stratification(format!(
            "every class needs at least {k} samples for {k}-fold stratification: {}",
            short.join(", ")
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];
    let mut offset = 0;
    for members in by_class.values() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for (j, &i) in shuffled.iter().enumerate() {
            fold_of[i] = (offset + j) % k;
        }
        offset = (offset + members.len()) % k;
    }

    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let mut fold_rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(f as u64 + 1)));
        let mut train = Vec::new();
        let mut val = Vec::new();
        for members in by_class.values() {
            let mut pool: Vec<usize> = members.iter().copied().filter(|&i| fold_of[i] != f).collect();
            pool.shuffle(&mut fold_rng);
            let n_val = (pool.len() as f64 * VALIDATION_SHARE).round() as usize;
            val.extend_from_slice(&pool[..n_val]);
            train.extend_from_slice(&pool[n_val..]);
        }
        let mut test: Vec<usize> = (0..labels.len()).filter(|&i| fold_of[i] == f).collect();
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        folds.push(FoldAssignment {
            fold_index: f,
            train,
            val,
            test,
            seed,
        });
    }
    Ok(folds)
}

/// Writes `sample_id,fold,split` rows, one per sample per fold.
pub fn write_fold_csv(path: &Path, folds: &[FoldAssignment], sample_ids: &[String]) -> Result<()> {
    let mut out = String::from("sample_id,fold,split\n");
    for fold in folds {
        for (i, id) in sample_ids.iter().enumerate() {
            if let Some(split) = fold.split_of(i) {
                out.push_str(&format!("{id},{},{}\n", fold.fold_index, split.name()));
            }
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a fold file back into assignments indexed against `sample_ids`.
pub fn read_fold_csv(path: &Path, sample_ids: &[String]) -> Result<Vec<FoldAssignment>> {
    let index: BTreeMap<&str, usize> = sample_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let mut folds: BTreeMap<usize, FoldAssignment> = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let bad = |what: &str| Error::format(path, format!("line {}: {what}", line + 2));
        if record.len() != 3 {
            return Err(bad("expected sample_id,fold,split"));
        }
        let i = *index.get(&record[0]).ok_or_else(|| bad("unknown sample id"))?;
        let f: usize = record[1].parse().map_err(|_| bad("fold is not an integer"))?;
        let entry = folds.entry(f).or_insert_with(|| FoldAssignment {
            fold_index: f,
            train: vec![],
            val: vec![],
            test: vec![],
            seed: 0,
        });
        match &record[2] {
            "train" => entry.train.push(i),
            "val" => entry.val.push(i),
            "test" => entry.test.push(i),
            _ => return Err(bad("split must be train, val or test")),
        }
    }
    let mut out: Vec<FoldAssignment> = folds.into_values().collect();
    for fold in &mut out {
        fold.train.sort_unstable();
        fold.val.sort_unstable();
        fold.test.sort_unstable();
    }
    Ok(out)
}

/// Percentage of positions where `preds` equals `truth`.
pub fn accuracy(preds: &[usize], truth: &[usize]) -> Result<f64> {
    if preds.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            preds.len(),
            truth.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::InvalidInput("accuracy of an empty prediction set".into()));
    }
    let hits = preds.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(100.0 * hits as f64 / preds.len() as f64)
}

/// Mean and population standard deviation (`n` denominator), the
/// convention behind the published `Mean ± StD` rows.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "mean/std needs at least two values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((mean, (ss / n).sqrt()))
}

/// Paired outcome counts of two classifiers on the same samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContingencyTable {
    /// both correct
    pub a: u64,
    /// only the first system correct
    pub b: u64,
    /// only the second system correct
    pub c: u64,
    /// both wrong
    pub d: u64,
}

impl ContingencyTable {
    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }
}

pub fn mcnemar_contingency(preds1: &[usize], preds2: &[usize], truth: &[usize]) -> Result<ContingencyTable> {
    if preds1.len() != truth.len() || preds2.len() != truth.len() {
        return Err(Error::Shape(format!(
            "prediction lengths {} and {} do not match {} labels",
            preds1.len(),
            preds2.len(),
            truth.len()
        )));
    }
    let mut t = ContingencyTable::default();
    for ((p1, p2), y) in preds1.iter().zip(preds2).zip(truth) {
        match (p1 == y, p2 == y) {
            (true, true) => t.a += 1,
            (true, false) => t.b += 1,
            (false, true) => t.c += 1,
            (false, false) => t.d += 1,
        }
    }
    Ok(t)
}

/// Exact two-sided McNemar p-value: a binomial test with success
/// probability 1/2 on the `b + c` discordant pairs,
/// `min(1, 2 sum_{i <= min(b, c)} C(n, i) / 2^n)`, and 1 when `n = 0`.
pub fn mcnemar_exact_p(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let m = b.min(c);
    if n <= 120 {
        // exact integer tail; C(120, 60) < 2^117
        let mut coef: u128 = 1;
        let mut tail: u128 = 1;
        for i in 1..=m as u128 {
            coef = coef * (n as u128 - i + 1) / i;
            tail += coef;
        }
        let p = 2.0 * tail as f64 / 2f64.powi(n as i32);
        return p.min(1.0);
    }
    // log-space for large n
    let ln2n = n as f64 * std::f64::consts::LN_2;
    let mut ln_coef = 0.0f64;
    let mut terms = vec![-ln2n];
    for i in 1..=m {
        ln_coef += ((n - i + 1) as f64).ln() - (i as f64).ln();
        terms.push(ln_coef - ln2n);
    }
    let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - peak).exp()).sum();
    (2.0 * (peak.exp() * sum)).min(1.0)
}

/// Continuity-corrected chi-square McNemar p-value,
/// `(|b - c| - 1)^2 / (b + c)` against one degree of freedom. Only sensible
/// for large discordant counts; 1 when `b + c = 0`.
pub fn mcnemar_chi2_p(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let diff = (b as f64 - c as f64).abs() - 1.0;
    let stat = diff.max(0.0).powi(2) / n as f64;
    statrs::function::erf::erfc((stat / 2.0).sqrt())
}

/// Which McNemar variant to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McNemarMethod {
    #[default]
    Exact,
    /// Chi-square with continuity correction once `b + c` exceeds 25; exact
    /// below that.
    ChiSquareAbove25,
}

impl McNemarMethod {
    pub fn p_value(self, b: u64, c: u64) -> f64 {
        match self {
            McNemarMethod::ChiSquareAbove25 if b + c > 25 => mcnemar_chi2_p(b, c),
            _ => mcnemar_exact_p(b, c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NotSignificant,
    Significant,
    HighlySignificant,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::NotSignificant => "not significant",
            Verdict::Significant => "significant",
            Verdict::HighlySignificant => "highly significant",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// `p < 0.01` highly significant, `0.01 <= p <= 0.05` significant,
/// otherwise not significant.
pub fn classify_significance(p: f64) -> Result<Verdict> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("p-value {p} outside [0, 1]")));
    }
    Ok(if p < 0.01 {
        Verdict::HighlySignificant
    } else if p <= 0.05 {
        Verdict::Significant
    } else {
        Verdict::NotSignificant
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub table: ContingencyTable,
    pub p_value: f64,
    pub verdict: Verdict,
}

pub fn mcnemar_test(preds1: &[usize], preds2: &[usize], truth: &[usize], method: McNemarMethod) -> Result<SignificanceResult> {
    let table = mcnemar_contingency(preds1, preds2, truth)?;
    let p_value = method.p_value(table.b, table.c);
    Ok(SignificanceResult {
        table,
        p_value,
        verdict: classify_significance(p_value)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 100.0);
        assert_eq!(accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        let truth = vec![0usize; 77];
        let mut preds = truth.clone();
        preds[0] = 1;
        preds[1] = 1;
        let acc = accuracy(&preds, &truth).unwrap();
        assert_eq!(format!("{acc:.2}"), "97.40");
        assert!(matches!(accuracy(&[1], &[1, 2]), Err(Error::Shape(_))));
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[5.0, 5.0, 5.0]).unwrap(), (5.0, 0.0));
        let (m, s) = mean_std(&[0.0, 10.0]).unwrap();
        assert_eq!(m, 5.0);
        assert_eq!(s, 5.0);
        assert!(mean_std(&[1.0]).is_err());
    }

    #[test]
    fn contingency_examples() {
        let t = mcnemar_contingency(&[1, 2, 3], &[1, 2, 3], &[1, 0, 3]).unwrap();
        assert_eq!((t.b, t.c), (0, 0));
        let t = mcnemar_contingency(&[0, 1, 2, 3], &[1, 2, 3, 0], &[0, 1, 2, 3]).unwrap();
        assert_eq!((t.b, t.c), (4, 0));
        // a: 0,1  b: 2  c: 3,4  d: 5
        let truth = [0, 1, 2, 0, 1, 2];
        let p1 = [0, 1, 2, 1, 2, 0];
        let p2 = [0, 1, 0, 0, 1, 1];
        let t = mcnemar_contingency(&p1, &p2, &truth).unwrap();
        assert_eq!((t.a, t.b, t.c, t.d), (2, 1, 2, 1));
        assert_eq!(t.total(), 6);
    }

    #[test]
    fn exact_p_examples() {
        for k in [0, 1, 5, 17] {
            assert_eq!(mcnemar_exact_p(k, k), 1.0);
        }
        assert_eq!(mcnemar_exact_p(0, 2), 0.5);
        assert_eq!(mcnemar_exact_p(1, 9), 0.021484375);
    }

    #[test]
    fn large_n_paths_agree() {
        // both branches near the switch-over
        let exact = mcnemar_exact_p(40, 80);
        let n = 120f64;
        assert!(exact > 0.0 && exact < 1e-3, "{exact} for n={n}");
        let big = mcnemar_exact_p(60, 61);
        assert!((big - 1.0).abs() < 1e-9);
        let tiny = mcnemar_exact_p(0, 400);
        assert!(tiny > 0.0 && tiny < 1e-100);
    }

    #[test]
    fn chi_square_variant() {
        assert_eq!(mcnemar_chi2_p(0, 0), 1.0);
        // (|10 - 30| - 1)^2 / 40 = 9.025, upper tail of chi2(1) ~ 0.00266
        assert!((mcnemar_chi2_p(10, 30) - 0.002663).abs() < 1e-5);
        assert_eq!(McNemarMethod::ChiSquareAbove25.p_value(1, 9), mcnemar_exact_p(1, 9));
    }

    #[test]
    fn verdict_bands() {
        assert_eq!(classify_significance(0.5).unwrap(), Verdict::NotSignificant);
        assert_eq!(classify_significance(0.03).unwrap(), Verdict::Significant);
        assert_eq!(classify_significance(0.05).unwrap(), Verdict::Significant);
        assert_eq!(classify_significance(0.01).unwrap(), Verdict::Significant);
        assert_eq!(classify_significance(0.001).unwrap(), Verdict::HighlySignificant);
        assert!(matches!(classify_significance(1.5), Err(Error::Domain(_))));
        assert!(classify_significance(-0.1).is_err());
    }

    #[test]
    fn kfold_exact_divisibility() {
        let labels: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let folds = stratified_kfold(&labels, 5, 42).unwrap();
        for f in &folds {
            assert_eq!(f.test.len(), 4);
            assert_eq!(f.test.iter().filter(|&&i| labels[i] == 0).count(), 2);
        }
        assert_eq!(folds, stratified_kfold(&labels, 5, 42).unwrap());
    }

    #[test]
    fn kfold_uneven_classes() {
        let labels: Vec<u8> = std::iter::repeat_n(0, 7).chain(std::iter::repeat_n(1, 9)).collect();
        let folds = stratified_kfold(&labels, 5, 3).unwrap();
        for class in [0u8, 1] {
            let counts: Vec<usize> = folds
                .iter()
                .map(|f| f.test.iter().filter(|&&i| labels[i] == class).count())
                .collect();
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(hi - lo <= 1, "class {class}: {counts:?}");
        }
    }

    #[test]
    fn kfold_names_short_class() {
        let labels = ["a", "a", "a", "b"];
        let err = stratified_kfold(&labels, 2, 0).unwrap_err();
        assert!(matches!(err, Error::Stratification(ref m) if m.contains("class b")));
        assert!(stratified_kfold(&labels, 1, 0).is_err());
    }

    #[test]
    fn validation_is_carved_from_train() {
        let labels: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        for f in stratified_kfold(&labels, 5, 1).unwrap() {
            assert_eq!(f.val.len(), 8);
            assert_eq!(f.train.len(), 72);
            assert!(f.val.iter().all(|i| f.train.binary_search(i).is_err()));
            assert!(f.val.iter().all(|i| f.test.binary_search(i).is_err()));
        }
    }

    #[test]
    fn fold_csv_round_trip() {
        let labels: Vec<u8> = (0..12).map(|i| (i % 3) as u8).collect();
        let ids: Vec<String> = (0..12).map(|i| format!("vid{i:02}")).collect();
        let folds = stratified_kfold(&labels, 3, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("folds.csv");
        write_fold_csv(&path, &folds, &ids).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("sample_id,fold,split\n"));
        let back = read_fold_csv(&path, &ids).unwrap();
        for (a, b) in folds.iter().zip(&back) {
            assert_eq!((&a.train, &a.val, &a.test), (&b.train, &b.val, &b.test));
        }
    }
}
