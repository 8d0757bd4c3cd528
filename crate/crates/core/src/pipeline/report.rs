use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::manifest::Category;
use crate::error::{Error, Result};
use crate::evalstat::{classify_significance, mean_std, Verdict};

/// Classifier whose per-fold accuracy is tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    Visual,
    Audio,
    Product,
    Sum,
}

impl Condition {
    pub const ALL: [Condition; 4] = [Condition::Visual, Condition::Audio, Condition::Product, Condition::Sum];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Visual => "visual",
            Condition::Audio => "audio",
            Condition::Product => "product",
            Condition::Sum => "sum",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Condition::Visual => "Visual",
            Condition::Audio => "Audio",
            Condition::Product => "Product Rule",
            Condition::Sum => "Sum Rule",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Condition::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Paired classifier comparison fed to McNemar's test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Comparison {
    ProductVsSum,
    VisualVsProduct,
    AudioVsProduct,
}

impl Comparison {
    pub const ALL: [Comparison; 3] = [
        Comparison::ProductVsSum,
        Comparison::VisualVsProduct,
        Comparison::AudioVsProduct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Comparison::ProductVsSum => "product_vs_sum",
            Comparison::VisualVsProduct => "visual_vs_product",
            Comparison::AudioVsProduct => "audio_vs_product",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Comparison::ProductVsSum => "Product vs Sum",
            Comparison::VisualVsProduct => "Visual vs Product",
            Comparison::AudioVsProduct => "Audio vs Product",
        }
    }

    /// The two classifiers compared, as (first, second).
    pub fn pair(self) -> (Condition, Condition) {
        match self {
            Comparison::ProductVsSum => (Condition::Product, Condition::Sum),
            Comparison::VisualVsProduct => (Condition::Visual, Condition::Product),
            Comparison::AudioVsProduct => (Condition::Audio, Condition::Product),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Comparison::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRecord {
    pub fold: usize,
    pub category: Category,
    pub condition: Condition,
    pub correct: usize,
    pub total: usize,
}

impl AccuracyRecord {
    pub fn accuracy(&self) -> f64 {
        100.0 * self.correct as f64 / self.total as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceRecord {
    pub fold: usize,
    pub category: Category,
    pub comparison: Comparison,
    pub b: u64,
    pub c: u64,
    pub p_value: f64,
    pub verdict: Verdict,
}

/// Six significant digits; scientific notation below 1e-3 so small values
/// never collapse to zero.
pub fn format_p(p: f64) -> String {
    if p == 0.0 || p >= 1e-3 {
        let digits = if p == 0.0 { 5 } else { (5 - p.log10().floor() as i32).max(0) as usize };
        format!("{p:.digits$}")
    } else {
        format!("{p:.5e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    /// Accuracy in percent; the table carries a recomputed `Mean ± StD` row.
    Accuracy,
    PValue,
}

/// Fold rows by `group x category` columns, in the layout of the published
/// tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub title: String,
    pub kind: CellKind,
    pub groups: Vec<String>,
    pub categories: Vec<Category>,
    pub row_labels: Vec<String>,
    /// `rows x (groups * categories)`, group-major.
    pub values: Vec<Vec<f64>>,
}

pub const SUMMARY_LABEL: &str = "Mean ± StD";

impl ReportTable {
    pub fn num_columns(&self) -> usize {
        self.groups.len() * self.categories.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.groups
            .iter()
            .flat_map(|g| {
                self.categories
                    .iter()
                    .map(move |c| format!("{}/{}", g.to_lowercase().replace(' ', "_"), c))
            })
            .collect()
    }

    fn check(&self) -> Result<()> {
        let n = self.num_columns();
        if self.values.len() != self.row_labels.len() || self.values.iter().any(|r| r.len() != n) {
            return Err(Error::Shape(format!("report table {:?} is ragged", self.title)));
        }
        Ok(())
    }

    /// Mean and sample standard deviation of every column over the fold rows,
    /// computed fresh on each call.
    pub fn summary(&self) -> Result<Vec<(f64, f64)>> {
        self.check()?;
        (0..self.num_columns())
            .map(|j| mean_std(&self.values.iter().map(|r| r[j]).collect::<Vec<_>>()))
            .collect()
    }

    fn cell(&self, v: f64) -> String {
        match self.kind {
            CellKind::Accuracy => format!("{v}"),
            CellKind::PValue => format_p(v),
        }
    }

    pub fn to_csv_string(&self) -> Result<String> {
        self.check()?;
        let mut out = String::from("fold");
        for name in self.column_names() {
            write!(out, ",{name}").unwrap();
        }
        out.push('\n');
        for (label, row) in self.row_labels.iter().zip(&self.values) {
            out.push_str(label);
            for &v in row {
                write!(out, ",{}", self.cell(v)).unwrap();
            }
            out.push('\n');
        }
        if self.kind == CellKind::Accuracy {
            out.push_str(SUMMARY_LABEL);
            for (m, s) in self.summary()? {
                write!(out, ",{m} ± {s}").unwrap();
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn to_markdown(&self) -> Result<String> {
        self.check()?;
        let mut out = format!("### {}\n\n|  |", self.title);
        for g in &self.groups {
            for c in &self.categories {
                write!(out, " {} {} |", g, c.title()).unwrap();
            }
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(self.num_columns()));
        out.push('\n');
        for (label, row) in self.row_labels.iter().zip(&self.values) {
            write!(out, "| {label} |").unwrap();
            for &v in row {
                let cell = match self.kind {
                    CellKind::Accuracy => format!("{v:.2}"),
                    CellKind::PValue => format_p(v),
                };
                write!(out, " {cell} |").unwrap();
            }
            out.push('\n');
        }
        if self.kind == CellKind::Accuracy {
            write!(out, "| {SUMMARY_LABEL} |").unwrap();
            for (m, s) in self.summary()? {
                write!(out, " {m:.2} ± {s:.2} |").unwrap();
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// Parses a table written by [`ReportTable::to_csv_string`]. Returns the fold
/// rows and, for accuracy tables, the stored summary row.
pub fn parse_table_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>, Option<Vec<(f64, f64)>>)> {
    let bad = |m: String| Error::InvalidInput(format!("report table: {m}"));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty".into()))?.split(',').collect();
    let (mut rows, mut summary) = (Vec::new(), None);
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(bad(format!("row {:?} has {} cells, header {}", cells[0], cells.len(), header.len())));
        }
        if cells[0] == SUMMARY_LABEL {
            let parsed = cells[1..]
                .iter()
                .map(|c| {
                    let (m, s) = c.split_once(" ± ").ok_or_else(|| bad(format!("bad summary cell {c:?}")))?;
                    Ok((m.parse().map_err(|_| bad(c.to_string()))?, s.parse().map_err(|_| bad(c.to_string()))?))
                })
                .collect::<Result<Vec<_>>>()?;
            summary = Some(parsed);
        } else {
            let vals = cells[1..]
                .iter()
                .map(|c| c.parse::<f64>().map_err(|_| bad(format!("bad cell {c:?}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push((cells[0].to_string(), vals));
        }
    }
    let (labels, values) = rows.into_iter().unzip();
    Ok((labels, values, summary))
}

/// Mean accuracy per category for one classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionMeans {
    pub condition: String,
    pub categories: Vec<String>,
    pub means: Vec<f64>,
}

impl ConditionMeans {
    pub fn new(condition: impl Into<String>, entries: &[(&str, f64)]) -> Self {
        Self {
            condition: condition.into(),
            categories: entries.iter().map(|(c, _)| c.to_string()).collect(),
            means: entries.iter().map(|&(_, m)| m).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Improvement {
    pub fused: String,
    pub baseline: String,
    pub category: String,
    pub fused_mean: f64,
    pub baseline_mean: f64,
    /// `fused_mean - baseline_mean`, in percentage points.
    pub delta: f64,
}

/// Gain of every fused rule over every unimodal baseline, per category.
pub fn improvement_report(unimodal: &[ConditionMeans], fused: &[ConditionMeans]) -> Result<Vec<Improvement>> {
    let reference = unimodal
        .first()
        .or(fused.first())
        .ok_or_else(|| Error::InvalidInput("no means to compare".into()))?;
    for m in unimodal.iter().chain(fused) {
        if m.categories != reference.categories || m.means.len() != m.categories.len() {
            return Err(Error::Alignment(format!(
                "{} covers categories {:?} but {} covers {:?}",
                m.condition, m.categories, reference.condition, reference.categories
            )));
        }
    }
    let mut out = Vec::new();
    for f in fused {
        for u in unimodal {
            for (i, cat) in f.categories.iter().enumerate() {
                out.push(Improvement {
                    fused: f.condition.clone(),
                    baseline: u.condition.clone(),
                    category: cat.clone(),
                    fused_mean: f.means[i],
                    baseline_mean: u.means[i],
                    delta: f.means[i] - u.means[i],
                });
            }
        }
    }
    Ok(out)
}

/// Arithmetic mean of per-category means.
pub fn cross_category_mean(means: &[f64]) -> Result<f64> {
    if means.is_empty() {
        return Err(Error::InvalidInput("cross-category mean of no categories".into()));
    }
    Ok(means.iter().sum::<f64>() / means.len() as f64)
}

/// Mean of per-category means weighted by the number of test samples in
/// each category.
pub fn cross_category_weighted_mean(means: &[f64], counts: &[usize]) -> Result<f64> {
    if means.is_empty() || means.len() != counts.len() {
        return Err(Error::InvalidInput(format!(
            "{} means but {} sample counts",
            means.len(),
            counts.len()
        )));
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidInput("all category sample counts are zero".into()));
    }
    Ok(means.iter().zip(counts).map(|(m, &n)| m * n as f64).sum::<f64>() / total as f64)
}

pub fn accuracy_csv(records: &[AccuracyRecord]) -> String {
    let mut out = String::from("fold,category,condition,correct,total,accuracy\n");
    for r in records {
        writeln!(out, "{},{},{},{},{},{}", r.fold, r.category, r.condition.name(), r.correct, r.total, r.accuracy()).unwrap();
    }
    out
}

pub fn parse_accuracy_csv(text: &str) -> Result<Vec<AccuracyRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = || Error::InvalidInput(format!("accuracy CSV line {}: {line:?}", i + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(bad());
        }
        out.push(AccuracyRecord {
            fold: f[0].parse().map_err(|_| bad())?,
            category: f[1].parse().map_err(|_| bad())?,
            condition: Condition::parse(f[2]).ok_or_else(bad)?,
            correct: f[3].parse().map_err(|_| bad())?,
            total: f[4].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

pub fn significance_csv(records: &[SignificanceRecord]) -> String {
    let mut out = String::from("fold,category,comparison,b,c,p_value,verdict\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.fold,
            r.category,
            r.comparison.name(),
            r.b,
            r.c,
            format_p(r.p_value),
            r.verdict
        )
        .unwrap();
    }
    out
}

pub fn parse_significance_csv(text: &str) -> Result<Vec<SignificanceRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let bad = || Error::InvalidInput(format!("significance CSV line {}: {line:?}", i + 1));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad());
        }
        let p_value: f64 = f[5].parse().map_err(|_| bad())?;
        out.push(SignificanceRecord {
            fold: f[0].parse().map_err(|_| bad())?,
            category: f[1].parse().map_err(|_| bad())?,
            comparison: Comparison::parse(f[2]).ok_or_else(bad)?,
            b: f[3].parse().map_err(|_| bad())?,
            c: f[4].parse().map_err(|_| bad())?,
            p_value,
            verdict: classify_significance(p_value)?,
        });
    }
    Ok(out)
}

fn fold_labels(folds: usize) -> Vec<String> {
    (0..folds).map(|f| format!("Fold {f}")).collect()
}

fn num_folds<T>(records: &[T], fold: impl Fn(&T) -> usize) -> Result<usize> {
    let n = records.iter().map(&fold).max().map(|m| m + 1).unwrap_or(0);
    if n < 2 {
        return Err(Error::InsufficientData("reports need at least two folds".into()));
    }
    Ok(n)
}

pub fn accuracy_table(
    title: &str,
    records: &[AccuracyRecord],
    conditions: &[Condition],
    categories: &[Category],
) -> Result<ReportTable> {
    let folds = num_folds(records, |r| r.fold)?;
    let mut values = vec![Vec::new(); folds];
    for (f, row) in values.iter_mut().enumerate() {
        for &cond in conditions {
            for &cat in categories {
                let rec = records
                    .iter()
                    .find(|r| r.fold == f && r.condition == cond && r.category == cat)
                    .ok_or_else(|| {
                        Error::InsufficientData(format!("no {} accuracy for fold {f}, {cat}", cond.name()))
                    })?;
                row.push(rec.accuracy());
            }
        }
    }
    Ok(ReportTable {
        title: title.into(),
        kind: CellKind::Accuracy,
        groups: conditions.iter().map(|c| c.title().to_string()).collect(),
        categories: categories.to_vec(),
        row_labels: fold_labels(folds),
        values,
    })
}

pub fn p_value_table(
    title: &str,
    records: &[SignificanceRecord],
    comparisons: &[Comparison],
    categories: &[Category],
) -> Result<ReportTable> {
    let folds = num_folds(records, |r| r.fold)?;
    let mut values = vec![Vec::new(); folds];
    for (f, row) in values.iter_mut().enumerate() {
        for &cmp in comparisons {
            for &cat in categories {
                let rec = records
                    .iter()
                    .find(|r| r.fold == f && r.comparison == cmp && r.category == cat)
                    .ok_or_else(|| {
                        Error::InsufficientData(format!("no {} p-value for fold {f}, {cat}", cmp.name()))
                    })?;
                row.push(rec.p_value);
            }
        }
    }
    Ok(ReportTable {
        title: title.into(),
        kind: CellKind::PValue,
        groups: comparisons.iter().map(|c| c.title().to_string()).collect(),
        categories: categories.to_vec(),
        row_labels: fold_labels(folds),
        values,
    })
}

fn condition_means(table: &ReportTable, condition: Condition, group: usize) -> Result<ConditionMeans> {
    let summary = table.summary()?;
    let k = table.categories.len();
    Ok(ConditionMeans {
        condition: condition.name().into(),
        categories: table.categories.iter().map(|c| c.name().to_string()).collect(),
        means: summary[group * k..(group + 1) * k].iter().map(|&(m, _)| m).collect(),
    })
}

/// Writes every report under `reports_dir` from the accuracy and
/// significance records.
pub fn write_reports(
    reports_dir: &Path,
    accuracy: &[AccuracyRecord],
    significance: &[SignificanceRecord],
) -> Result<()> {
    fs::create_dir_all(reports_dir).map_err(|e| Error::io(reports_dir, e))?;
    let mut categories: Vec<Category> = accuracy.iter().map(|r| r.category).collect();
    categories.sort();
    categories.dedup();

    let unimodal = accuracy_table(
        "Accuracy (%) using visual and audio content",
        accuracy,
        &[Condition::Visual, Condition::Audio],
        &categories,
    )?;
    let fusion = accuracy_table(
        "Accuracy (%) using the product and sum rule",
        accuracy,
        &[Condition::Product, Condition::Sum],
        &categories,
    )?;
    let rules = p_value_table(
        "McNemar p-values, product rule vs sum rule",
        significance,
        &[Comparison::ProductVsSum],
        &categories,
    )?;
    let modalities = p_value_table(
        "McNemar p-values, unimodal vs product rule",
        significance,
        &[Comparison::VisualVsProduct, Comparison::AudioVsProduct],
        &categories,
    )?;

    let uni = [condition_means(&unimodal, Condition::Visual, 0)?, condition_means(&unimodal, Condition::Audio, 1)?];
    let fused = [condition_means(&fusion, Condition::Product, 0)?, condition_means(&fusion, Condition::Sum, 1)?];
    let improvements = improvement_report(&uni, &fused)?;

    let mut improvement = String::from("fused,baseline,category,fused_mean,baseline_mean,delta\n");
    for i in &improvements {
        writeln!(
            improvement,
            "{},{},{},{:.2},{:.2},{:+.2}",
            i.fused, i.baseline, i.category, i.fused_mean, i.baseline_mean, i.delta
        )
        .unwrap();
    }

    let counts: Vec<usize> = categories
        .iter()
        .map(|&cat| {
            accuracy
                .iter()
                .filter(|r| r.category == cat && r.condition == Condition::Visual)
                .map(|r| r.total)
                .sum()
        })
        .collect();
    let mut cross = String::from("condition,arithmetic_mean,weighted_mean\n");
    for m in uni.iter().chain(&fused) {
        writeln!(
            cross,
            "{},{:.2},{:.2}",
            m.condition,
            cross_category_mean(&m.means)?,
            cross_category_weighted_mean(&m.means, &counts)?
        )
        .unwrap();
    }

    let write = |name: &str, text: &str| {
        let p = reports_dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("accuracy_unimodal.csv", &unimodal.to_csv_string()?)?;
    write("accuracy_fusion.csv", &fusion.to_csv_string()?)?;
    write("mcnemar_rules.csv", &rules.to_csv_string()?)?;
    write("mcnemar_modalities.csv", &modalities.to_csv_string()?)?;
    write("improvement.csv", &improvement)?;
    write("cross_category.csv", &cross)?;

    let mut md = String::from("# Results\n\n");
    for t in [&unimodal, &fusion, &rules, &modalities] {
        md.push_str(&t.to_markdown()?);
        md.push('\n');
    }
    md.push_str("### Improvement of fused over unimodal mean accuracy (percentage points)\n\n");
    md.push_str("| Rule | Baseline | Category | Fused | Baseline | Delta |\n|---|---|---|---:|---:|---:|\n");
    for i in &improvements {
        writeln!(
            md,
            "| {} | {} | {} | {:.2} | {:.2} | {:+.2} |",
            i.fused, i.baseline, i.category, i.fused_mean, i.baseline_mean, i.delta
        )
        .unwrap();
    }
    md.push_str("\n### Cross-category mean accuracy\n\n| Condition | Arithmetic | Sample-weighted |\n|---|---:|---:|\n");
    for m in uni.iter().chain(&fused) {
        writeln!(
            md,
            "| {} | {:.2} | {:.2} |",
            m.condition,
            cross_category_mean(&m.means)?,
            cross_category_weighted_mean(&m.means, &counts)?
        )
        .unwrap();
    }
    write("tables.md", &md)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_p_keeps_small_values_visible() {
        assert_eq!(format_p(1.0), "1.00000");
        assert_eq!(format_p(0.5), "0.500000");
        assert_eq!(format_p(0.0234375), "0.0234375");
        assert_eq!(format_p(1.9073486328125e-6), "1.90735e-6");
        assert!(format_p(1e-300).starts_with("1.00000e-300"));
    }

    #[test]
    fn summary_row_is_recomputed() {
        let mut t = ReportTable {
            title: "t".into(),
            kind: CellKind::Accuracy,
            groups: vec!["Visual".into()],
            categories: vec![Category::Native],
            row_labels: fold_labels(2),
            values: vec![vec![80.0], vec![90.0]],
        };
        assert_eq!(t.summary().unwrap()[0].0, 85.0);
        t.values[1][0] = 100.0;
        assert_eq!(t.summary().unwrap()[0].0, 90.0);
        let (_, rows, summary) = parse_table_csv(&t.to_csv_string().unwrap()).unwrap();
        assert_eq!(rows, t.values);
        assert_eq!(summary.unwrap(), t.summary().unwrap());
    }

    #[test]
    fn improvement_needs_aligned_categories() {
        let a = ConditionMeans::new("visual", &[("native", 1.0)]);
        let b = ConditionMeans::new("product", &[("youtube", 2.0)]);
        assert!(matches!(improvement_report(&[a], &[b]), Err(Error::Alignment(_))));
    }

    #[test]
    fn cross_category_examples() {
        assert!(cross_category_mean(&[]).is_err());
        assert_eq!(cross_category_mean(&[7.5, 7.5, 7.5]).unwrap(), 7.5);
        assert_eq!(cross_category_weighted_mean(&[50.0, 100.0], &[1, 3]).unwrap(), 87.5);
    }

    #[test]
    fn record_csv_round_trip() {
        let acc = vec![AccuracyRecord {
            fold: 1,
            category: Category::Youtube,
            condition: Condition::Sum,
            correct: 3,
            total: 4,
        }];
        assert_eq!(parse_accuracy_csv(&accuracy_csv(&acc)).unwrap(), acc);
        let sig = vec![SignificanceRecord {
            fold: 0,
            category: Category::Native,
            comparison: Comparison::AudioVsProduct,
            b: 0,
            c: 2,
            p_value: 0.5,
            verdict: Verdict::NotSignificant,
        }];
        let text = significance_csv(&sig);
        assert!(text.contains(",0,2,0.500000,not significant"));
        assert_eq!(parse_significance_csv(&text).unwrap(), sig);
    }
}
