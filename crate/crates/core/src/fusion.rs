//! Late fusion of per-modality class probabilities.
//!
//! A [`ProbabilityMatrix`] holds one probability column per sample. The
//! product rule multiplies modality matrices elementwise, the sum rule adds
//! them; neither renormalizes, since the argmax decision is unaffected.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::ops::Deref;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries are raised to this value before the product rule multiplies them,
/// so a single zero cannot veto a class on its own.
pub const DEFAULT_PRODUCT_FLOOR: f64 = 1e-12;

/// Tolerance on column sums for matrices that claim to be distributions.
pub const COLUMN_SUM_TOL: f64 = 1e-9;

/// `C x N` non-negative scores stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMatrix {
    class_ids: Vec<String>,
    sample_ids: Vec<String>,
    scores: Vec<f64>,
}

impl ProbabilityMatrix {
    pub fn from_columns(class_ids: Vec<String>, sample_ids: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let c = class_ids.len();
        if c == 0 {
            return Err(Error::InvalidInput("a probability matrix needs at least one class".into()));
        }
        if columns.len() != sample_ids.len() {
            return Err(Error::Shape(format!(
                "{} columns for {} sample ids",
                columns.len(),
                sample_ids.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = sample_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::InvalidInput(format!("duplicate sample id {dup:?}")));
        }
        let mut scores = Vec::with_capacity(c * columns.len());
        for (n, col) in columns.into_iter().enumerate() {
            if col.len() != c {
                return Err(Error::Shape(format!(
                    "sample {:?} has {} scores for {c} classes",
                    sample_ids[n],
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "sample {:?} has negative or non-finite scores",
                    sample_ids[n]
                )));
            }
            scores.extend(col);
        }
        Ok(Self {
            class_ids,
            sample_ids,
            scores,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn num_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn class_ids(&self) -> &[String] {
        &self.class_ids
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn get(&self, class: usize, sample: usize) -> f64 {
        self.scores[sample * self.num_classes() + class]
    }

    pub fn column(&self, sample: usize) -> &[f64] {
        let c = self.num_classes();
        &self.scores[sample * c..(sample + 1) * c]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.scores.chunks_exact(self.num_classes())
    }

    /// Checks that every column sums to one within `tol`.
    pub fn check_distribution(&self, tol: f64) -> Result<()> {
        for (n, col) in self.columns().enumerate() {
            let s: f64 = col.iter().sum();
            if (s - 1.0).abs() > tol {
                return Err(Error::InvalidInput(format!(
                    "column {:?} sums to {s}, not 1",
                    self.sample_ids[n]
                )));
            }
        }
        Ok(())
    }

    pub fn with_sample_ids(mut self, sample_ids: Vec<String>) -> Result<Self> {
        if sample_ids.len() != self.num_samples() {
            return Err(Error::Shape(format!(
                "{} ids for {} samples",
                sample_ids.len(),
                self.num_samples()
            )));
        }
        let columns: Vec<Vec<f64>> = self.columns().map(<[f64]>::to_vec).collect();
        self.sample_ids = sample_ids;
        Self::from_columns(self.class_ids, self.sample_ids, columns)
    }

    pub fn with_class_ids(mut self, class_ids: Vec<String>) -> Result<Self> {
        if class_ids.len() != self.num_classes() {
            return Err(Error::Shape(format!(
                "{} class ids for {} classes",
                class_ids.len(),
                self.num_classes()
            )));
        }
        self.class_ids = class_ids;
        Ok(self)
    }

    /// Sub-matrix with the listed samples, in the listed order.
    pub fn select(&self, sample_ids: &[String]) -> Result<Self> {
        let columns = sample_ids
            .iter()
            .map(|id| {
                self.sample_ids
                    .iter()
                    .position(|s| s == id)
                    .map(|n| self.column(n).to_vec())
                    .ok_or_else(|| Error::Alignment(format!("sample {id:?} not in matrix")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_columns(self.class_ids.clone(), sample_ids.to_vec(), columns)
    }

    /// Columns scaled to sum to one; for display only.
    pub fn normalized(&self) -> Self {
        let columns = self
            .columns()
            .map(|col| {
                let s: f64 = col.iter().sum();
                if s > 0.0 {
                    col.iter().map(|v| v / s).collect()
                } else {
                    col.to_vec()
                }
            })
            .collect();
        Self::from_columns(self.class_ids.clone(), self.sample_ids.clone(), columns)
            .expect("normalizing keeps entries finite and non-negative")
    }

    /// CSV text: header `sample_id,<class ids>`, one row per sample, values
    /// in 17-significant-digit scientific notation.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("sample_id");
        for c in &self.class_ids {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (id, col) in self.sample_ids.iter().zip(self.columns()) {
            out.push_str(id);
            for v in col {
                out.push(',');
                out.push_str(&format!("{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(text: &str) -> std::result::Result<Self, String> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| e.to_string())?.clone();
        if headers.get(0) != Some("sample_id") {
            return Err("first column must be sample_id".into());
        }
        let class_ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut sample_ids = Vec::new();
        let mut columns = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| e.to_string())?;
            sample_ids.push(record[0].to_string());
            let col = record
                .iter()
                .skip(1)
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| format!("row {}: {e}", line + 2))?;
            columns.push(col);
        }
        Self::from_columns(class_ids, sample_ids, columns).map_err(|e| e.to_string())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text).map_err(|reason| Error::format(path, reason))
    }
}

/// Predicted class index per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionVector(Vec<usize>);

impl PredictionVector {
    pub fn new(classes: Vec<usize>) -> Self {
        Self(classes)
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl Deref for PredictionVector {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

/// Per-class mean of the frame probability vectors of one video.
pub fn average_frame_probs(frames: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidInput("no frame probabilities to average".into()))?;
    let c = first.len();
    let mut mean = vec![0.0; c];
    for (i, f) in frames.iter().enumerate() {
        if f.len() != c {
            return Err(Error::Shape(format!("frame {i} has {} classes, expected {c}", f.len())));
        }
        let s: f64 = f.iter().sum();
        if (s - 1.0).abs() > COLUMN_SUM_TOL || f.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidInput(format!("frame {i} is not a probability vector")));
        }
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    let n = frames.len() as f64;
    Ok(mean.into_iter().map(|m| m / n).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionRule {
    Product,
    Sum,
}

impl FusionRule {
    pub const ALL: [FusionRule; 2] = [FusionRule::Product, FusionRule::Sum];

    pub fn name(self) -> &'static str {
        match self {
            FusionRule::Product => "product",
            FusionRule::Sum => "sum",
        }
    }

    pub fn fuse(self, matrices: &[&ProbabilityMatrix], product_floor: f64) -> Result<ProbabilityMatrix> {
        match self {
            FusionRule::Product => product_fuse_with_floor(matrices, product_floor),
            FusionRule::Sum => sum_fuse(matrices),
        }
    }
}

impl fmt::Display for FusionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" | "prod" => Ok(FusionRule::Product),
            "sum" => Ok(FusionRule::Sum),
            _ => Err(Error::InvalidConfig(format!("unknown fusion rule {s:?}"))),
        }
    }
}

fn check_aligned(matrices: &[&ProbabilityMatrix]) -> Result<()> {
    if matrices.len() < 2 {
        return Err(Error::Alignment(format!(
            "fusion needs at least two modalities, got {}",
            matrices.len()
        )));
    }
    let first = matrices[0];
    for (i, m) in matrices.iter().enumerate().skip(1) {
        if m.class_ids != first.class_ids {
            return Err(Error::Alignment(format!("matrix {i} has a different class ordering")));
        }
        if m.sample_ids != first.sample_ids {
            return Err(Error::Alignment(format!("matrix {i} has a different sample ordering")));
        }
    }
    Ok(())
}

fn combine(matrices: &[&ProbabilityMatrix], op: impl Fn(f64, f64) -> f64, prep: impl Fn(f64) -> f64) -> Result<ProbabilityMatrix> {
    check_aligned(matrices)?;
    let first = matrices[0];
    let mut scores: Vec<f64> = first.scores.iter().map(|&v| prep(v)).collect();
    for m in &matrices[1..] {
        for (acc, &v) in scores.iter_mut().zip(&m.scores) {
            *acc = op(*acc, prep(v));
        }
    }
    Ok(ProbabilityMatrix {
        class_ids: first.class_ids.clone(),
        sample_ids: first.sample_ids.clone(),
        scores,
    })
}

/// Hadamard product with the default probability floor.
pub fn product_fuse(matrices: &[&ProbabilityMatrix]) -> Result<ProbabilityMatrix> {
    product_fuse_with_floor(matrices, DEFAULT_PRODUCT_FLOOR)
}

/// Hadamard product after raising every entry to at least `floor`
/// (`0.0` gives the plain product).
pub fn product_fuse_with_floor(matrices: &[&ProbabilityMatrix], floor: f64) -> Result<ProbabilityMatrix> {
    if !(floor >= 0.0) {
        return Err(Error::InvalidConfig(format!("product floor {floor} must be >= 0")));
    }
    combine(matrices, |a, b| a * b, |v| v.max(floor))
}

pub fn sum_fuse(matrices: &[&ProbabilityMatrix]) -> Result<ProbabilityMatrix> {
    combine(matrices, |a, b| a + b, |v| v)
}

/// Argmax per column; ties go to the lowest class index.
pub fn predict_classes(matrix: &ProbabilityMatrix) -> Result<PredictionVector> {
    if matrix.num_samples() == 0 {
        return Err(Error::InvalidInput("cannot predict from an empty matrix".into()));
    }
    Ok(PredictionVector(
        matrix
            .columns()
            .map(|col| {
                let mut best = 0;
                for (c, &v) in col.iter().enumerate().skip(1) {
                    if v > col[best] {
                        best = c;
                    }
                }
                best
            })
            .collect(),
    ))
}
