use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{backward, forward, NetworkSpec, ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::fusion::{predict_classes, ProbabilityMatrix};

/// Lower clamp applied to probabilities inside the cross-entropy logarithm.
pub const CE_LOG_FLOOR: f64 = 1e-15;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// One-hot targets, one column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix {
    num_classes: usize,
    labels: Vec<usize>,
    columns: Vec<f64>,
}

impl TargetMatrix {
    pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidInput(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        let mut columns = vec![0.0; labels.len() * num_classes];
        for (n, &l) in labels.iter().enumerate() {
            columns[n * num_classes + l] = 1.0;
        }
        Ok(Self {
            num_classes,
            labels: labels.to_vec(),
            columns,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn column(&self, n: usize) -> &[f64] {
        &self.columns[n * self.num_classes..(n + 1) * self.num_classes]
    }
}

/// Summed cross-entropy `-sum_n ln p_{y_n}(n)`, with the probability clamped
/// below at [`CE_LOG_FLOOR`].
pub fn cross_entropy(probs: &ProbabilityMatrix, targets: &TargetMatrix) -> Result<f64> {
    if probs.num_classes() != targets.num_classes() || probs.num_samples() != targets.num_samples() {
        return Err(Error::Shape(format!(
            "probabilities are {}x{} but targets are {}x{}",
            probs.num_classes(),
            probs.num_samples(),
            targets.num_classes(),
            targets.num_samples()
        )));
    }
    Ok(targets
        .labels()
        .iter()
        .enumerate()
        .map(|(n, &c)| -probs.get(c, n).max(CE_LOG_FLOOR).ln())
        .sum())
}

/// Labelled training samples.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub inputs: Vec<Tensor>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(inputs: Vec<Tensor>, labels: Vec<usize>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Multiplier on the Glorot-uniform bound.
    pub weight_init: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            batch_size: 16,
            epochs: 30,
            seed: 42,
            weight_init: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.weight_init > 0.0) {
            return Err(Error::InvalidConfig("weight_init must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub params: ParamSet,
    /// Mean per-sample cross-entropy seen during each epoch.
    pub loss_history: Vec<f64>,
    /// Accuracy (%) on the validation set after each epoch, when one was given.
    pub val_accuracy: Vec<f64>,
}

/// Summed loss and summed gradient over `indices` of `data`, reduced in
/// index order.
pub fn batch_gradient(
    spec: &NetworkSpec,
    params: &ParamSet,
    data: &Dataset,
    indices: &[usize],
) -> Result<(f64, ParamSet)> {
    let mut total = ParamSet::zeros(spec)?;
    let mut loss = 0.0;
    for &i in indices {
        let label = data.labels[i];
        if label >= spec.num_classes {
            return Err(Error::InvalidInput(format!(
                "label {label} outside [0, {})",
                spec.num_classes
            )));
        }
        let (logits, cache) = forward(spec, params, &data.inputs[i])?;
        let p = softmax(logits.values());
        loss -= p[label].max(CE_LOG_FLOOR).ln();
        let mut target = vec![0.0; spec.num_classes];
        target[label] = 1.0;
        total.add_assign(&backward(spec, params, &cache, &target)?);
    }
    Ok((loss, total))
}

/// `params - learning_rate * grads`, elementwise.
pub fn sgd_step(params: &ParamSet, grads: &ParamSet, learning_rate: f64) -> Result<ParamSet> {
    if !params.same_shape(grads) {
        return Err(Error::Shape("gradient shapes do not match parameters".into()));
    }
    let mut step = grads.clone();
    step.scale_in_place(-learning_rate);
    step.add_assign(params);
    Ok(step)
}

/// Mini-batch SGD on the mean per-sample cross-entropy. Initialization and
/// shuffling draw from a ChaCha8 stream seeded with `cfg.seed`.
pub fn train(spec: &NetworkSpec, data: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    train_with_validation(spec, data, None, cfg)
}

pub fn train_with_validation(
    spec: &NetworkSpec,
    data: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    spec.validate()?;
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if data.inputs.len() != data.labels.len() {
        return Err(Error::Shape("inputs and labels differ in length".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ParamSet::init(spec, &mut rng, cfg.weight_init)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut val_accuracy = Vec::new();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grads) = batch_gradient(spec, &params, data, batch)?;
            epoch_loss += loss;
            params = sgd_step(&params, &grads, cfg.learning_rate / batch.len() as f64)?;
        }
        loss_history.push(epoch_loss / data.len() as f64);

        if let Some(val) = validation.filter(|v| !v.is_empty()) {
            let probs = predict_probs(spec, &params, &val.inputs)?;
            let preds = predict_classes(&probs)?;
            let hits = preds.iter().zip(&val.labels).filter(|(p, t)| p == t).count();
            val_accuracy.push(100.0 * hits as f64 / val.len() as f64);
        }
    }

    Ok(TrainReport {
        params,
        loss_history,
        val_accuracy,
    })
}

/// Softmax outputs for each sample, one column per sample in input order.
/// Class ids are `"0".."C-1"` and sample ids the input positions.
pub fn predict_probs(spec: &NetworkSpec, params: &ParamSet, samples: &[Tensor]) -> Result<ProbabilityMatrix> {
    let columns = samples
        .iter()
        .map(|x| forward(spec, params, x).map(|(logits, _)| softmax(logits.values())))
        .collect::<Result<Vec<_>>>()?;
    ProbabilityMatrix::from_columns(
        (0..spec.num_classes).map(|c| c.to_string()).collect(),
        (0..samples.len()).map(|n| n.to_string()).collect(),
        columns,
    )
}
