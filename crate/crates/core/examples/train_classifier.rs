//! Trains the compact CNN on a toy image task (which colour channel is
//! brightest) and round-trips the checkpoint.
//!
//!     cargo run --release --example train_classifier

use camid::fusion::predict_classes;
use camid::netcore::{
    predict_probs, read_checkpoint, train_with_validation, Dataset, NetworkSpec, Tensor, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIZE: usize = 12;

fn make(n: usize, rng: &mut ChaCha8Rng) -> camid::Result<Dataset> {
    let (mut inputs, mut labels) = (Vec::new(), Vec::new());
    for i in 0..n {
        let label = i % 3;
        let values = (0..3 * SIZE * SIZE)
            .map(|j| {
                let boost = if j / (SIZE * SIZE) == label { 0.4 } else { 0.0 };
                boost + rng.random_range(0.0..0.6)
            })
            .collect();
        inputs.push(Tensor::new(vec![3, SIZE, SIZE], values)?);
        labels.push(label);
    }
    Dataset::new(inputs, labels)
}

fn main() -> camid::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (train_set, val_set, test_set) = (make(90, &mut rng)?, make(30, &mut rng)?, make(30, &mut rng)?);
    let spec = NetworkSpec::compact([3, SIZE, SIZE], 3, &[4, 8]);
    println!("{} parameters", spec.num_params()?);
    let cfg = TrainConfig {
        learning_rate: 0.1,
        batch_size: 10,
        epochs: 20,
        ..TrainConfig::default()
    };
    let report = train_with_validation(&spec, &train_set, Some(&val_set), &cfg)?;
    for (e, (loss, acc)) in report.loss_history.iter().zip(&report.val_accuracy).enumerate().step_by(4) {
        println!("epoch {e:>2}: loss {loss:.4}, validation accuracy {acc:.1}%");
    }

    let path = std::env::temp_dir().join("camid_toy.nmc");
    camid::netcore::write_checkpoint(&path, &spec, &report.params)?;
    let (spec, params) = read_checkpoint(&path)?;
    let preds = predict_classes(&predict_probs(&spec, &params, &test_set.inputs)?)?;
    let acc = camid::evalstat::accuracy(&preds, &test_set.labels)?;
    println!("test accuracy from {}: {acc:.1}%", path.display());
    Ok(())
}
