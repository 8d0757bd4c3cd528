//! Product- and sum-rule fusion of two modality probability matrices,
//! including per-video averaging of frame probabilities.
//!
//!     cargo run --release --example late_fusion

use camid::fusion::{average_frame_probs, predict_classes, product_fuse, sum_fuse, ProbabilityMatrix};

fn main() -> camid::Result<()> {
    let classes = vec!["0".to_string(), "1".into(), "2".into()];
    let videos = vec!["v1".to_string(), "v2".into(), "v3".into()];

    // visual: the mean of each video's frame probabilities
    let frames = [
        vec![vec![0.6, 0.3, 0.1], vec![0.5, 0.4, 0.1], vec![0.7, 0.2, 0.1]],
        vec![vec![0.2, 0.5, 0.3], vec![0.3, 0.3, 0.4]],
        vec![vec![0.1, 0.1, 0.8]],
    ];
    let visual_cols = frames.iter().map(|f| average_frame_probs(f)).collect::<camid::Result<Vec<_>>>()?;
    let visual = ProbabilityMatrix::from_columns(classes.clone(), videos.clone(), visual_cols)?;
    let audio = ProbabilityMatrix::from_columns(
        classes,
        videos,
        vec![vec![0.3, 0.6, 0.1], vec![0.1, 0.8, 0.1], vec![0.2, 0.2, 0.6]],
    )?;

    let product = product_fuse(&[&visual, &audio])?;
    let sum = sum_fuse(&[&visual, &audio])?;
    for (name, m) in [("visual", &visual), ("audio", &audio), ("product", &product), ("sum", &sum)] {
        println!("{name:>8}: predictions {:?}", &*predict_classes(m)?);
    }
    println!("\nproduct rule scores (not renormalized):\n{}", product.to_csv_string());
    println!("normalized for display:\n{}", product.normalized().to_csv_string());
    Ok(())
}
