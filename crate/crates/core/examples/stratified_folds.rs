//! Stratified five-fold assignment with per-class validation carve-out,
//! written as a fold CSV.
//!
//!     cargo run --release --example stratified_folds

use camid::evalstat::{stratified_kfold, write_fold_csv};

fn main() -> camid::Result<()> {
    let labels: Vec<String> = [("native", 0, 9), ("native", 1, 7), ("youtube", 0, 12)]
        .iter()
        .flat_map(|&(cat, class, n)| std::iter::repeat_n(format!("{cat}/class {class}"), n))
        .collect();
    let folds = stratified_kfold(&labels, 5, 42)?;
    for f in &folds {
        println!(
            "fold {}: train {:>2}, val {}, test {} {:?}",
            f.fold_index,
            f.train.len(),
            f.val.len(),
            f.test.len(),
            f.test
        );
    }
    let ids: Vec<String> = (0..labels.len()).map(|i| format!("video{i:02}")).collect();
    let path = std::env::temp_dir().join("camid_folds.csv");
    write_fold_csv(&path, &folds, &ids)?;
    println!("wrote {}", path.display());

    // a class with fewer samples than folds is rejected up front
    let short = ["a", "a", "a", "b"];
    if let Err(e) = stratified_kfold(&short, 3, 42) {
        println!("{e}");
    }
    Ok(())
}
