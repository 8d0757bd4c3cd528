//! Paired McNemar comparison of two classifiers, with the exact binomial
//! p-value and its significance band.
//!
//!     cargo run --release --example mcnemar_significance

use camid::evalstat::{accuracy, mcnemar_chi2_p, mcnemar_exact_p, mcnemar_test, McNemarMethod};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> camid::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let truth: Vec<usize> = (0..77).map(|i| i % 5).collect();
    // a weaker visual classifier and a stronger fused one
    let noisy = |rng: &mut ChaCha8Rng, err: f64| -> Vec<usize> {
        truth.iter().map(|&t| if rng.random_bool(err) { (t + 1) % 5 } else { t }).collect()
    };
    let visual = noisy(&mut rng, 0.12);
    let fused = noisy(&mut rng, 0.02);
    println!("visual {:.2}%, fused {:.2}%", accuracy(&visual, &truth)?, accuracy(&fused, &truth)?);
    let r = mcnemar_test(&visual, &fused, &truth, McNemarMethod::Exact)?;
    println!("contingency {:?}", r.table);
    println!("exact p = {:.6}: {}", r.p_value, r.verdict);

    println!("\nvalue patterns:");
    for (b, c) in [(0, 0), (3, 3), (0, 2), (1, 9), (2, 12)] {
        println!("  b={b:>2} c={c:>2}  exact {:.6}  chi-square {:.6}", mcnemar_exact_p(b, c), mcnemar_chi2_p(b, c));
    }
    Ok(())
}
