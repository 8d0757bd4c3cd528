//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::f64::consts::PI;

use camid::netcore::{batch_gradient, forward, softmax, Dataset, NetworkSpec, ParamSet, Tensor};
use camid::spectro::Spectrogram;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()).collect()
}

/// Per-frame DFT magnitudes by direct summation, bins `0..=n/2`.
pub fn naive_stft(x: &[f64], n: usize, hop: usize, window: &[f64]) -> Vec<Vec<f64>> {
    let frames = (x.len() - n) / hop + 1;
    // twiddle table indexed by (f * i) mod n keeps the phase argument exact
    let cos: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).cos()).collect();
    let sin: Vec<f64> = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).sin()).collect();
    (0..frames)
        .map(|t| {
            let seg: Vec<f64> = (0..n).map(|i| x[t * hop + i] * window[i]).collect();
            (0..=n / 2)
                .map(|f| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (i, v) in seg.iter().enumerate() {
                        let k = (f * i) % n;
                        re += v * cos[k];
                        im -= v * sin[k];
                    }
                    re.hypot(im)
                })
                .collect()
        })
        .collect()
}

/// Corner-aligned linear interpolation of `rows` (each a frame) to `target`
/// rows.
pub fn resample_rows(rows: &[Vec<f64>], target: usize) -> Vec<Vec<f64>> {
    let t = rows.len();
    (0..target)
        .map(|j| {
            if t == 1 || target == 1 {
                return rows[0].clone();
            }
            let pos = j as f64 * (t - 1) as f64 / (target - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(t - 1);
            let w = pos - lo as f64;
            rows[lo].iter().zip(&rows[hi]).map(|(a, b)| a * (1.0 - w) + b * w).collect()
        })
        .collect()
}

/// Histogram of popcounts over all `2^n` outcome bitmasks.
pub fn popcount_histogram(n: u32) -> Vec<u64> {
    let mut h = vec![0u64; n as usize + 1];
    for mask in 0u64..(1u64 << n) {
        h[mask.count_ones() as usize] += 1;
    }
    h
}

/// Two-sided exact McNemar p from an enumerated outcome histogram: twice the
/// share of outcomes at least as extreme as `min(b, c)`, capped at 1.
pub fn mcnemar_by_enumeration(hist: &[u64], b: usize, c: usize) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let tail: u64 = hist[..=b.min(c)].iter().sum();
    (2.0 * tail as f64 / (1u64 << n) as f64).min(1.0)
}

/// Random `C x N` probability columns, each summing to one.
pub fn random_columns(rng: &mut impl Rng, classes: usize, samples: usize) -> Vec<Vec<f64>> {
    (0..samples)
        .map(|_| {
            let raw: Vec<f64> = (0..classes).map(|_| rng.random_range(1e-3..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

pub fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Lowest index among the maxima.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Worst per-bin error relative to the largest oracle magnitude in its frame.
pub fn max_frame_error(spec: &Spectrogram, oracle: &[Vec<f64>]) -> f64 {
    assert_eq!(spec.num_frames(), oracle.len());
    let mut worst: f64 = 0.0;
    for (t, want) in oracle.iter().enumerate() {
        let scale = want.iter().fold(0.0f64, |m, v| m.max(*v));
        for (got, w) in spec.frame(t).iter().zip(want) {
            let err = (got - w).abs();
            worst = worst.max(if scale > 0.0 { err / scale } else { err });
        }
    }
    worst
}

/// Glorot-initialized parameters with small random biases.
pub fn random_params(spec: &NetworkSpec, seed: u64) -> ParamSet {
    let mut rng = rng(seed);
    let mut p = ParamSet::init(spec, &mut rng, 1.0).unwrap();
    // non-zero biases so their gradients are exercised too
    for layer in p.layers_mut() {
        for b in layer.bias.values_mut() {
            *b = rng.random_range(-0.1..0.1);
        }
    }
    p
}

pub fn random_input(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn sample_loss(spec: &NetworkSpec, params: &ParamSet, x: &Tensor, label: usize) -> f64 {
    let (logits, _) = forward(spec, params, x).unwrap();
    -softmax(logits.values())[label].ln()
}

/// Central differences (step 1e-5) on every parameter of a two-sample batch.
/// Returns the parameter count, the worst relative error among entries whose
/// absolute error exceeds 1e-8, the worst absolute error and the largest
/// gradient magnitude.
pub fn gradient_check(spec: &NetworkSpec, seed: u64) -> (usize, f64, f64, f64) {
    let mut rng = rng(seed);
    let params = random_params(spec, seed);
    let data = Dataset::new(
        (0..2).map(|_| random_input(&spec.input_shape, &mut rng)).collect(),
        (0..2).map(|_| rng.random_range(0..spec.num_classes)).collect(),
    )
    .unwrap();
    let (_, grad) = batch_gradient(spec, &params, &data, &[0, 1]).unwrap();
    let analytic: Vec<f64> = grad.iter_values().collect();
    let h = 1e-5;
    let total = |p: &ParamSet| -> f64 {
        (0..2).map(|i| sample_loss(spec, p, &data.inputs[i], data.labels[i])).sum()
    };
    let (mut worst, mut worst_abs, mut largest) = (0.0f64, 0.0f64, 0.0f64);
    for (idx, &g) in analytic.iter().enumerate() {
        let mut plus = params.clone();
        *plus.value_mut(idx).unwrap() += h;
        let mut minus = params.clone();
        *minus.value_mut(idx).unwrap() -= h;
        let fd = (total(&plus) - total(&minus)) / (2.0 * h);
        let abs = (fd - g).abs();
        worst_abs = worst_abs.max(abs);
        largest = largest.max(g.abs());
        if abs > 1e-8 {
            worst = worst.max(abs / fd.abs().max(g.abs()));
        }
    }
    (analytic.len(), worst, worst_abs, largest)
}
