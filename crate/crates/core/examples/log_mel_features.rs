//! Three-resolution log-Mel image of a WAV file, or of a synthetic chirp
//! when no path is given.
//!
//!     cargo run --release --example log_mel_features [-- clip.wav]

use std::f64::consts::PI;
use std::path::PathBuf;

use camid::spectro::{read_wav, three_channel_logmel, AudioSignal, LogMelConfig};

fn chirp(sample_rate: u32, secs: f64) -> camid::Result<AudioSignal> {
    let n = (sample_rate as f64 * secs) as usize;
    let (f0, f1) = (200.0, 4000.0);
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            0.5 * (2.0 * PI * (f0 * t + (f1 - f0) * t * t / (2.0 * secs))).sin()
        })
        .collect();
    AudioSignal::new(samples, sample_rate)
}

fn main() -> camid::Result<()> {
    let signal = match std::env::args().nth(1) {
        Some(p) => read_wav(&PathBuf::from(p))?,
        None => chirp(22050, 2.0)?,
    };
    let cfg = LogMelConfig {
        target_frames: Some(128),
        ..LogMelConfig::default()
    };
    let image = three_channel_logmel(&signal, &cfg)?;
    let [c, t, k] = image.shape();
    println!("{:.2} s at {} Hz -> {c} x {t} x {k}", signal.duration_secs(), signal.sample_rate());
    for (ch, stft) in cfg.stft.iter().enumerate() {
        let plane = image.channel(ch);
        let (lo, hi) = plane.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        // strongest band in the middle frame traces the chirp
        let mid = &plane[(t / 2) * k..(t / 2 + 1) * k];
        let peak = mid.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
        println!(
            "channel {ch} (window {:>4}, hop {:>3}): range [{lo:.2}, {hi:.2}], mid-frame peak at mel band {peak}",
            stft.window_size, stft.hop_size
        );
    }
    Ok(())
}
