use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{NetTemplate, RunConfig};
use crate::error::{Error, Result};
use crate::frames::{save_frame, RgbImage};
use crate::netcore::{LayerSpec, TrainConfig};
use crate::spectro::{write_wav_mono16, AudioSignal, LogMelConfig, StftConfig};

/// Shape of the generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub classes: usize,
    pub videos_per_class: usize,
    pub sample_rate: u32,
    pub duration_secs: f64,
    pub snr_db: f64,
    pub frames_per_video: usize,
    pub frame_size: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 5,
            videos_per_class: 50,
            sample_rate: 16_000,
            duration_secs: 1.0,
            snr_db: 10.0,
            frames_per_video: 8,
            frame_size: 48,
            seed: 42,
        }
    }
}

/// Tone frequencies of class `c`, before per-clip jitter.
pub fn class_tones(c: usize) -> [f64; 3] {
    let base = 300.0 * (c + 1) as f64;
    [base, 2.1 * base, 3.3 * base]
}

/// Additive RGB bias of class `c`: a point on a colour circle.
pub fn class_color_bias(c: usize, classes: usize) -> [f64; 3] {
    let angle = 2.0 * PI * c as f64 / classes as f64;
    std::array::from_fn(|j| 0.15 * (angle + 2.0 * PI * j as f64 / 3.0).cos())
}

fn synth_audio(class: usize, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<AudioSignal> {
    let n = (spec.sample_rate as f64 * spec.duration_secs).round() as usize;
    let sr = spec.sample_rate as f64;
    let tones: Vec<(f64, f64, f64)> = class_tones(class)
        .iter()
        .map(|&f| {
            let jitter = rng.random_range(-0.01..=0.01);
            (f * (1.0 + jitter), rng.random_range(0.5..=1.0), rng.random_range(0.0..2.0 * PI))
        })
        .collect();
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            tones.iter().map(|&(f, a, ph)| a * (2.0 * PI * f * t + ph).sin()).sum()
        })
        .collect();
    let power = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let noise_sd = (power / 10f64.powf(spec.snr_db / 10.0)).sqrt();
    let noise = Normal::new(0.0, noise_sd).expect("finite noise level");
    for v in x.iter_mut() {
        *v += noise.sample(rng);
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for v in x.iter_mut() {
        *v *= 0.5 / peak;
    }
    AudioSignal::new(x, spec.sample_rate)
}

fn synth_frames(class: usize, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<Vec<RgbImage>> {
    let s = spec.frame_size;
    let bias = class_color_bias(class, spec.classes);
    let brightness = rng.random_range(-0.1..=0.1);
    // Per-video scene: a gray gradient in a random direction.
    let (gx, gy) = (rng.random_range(-0.2..=0.2), rng.random_range(-0.2..=0.2));
    let noise = Normal::new(0.0, 0.2).expect("valid sd");
    (0..spec.frames_per_video)
        .map(|_| {
            let mut px = Vec::with_capacity(s * s * 3);
            for y in 0..s {
                for x in 0..s {
                    let scene = 0.5 + gx * (x as f64 / s as f64 - 0.5) + gy * (y as f64 / s as f64 - 0.5);
                    for b in bias {
                        px.push((scene + b + brightness + noise.sample(rng)).clamp(0.0, 1.0));
                    }
                }
            }
            RgbImage::new(s, s, px)
        })
        .collect()
}

/// Run configuration sized for the synthetic dataset.
pub fn fixture_config(spec: &SynthSpec) -> RunConfig {
    let conv = |out_channels| LayerSpec::Conv2d {
        out_channels,
        kernel: 3,
        stride: 1,
        padding: 1,
    };
    RunConfig {
        sample_rate: spec.sample_rate,
        logmel: LogMelConfig {
            stft: [
                StftConfig::new(256, 128, Default::default()).expect("valid"),
                StftConfig::new(512, 256, Default::default()).expect("valid"),
                StftConfig::new(1024, 512, Default::default()).expect("valid"),
            ],
            num_mels: 32,
            target_frames: Some(16),
            ..LogMelConfig::default()
        },
        standardize_audio: true,
        frame_size: 16,
        frames_per_video: spec.frames_per_video,
        audio_net: NetTemplate::Layers {
            layers: vec![
                conv(8),
                LayerSpec::Relu,
                LayerSpec::MaxPool2d { size: 2 },
                LayerSpec::Dense { units: spec.classes },
                LayerSpec::Softmax,
            ],
        },
        visual_net: NetTemplate::Compact { widths: vec![8] },
        audio_train: TrainConfig {
            learning_rate: 0.05,
            batch_size: 8,
            epochs: 15,
            ..TrainConfig::default()
        },
        visual_train: TrainConfig {
            learning_rate: 0.1,
            batch_size: 16,
            epochs: 8,
            ..TrainConfig::default()
        },
        folds: 5,
        seed: spec.seed,
        ..RunConfig::default()
    }
}

/// Writes `manifest.csv`, `config.json`, `audio/*.wav` and
/// `frames/<id>/*.png` under `out`; returns the manifest path.
pub fn generate_fixture(out: &Path, spec: &SynthSpec) -> Result<PathBuf> {
    if spec.classes < 2 || spec.videos_per_class == 0 || spec.frames_per_video == 0 || spec.frame_size == 0 {
        return Err(Error::InvalidConfig("fixture needs >= 2 classes and non-empty videos".into()));
    }
    let audio_dir = out.join("audio");
    fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut manifest = String::from("video_id,class_id,category,audio_path,frames_dir\n");
    for class in 0..spec.classes {
        for v in 0..spec.videos_per_class {
            let id = format!("c{class}_v{v:03}");
            let audio = synth_audio(class, spec, &mut rng)?;
            write_wav_mono16(&audio_dir.join(format!("{id}.wav")), &audio)?;
            let frame_dir = out.join("frames").join(&id);
            fs::create_dir_all(&frame_dir).map_err(|e| Error::io(&frame_dir, e))?;
            for (i, frame) in synth_frames(class, spec, &mut rng)?.iter().enumerate() {
                save_frame(&frame_dir.join(format!("frame_{i:03}.png")), frame)?;
            }
            writeln!(manifest, "{id},{class},native,audio/{id}.wav,frames/{id}").unwrap();
        }
    }
    let manifest_path = out.join("manifest.csv");
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    fixture_config(spec).save(&out.join("config.json"))?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_config_is_valid() {
        fixture_config(&SynthSpec::default()).validate().unwrap();
    }

    #[test]
    fn audio_has_requested_snr_before_scaling() {
        let spec = SynthSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = synth_audio(2, &spec, &mut rng).unwrap();
        assert_eq!(a.len(), 16_000);
        assert!(a.samples().iter().all(|v| v.abs() <= 0.5 + 1e-12));
    }

    #[test]
    fn color_biases_are_distinct() {
        let b: Vec<[f64; 3]> = (0..5).map(|c| class_color_bias(c, 5)).collect();
        for i in 0..5 {
            for j in 0..i {
                let d: f64 = (0..3).map(|k| (b[i][k] - b[j][k]).powi(2)).sum();
                assert!(d > 0.01);
            }
        }
    }
}
