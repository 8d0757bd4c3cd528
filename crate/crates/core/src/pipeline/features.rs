use std::fs;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::manifest::ManifestEntry;
use crate::error::{Error, Result};
use crate::frames::{load_video_frames, read_frame_stack, write_frame_stack};
use crate::netcore::Tensor;
use crate::spectro::{read_lmg, read_wav, three_channel_logmel, write_lmg, AudioSignal, LogMelImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Audio,
    Visual,
}

impl Modality {
    pub const ALL: [Modality; 2] = [Modality::Audio, Modality::Visual];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Visual => "visual",
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "audio" => Ok(Modality::Audio),
            "visual" => Ok(Modality::Visual),
            other => Err(format!("unknown modality {other:?} (expected audio or visual)")),
        }
    }
}

pub fn audio_feature_path(out: &Path, video_id: &str) -> PathBuf {
    out.join("features").join("audio").join(format!("{video_id}.lmg"))
}

pub fn visual_feature_path(out: &Path, video_id: &str) -> PathBuf {
    out.join("features").join("visual").join(format!("{video_id}.frm"))
}

/// Reads, resamples and zero-pads (up to the longest window) one clip, then
/// computes its three-channel log-Mel image.
pub fn audio_features(entry: &ManifestEntry, cfg: &RunConfig) -> Result<LogMelImage> {
    let mut signal = read_wav(&entry.audio_path)?;
    if signal.sample_rate() != cfg.sample_rate {
        signal = signal.resample_linear(cfg.sample_rate)?;
    }
    let need = cfg.logmel.min_samples();
    if signal.len() < need {
        let mut samples = signal.samples().to_vec();
        samples.resize(need, 0.0);
        signal = AudioSignal::new(samples, cfg.sample_rate)?;
    }
    three_channel_logmel(&signal, &cfg.logmel)
}

/// Writes the log-Mel image and resized frame stack of every entry.
pub fn extract_features(entries: &[ManifestEntry], cfg: &RunConfig, out: &Path) -> Result<()> {
    for dir in ["audio", "visual"] {
        let d = out.join("features").join(dir);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    for entry in entries {
        let ctx = |e: Error| e.context(format!("video {}", entry.video_id));
        let image = audio_features(entry, cfg).map_err(ctx)?;
        write_lmg(&audio_feature_path(out, &entry.video_id), &image)?;
        let frames = load_video_frames(&entry.frames_dir, cfg.frames_per_video, cfg.frame_size).map_err(ctx)?;
        write_frame_stack(&visual_feature_path(out, &entry.video_id), &frames)?;
    }
    Ok(())
}

/// Per-channel zero mean, unit variance (population). Constant channels are
/// only centred.
pub fn standardize_channels(values: &mut [f64], channels: usize) {
    let plane = values.len() / channels;
    for chunk in values.chunks_mut(plane.max(1)) {
        let n = chunk.len() as f64;
        let mean = chunk.iter().sum::<f64>() / n;
        let var = chunk.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
        for v in chunk.iter_mut() {
            *v = (*v - mean) * scale;
        }
    }
}

/// Network input for one video's audio: a `[3, frames, mels]` tensor.
pub fn load_audio_input(out: &Path, video_id: &str, cfg: &RunConfig) -> Result<Tensor> {
    let image = read_lmg(&audio_feature_path(out, video_id))?;
    let [c, t, k] = image.shape();
    let mut values = image.into_values();
    if cfg.standardize_audio {
        standardize_channels(&mut values, c);
    }
    Tensor::new(vec![c, t, k], values)
}

/// Network inputs for one video's frames, each `[3, h, w]`.
pub fn load_visual_inputs(out: &Path, video_id: &str) -> Result<Vec<Tensor>> {
    let (frames, h, w) = read_frame_stack(&visual_feature_path(out, video_id))?;
    frames.into_iter().map(|f| Tensor::new(vec![3, h, w], f)).collect()
}
