use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_filterbank, stft, AudioSignal, MelFilterBank, Spectrogram, StftConfig};
use crate::error::{Error, Result};

pub const LMG_MAGIC: &[u8; 4] = b"LMG1";

/// `ln(X H + eps)`, `frames x mels`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMelSpectrogram {
    values: Vec<f64>,
    num_frames: usize,
    num_mels: usize,
    epsilon: f64,
}

impl LogMelSpectrogram {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_mels(&self) -> usize {
        self.num_mels
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.values[t * self.num_mels + k]
    }
}

pub fn log_mel(spec: &Spectrogram, bank: &MelFilterBank, epsilon: f64) -> Result<LogMelSpectrogram> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidConfig(format!("epsilon {epsilon} must be positive and finite")));
    }
    let (frames, bins, mels) = (spec.num_frames(), spec.num_bins(), bank.num_mels());
    if bins != bank.num_bins() {
        return Err(Error::Shape(format!(
            "spectrogram has {bins} bins but filterbank expects {}",
            bank.num_bins()
        )));
    }
    let weights = bank.weights();
    let mut values = vec![0.0; frames * mels];
    for t in 0..frames {
        let row = &mut values[t * mels..(t + 1) * mels];
        for (f, &mag) in spec.frame(t).iter().enumerate() {
            if mag == 0.0 {
                continue;
            }
            for (acc, &w) in row.iter_mut().zip(&weights[f * mels..(f + 1) * mels]) {
                *acc += mag * w;
            }
        }
        for v in row.iter_mut() {
            *v = (*v + epsilon).ln();
        }
    }
    Ok(LogMelSpectrogram {
        values,
        num_frames: frames,
        num_mels: mels,
        epsilon,
    })
}

/// Corner-aligned linear interpolation of a `frames x width` row-major grid
/// along the frame axis.
pub fn resample_frames(values: &[f64], frames: usize, width: usize, target: usize) -> Vec<f64> {
    assert_eq!(values.len(), frames * width, "grid does not match its dimensions");
    assert!(frames >= 1 && target >= 1, "frame counts must be positive");
    if frames == target {
        return values.to_vec();
    }
    let mut out = Vec::with_capacity(target * width);
    for t in 0..target {
        let pos = if target == 1 {
            0.0
        } else {
            t as f64 * (frames - 1) as f64 / (target - 1) as f64
        };
        let lo = (pos.floor() as usize).min(frames - 1);
        let hi = (lo + 1).min(frames - 1);
        let frac = pos - lo as f64;
        let (a, b) = (&values[lo * width..(lo + 1) * width], &values[hi * width..(hi + 1) * width]);
        out.extend(a.iter().zip(b).map(|(x, y)| x * (1.0 - frac) + y * frac));
    }
    out
}

/// Settings for the three-resolution log-Mel image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogMelConfig {
    pub stft: [StftConfig; 3],
    pub num_mels: usize,
    pub f_min: f64,
    /// Upper band edge; Nyquist when absent.
    pub f_max: Option<f64>,
    pub epsilon: f64,
    /// Frame count of the output grid; the middle configuration's frame
    /// count when absent.
    pub target_frames: Option<usize>,
}

impl Default for LogMelConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default_triplet(),
            num_mels: 128,
            f_min: 0.0,
            f_max: None,
            epsilon: 1e-6,
            target_frames: None,
        }
    }
}

impl LogMelConfig {
    pub fn validate(&self) -> Result<()> {
        for cfg in &self.stft {
            cfg.validate()?;
        }
        if self.num_mels == 0 {
            return Err(Error::InvalidConfig("num_mels must be positive".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive".into()));
        }
        if self.target_frames == Some(0) {
            return Err(Error::InvalidConfig("target_frames must be positive".into()));
        }
        Ok(())
    }

    /// Samples needed before every channel has at least one frame.
    pub fn min_samples(&self) -> usize {
        self.stft.iter().map(|c| c.window_size).max().unwrap_or(0)
    }
}

/// Three log-Mel planes sharing one `frames x mels` grid, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMelImage {
    values: Vec<f64>,
    num_frames: usize,
    num_mels: usize,
    source_configs: Option<[StftConfig; 3]>,
}

impl LogMelImage {
    pub const CHANNELS: usize = 3;

    pub fn from_values(values: Vec<f64>, num_frames: usize, num_mels: usize) -> Result<Self> {
        if values.len() != Self::CHANNELS * num_frames * num_mels {
            return Err(Error::Shape(format!(
                "{} values cannot fill 3x{num_frames}x{num_mels}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("log-Mel values must be finite".into()));
        }
        Ok(Self {
            values,
            num_frames,
            num_mels,
            source_configs: None,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_mels(&self) -> usize {
        self.num_mels
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.num_frames * self.num_mels;
        &self.values[c * plane..(c + 1) * plane]
    }

    pub fn source_configs(&self) -> Option<&[StftConfig; 3]> {
        self.source_configs.as_ref()
    }

    /// `[channels, frames, mels]`
    pub fn shape(&self) -> [usize; 3] {
        [Self::CHANNELS, self.num_frames, self.num_mels]
    }
}

pub fn three_channel_logmel(signal: &AudioSignal, cfg: &LogMelConfig) -> Result<LogMelImage> {
    cfg.validate()?;
    let sr = signal.sample_rate();
    let f_max = cfg.f_max.unwrap_or(sr as f64 / 2.0);
    let target = match cfg.target_frames {
        Some(t) => t,
        None => cfg.stft[1].num_frames(signal.len()).ok_or_else(|| {
            Error::InsufficientData(format!(
                "signal of {} samples is shorter than the {}-sample middle window",
                signal.len(),
                cfg.stft[1].window_size
            ))
        })?,
    };

    let mut values = Vec::with_capacity(3 * target * cfg.num_mels);
    for stft_cfg in &cfg.stft {
        let spec = stft(signal, stft_cfg)?;
        let bank = build_filterbank(spec.num_bins(), cfg.num_mels, cfg.f_min, f_max, sr)?;
        let lm = log_mel(&spec, &bank, cfg.epsilon)?;
        values.extend(resample_frames(lm.values(), lm.num_frames(), lm.num_mels(), target));
    }
    Ok(LogMelImage {
        values,
        num_frames: target,
        num_mels: cfg.num_mels,
        source_configs: Some(cfg.stft),
    })
}

/// Writes `LMG1`, u32 channels, u32 frames, u32 mels, then channel-major f32,
/// all little-endian.
pub fn write_lmg(path: &Path, image: &LogMelImage) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + image.values.len() * 4);
    buf.extend_from_slice(LMG_MAGIC);
    for dim in image.shape() {
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for &v in &image.values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_lmg(path: &Path) -> Result<LogMelImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..4] != LMG_MAGIC {
        return Err(Error::format(path, "missing LMG1 header"));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (channels, frames, mels) = (dim(0), dim(1), dim(2));
    if channels != LogMelImage::CHANNELS {
        return Err(Error::format(path, format!("expected 3 channels, found {channels}")));
    }
    let count = channels * frames * mels;
    if bytes.len() != 16 + 4 * count {
        return Err(Error::format(
            path,
            format!("payload holds {} bytes, header implies {}", bytes.len() - 16, 4 * count),
        ));
    }
    let values = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    LogMelImage::from_values(values, frames, mels).map_err(|e| Error::format(path, e.to_string()))
}
