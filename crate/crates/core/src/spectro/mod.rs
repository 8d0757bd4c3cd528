//! Audio front end: STFT magnitude spectrograms, Mel filterbanks and the
//! three-resolution log-Mel image fed to the audio classifier.

mod logmel;
mod mel;
mod wav;

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use logmel::{
    log_mel, read_lmg, resample_frames, three_channel_logmel, write_lmg, LogMelConfig,
    LogMelImage, LogMelSpectrogram, LMG_MAGIC,
};
pub use mel::{build_filterbank, inverse_mel, mel_scale, MelFilterBank};
pub use wav::{read_wav, write_wav_mono16};

/// Working sample rate all audio is normalized to before analysis.
pub const DEFAULT_SAMPLE_RATE: u32 = 22_050;

/// Mono PCM audio with amplitudes nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidInput("audio signal has no samples".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Linear-interpolation resampling to `target_rate`.
    pub fn resample_linear(&self, target_rate: u32) -> Result<AudioSignal> {
        if target_rate == 0 {
            return Err(Error::InvalidConfig("target sample rate must be positive".into()));
        }
        if target_rate == self.sample_rate {
            return Ok(self.clone());
        }
        let ratio = self.sample_rate as f64 / target_rate as f64;
        let n_in = self.samples.len();
        let n_out = ((n_in - 1) as f64 / ratio).floor() as usize + 1;
        let out = (0..n_out)
            .map(|i| {
                let pos = i as f64 * ratio;
                let lo = (pos.floor() as usize).min(n_in - 1);
                let hi = (lo + 1).min(n_in - 1);
                let frac = pos - lo as f64;
                self.samples[lo] * (1.0 - frac) + self.samples[hi] * frac
            })
            .collect();
        AudioSignal::new(out, target_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hann,
    Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_size: usize,
    pub hop_size: usize,
    #[serde(default)]
    pub window_kind: WindowKind,
}

impl StftConfig {
    pub fn new(window_size: usize, hop_size: usize, window_kind: WindowKind) -> Result<Self> {
        let cfg = Self {
            window_size,
            hop_size,
            window_kind,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_size < 2 || !self.window_size.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "window size {} must be a power of two >= 2",
                self.window_size
            )));
        }
        if self.hop_size == 0 || self.hop_size > self.window_size {
            return Err(Error::InvalidConfig(format!(
                "hop size {} must lie in [1, {}]",
                self.hop_size, self.window_size
            )));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.window_size / 2 + 1
    }

    /// Frame count for a signal of `len` samples, or `None` when shorter than
    /// one window.
    pub fn num_frames(&self, len: usize) -> Option<usize> {
        (len >= self.window_size).then(|| (len - self.window_size) / self.hop_size + 1)
    }

    /// Short, medium and long analysis windows used for the three image channels.
    pub fn default_triplet() -> [StftConfig; 3] {
        [(1024, 256), (2048, 512), (4096, 1024)].map(|(w, h)| StftConfig {
            window_size: w,
            hop_size: h,
            window_kind: WindowKind::Hann,
        })
    }
}

/// Window coefficients. Hann uses the symmetric form
/// `0.5 - 0.5 cos(2 pi i / (n - 1))`.
pub fn make_window(kind: WindowKind, window_size: usize) -> Result<Vec<f64>> {
    if window_size < 2 {
        return Err(Error::InvalidConfig(format!(
            "window size {window_size} must be at least 2"
        )));
    }
    let denom = (window_size - 1) as f64;
    Ok(match kind {
        WindowKind::Rect => vec![1.0; window_size],
        WindowKind::Hann => (0..window_size)
            .map(|i| (0.5 - 0.5 * (2.0 * PI * i as f64 / denom).cos()).clamp(0.0, 1.0))
            .collect(),
    })
}

/// STFT magnitudes, `frames x bins`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    magnitudes: Vec<f64>,
    num_frames: usize,
    num_bins: usize,
    frame_times: Vec<f64>,
    bin_freqs: Vec<f64>,
}

impl Spectrogram {
    /// Builds a spectrogram from raw magnitudes. Mostly useful in tests and
    /// when magnitudes come from elsewhere.
    pub fn from_magnitudes(
        magnitudes: Vec<f64>,
        num_frames: usize,
        num_bins: usize,
        sample_rate: u32,
    ) -> Result<Self> {
        if magnitudes.len() != num_frames * num_bins {
            return Err(Error::Shape(format!(
                "{} magnitudes do not fill a {num_frames}x{num_bins} grid",
                magnitudes.len()
            )));
        }
        if magnitudes.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidInput(
                "magnitudes must be finite and non-negative".into(),
            ));
        }
        let window_size = 2 * num_bins.saturating_sub(1).max(1);
        let bin_freqs = (0..num_bins)
            .map(|f| f as f64 * sample_rate as f64 / window_size as f64)
            .collect();
        Ok(Self {
            magnitudes,
            num_frames,
            num_bins,
            frame_times: (0..num_frames).map(|t| t as f64).collect(),
            bin_freqs,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.magnitudes
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.magnitudes[t * self.num_bins..(t + 1) * self.num_bins]
    }

    pub fn get(&self, t: usize, f: usize) -> f64 {
        self.magnitudes[t * self.num_bins + f]
    }

    /// Center time of each frame in seconds.
    pub fn frame_times(&self) -> &[f64] {
        &self.frame_times
    }

    pub fn bin_freqs(&self) -> &[f64] {
        &self.bin_freqs
    }
}

/// Magnitude STFT. Frames start at `t * hop`; trailing samples that do not
/// fill a whole window are dropped.
pub fn stft(signal: &AudioSignal, cfg: &StftConfig) -> Result<Spectrogram> {
    cfg.validate()?;
    let n = cfg.window_size;
    let num_frames = cfg.num_frames(signal.len()).ok_or_else(|| {
        Error::InsufficientData(format!(
            "signal of {} samples is shorter than one {n}-sample window",
            signal.len()
        ))
    })?;
    let num_bins = cfg.num_bins();
    let window = make_window(cfg.window_kind, n)?;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex::default(); n];
    let mut magnitudes = Vec::with_capacity(num_frames * num_bins);
    let sr = signal.sample_rate() as f64;

    for t in 0..num_frames {
        let start = t * cfg.hop_size;
        let frame = &signal.samples()[start..start + n];
        for ((slot, &x), &w) in buf.iter_mut().zip(frame).zip(&window) {
            *slot = Complex::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        magnitudes.extend(buf[..num_bins].iter().map(|c| c.norm()));
    }

    Ok(Spectrogram {
        magnitudes,
        num_frames,
        num_bins,
        frame_times: (0..num_frames)
            .map(|t| (t * cfg.hop_size) as f64 / sr + n as f64 / (2.0 * sr))
            .collect(),
        bin_freqs: (0..num_bins).map(|f| f as f64 * sr / n as f64).collect(),
    })
}
