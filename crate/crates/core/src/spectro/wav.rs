use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::AudioSignal;
use crate::error::{Error, Result};

fn ingest(path: &Path, reason: impl ToString) -> Error {
    Error::Ingest {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    }
}

/// Reads 16-bit PCM WAV (mono or stereo). Stereo is averaged to mono and
/// samples are scaled by 1/32768.
pub fn read_wav(path: &Path) -> Result<AudioSignal> {
    let mut reader = WavReader::open(path).map_err(|e| ingest(path, e))?;
    let spec = reader.spec();
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(ingest(
            path,
            format!("only 16-bit PCM is supported, found {}-bit {:?}", spec.bits_per_sample, spec.sample_format),
        ));
    }
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(ingest(path, format!("expected 1 or 2 channels, found {channels}")));
    }
    let raw = reader
        .samples::<i16>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| ingest(path, e))?;
    let samples: Vec<f64> = raw
        .chunks_exact(channels)
        .map(|frame| frame.iter().map(|&s| s as f64 / 32768.0).sum::<f64>() / channels as f64)
        .collect();
    AudioSignal::new(samples, spec.sample_rate).map_err(|e| ingest(path, e))
}

/// Writes mono 16-bit PCM, clipping to the representable range.
pub fn write_wav_mono16(path: &Path, signal: &AudioSignal) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let wrap = |e: hound::Error| Error::format(path, e.to_string());
    let mut writer = WavWriter::create(path, spec).map_err(wrap)?;
    for &s in signal.samples() {
        let q = (s * 32768.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        writer.write_sample(q).map_err(wrap)?;
    }
    writer.finalize().map_err(wrap)
}
