use crate::error::{Error, Result};

/// Hz to Mel: `2595 log10(1 + f / 700)`.
pub fn mel_scale(hz: f64) -> Result<f64> {
    if !(hz >= 0.0) || !hz.is_finite() {
        return Err(Error::Domain(format!("frequency {hz} Hz must be finite and >= 0")));
    }
    Ok(2595.0 * (1.0 + hz / 700.0).log10())
}

/// Mel to Hz: `700 (10^(m / 2595) - 1)`.
pub fn inverse_mel(mel: f64) -> Result<f64> {
    if !(mel >= 0.0) || !mel.is_finite() {
        return Err(Error::Domain(format!("mel value {mel} must be finite and >= 0")));
    }
    Ok(700.0 * (10f64.powf(mel / 2595.0) - 1.0))
}

/// Triangular Mel filterbank stored `bins x mels`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterBank {
    weights: Vec<f64>,
    num_bins: usize,
    num_mels: usize,
    edge_freqs: Vec<f64>,
    f_min: f64,
    f_max: f64,
}

impl MelFilterBank {
    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_mels(&self) -> usize {
        self.num_mels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, bin: usize, mel: usize) -> f64 {
        self.weights[bin * self.num_mels + mel]
    }

    /// The `K + 2` filter edges; filter `p` (0-based) rises from
    /// `edge_freqs[p]`, peaks at `edge_freqs[p + 1]` and falls to
    /// `edge_freqs[p + 2]`.
    pub fn edge_freqs(&self) -> &[f64] {
        &self.edge_freqs
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    /// Frequency of bin `i` for the STFT this bank was built for.
    pub fn bin_freq(&self, bin: usize, sample_rate: u32) -> f64 {
        bin_freq(bin, self.num_bins, sample_rate)
    }
}

fn bin_freq(bin: usize, num_bins: usize, sample_rate: u32) -> f64 {
    bin as f64 * sample_rate as f64 / (2 * (num_bins - 1)) as f64
}

/// Builds `num_mels` triangular filters whose edges are equally spaced on the
/// Mel axis between `f_min` and `f_max`, evaluated at the `num_bins` STFT bin
/// frequencies `i * sr / (2 (num_bins - 1))`.
pub fn build_filterbank(
    num_bins: usize,
    num_mels: usize,
    f_min: f64,
    f_max: f64,
    sample_rate: u32,
) -> Result<MelFilterBank> {
    let nyquist = sample_rate as f64 / 2.0;
    if sample_rate == 0 {
        return Err(Error::InvalidConfig("sample rate must be positive".into()));
    }
    if !(0.0 <= f_min && f_min < f_max && f_max <= nyquist) {
        return Err(Error::InvalidConfig(format!(
            "need 0 <= f_min < f_max <= {nyquist}, got f_min={f_min} f_max={f_max}"
        )));
    }
    if num_mels == 0 {
        return Err(Error::InvalidConfig("at least one Mel filter is required".into()));
    }
    if num_bins < num_mels + 2 {
        return Err(Error::DegenerateFilterbank(format!(
            "{num_mels} filters need at least {} frequency bins, got {num_bins}",
            num_mels + 2
        )));
    }

    let mel_lo = mel_scale(f_min)?;
    let mel_hi = mel_scale(f_max)?;
    let step = (mel_hi - mel_lo) / (num_mels + 1) as f64;
    let mut edge_freqs = (0..num_mels + 2)
        .map(|i| inverse_mel(mel_lo + step * i as f64))
        .collect::<Result<Vec<_>>>()?;
    // pin the ends so they are exactly the requested band edges
    edge_freqs[0] = f_min;
    edge_freqs[num_mels + 1] = f_max;
    MelFilterBank::from_edges(edge_freqs, num_bins, sample_rate)
}

impl MelFilterBank {
    /// Triangular filters over arbitrary increasing edge frequencies. Filter
    /// `p` ramps up on `[edges[p], edges[p+1])` and down on
    /// `[edges[p+1], edges[p+2])`.
    pub fn from_edges(edge_freqs: Vec<f64>, num_bins: usize, sample_rate: u32) -> Result<Self> {
        if edge_freqs.len() < 3 {
            return Err(Error::InvalidConfig("need at least three filter edges".into()));
        }
        if edge_freqs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidConfig("filter edges must be strictly increasing".into()));
        }
        if num_bins < 2 || sample_rate == 0 {
            return Err(Error::InvalidConfig("need >= 2 bins and a positive sample rate".into()));
        }
        let num_mels = edge_freqs.len() - 2;
        let mut weights = vec![0.0; num_bins * num_mels];
        for p in 0..num_mels {
            let (lo, center, hi) = (edge_freqs[p], edge_freqs[p + 1], edge_freqs[p + 2]);
            let mut support = 0;
            for bin in 0..num_bins {
                let f = bin_freq(bin, num_bins, sample_rate);
                let w = if lo <= f && f < center {
                    (f - lo) / (center - lo)
                } else if center <= f && f < hi {
                    (hi - f) / (hi - center)
                } else {
                    0.0
                };
                if w > 0.0 {
                    support += 1;
                }
                weights[bin * num_mels + p] = w;
            }
            if support == 0 {
                return Err(Error::DegenerateFilterbank(format!(
                    "filter {p} ({lo:.2}-{hi:.2} Hz) covers no frequency bin; \
                     use fewer Mel bands or a longer window"
                )));
            }
        }
        let f_min = edge_freqs[0];
        let f_max = edge_freqs[num_mels + 1];
        Ok(MelFilterBank {
            weights,
            num_bins,
            num_mels,
            edge_freqs,
            f_min,
            f_max,
        })
    }
}
