use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalstat::McNemarMethod;
use crate::frames::{DEFAULT_FRAMES_PER_VIDEO, DEFAULT_FRAME_SIZE};
use crate::fusion::DEFAULT_PRODUCT_FLOOR;
use crate::netcore::{LayerSpec, NetworkSpec, TrainConfig};
use crate::spectro::{LogMelConfig, DEFAULT_SAMPLE_RATE};

/// Network architecture before the input geometry and class count are known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NetTemplate {
    /// See [`NetworkSpec::compact`].
    Compact { widths: Vec<usize> },
    /// Explicit stack; the last two layers must be `dense` with one unit per
    /// class and `softmax`.
    Layers { layers: Vec<LayerSpec> },
}

impl Default for NetTemplate {
    fn default() -> Self {
        NetTemplate::Compact {
            widths: vec![16, 32, 64],
        }
    }
}

impl NetTemplate {
    pub fn build(&self, input_shape: [usize; 3], num_classes: usize) -> Result<NetworkSpec> {
        let spec = match self {
            NetTemplate::Compact { widths } => NetworkSpec::compact(input_shape, num_classes, widths),
            NetTemplate::Layers { layers } => NetworkSpec {
                input_shape: input_shape.to_vec(),
                layers: layers.clone(),
                num_classes,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Class count the template can be checked against before the manifest
    /// is known.
    fn nominal_classes(&self) -> usize {
        match self {
            NetTemplate::Compact { .. } => 2,
            NetTemplate::Layers { layers } => layers
                .iter()
                .rev()
                .find_map(|l| match *l {
                    LayerSpec::Dense { units } => Some(units),
                    _ => None,
                })
                .unwrap_or(2),
        }
    }
}

/// Everything a run needs besides the manifest. Missing JSON fields take
/// their defaults; the fully materialized copy is written next to the
/// artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Audio is linearly resampled to this rate before analysis.
    pub sample_rate: u32,
    pub logmel: LogMelConfig,
    /// Subtract the mean and divide by the standard deviation of every
    /// log-Mel channel of every clip before it reaches the network.
    pub standardize_audio: bool,
    pub frame_size: usize,
    pub frames_per_video: usize,
    pub audio_net: NetTemplate,
    pub visual_net: NetTemplate,
    pub audio_train: TrainConfig,
    pub visual_train: TrainConfig,
    pub folds: usize,
    /// Drives fold assignment and, mixed with fold/modality/category, every
    /// training run. Overrides the seeds inside the train configs.
    pub seed: u64,
    pub product_floor: f64,
    /// One model per modality over all categories instead of one per category.
    pub train_jointly: bool,
    pub mcnemar: McNemarMethod,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            logmel: LogMelConfig {
                target_frames: Some(128),
                ..LogMelConfig::default()
            },
            standardize_audio: true,
            frame_size: DEFAULT_FRAME_SIZE,
            frames_per_video: DEFAULT_FRAMES_PER_VIDEO,
            audio_net: NetTemplate::default(),
            visual_net: NetTemplate::default(),
            audio_train: TrainConfig::default(),
            visual_train: TrainConfig::default(),
            folds: 5,
            seed: 42,
            product_floor: DEFAULT_PRODUCT_FLOOR,
            train_jointly: false,
            mcnemar: McNemarMethod::Exact,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidConfig("sample_rate must be positive".into()));
        }
        self.logmel.validate()?;
        if let Some(f_max) = self.logmel.f_max {
            if f_max > self.sample_rate as f64 / 2.0 {
                return Err(Error::InvalidConfig(format!(
                    "f_max {f_max} Hz exceeds the Nyquist frequency of {} Hz",
                    self.sample_rate
                )));
            }
        }
        if self.frame_size == 0 || self.frames_per_video == 0 {
            return Err(Error::InvalidConfig("frame_size and frames_per_video must be positive".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig(format!("folds must be at least 2, got {}", self.folds)));
        }
        if !(self.product_floor >= 0.0 && self.product_floor < 1.0) {
            return Err(Error::InvalidConfig("product_floor must lie in [0, 1)".into()));
        }
        self.audio_train.validate().map_err(|e| e.context("audio_train"))?;
        self.visual_train.validate().map_err(|e| e.context("visual_train"))?;
        // Architecture problems surface early with a placeholder geometry.
        let t = self.logmel.target_frames.unwrap_or(64);
        self.audio_net
            .build([3, t, self.logmel.num_mels], self.audio_net.nominal_classes())
            .map_err(|e| Error::InvalidConfig(format!("audio_net: {e}")))?;
        self.visual_net
            .build([3, self.frame_size, self.frame_size], self.visual_net.nominal_classes())
            .map_err(|e| Error::InvalidConfig(format!("visual_net: {e}")))
            .map(|_| ())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config always serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}
