//! Manifest-driven experiment orchestration: feature extraction, per-fold
//! training and prediction for both modalities, late fusion, evaluation and
//! report tables.
//!
//! Artifacts directory:
//!
//! ```text
//! config.json  manifest.csv  folds.csv
//! features/audio/<id>.lmg  features/visual/<id>.frm
//! fold<i>/{audio,visual}/model_<scope>.nmc  train_log_<scope>.csv  probs.csv
//! fold<i>/fused_{product,sum}.csv
//! reports/{accuracy,significance}.csv  accuracy_{unimodal,fusion}.csv
//! reports/mcnemar_{rules,modalities}.csv  improvement.csv  cross_category.csv  tables.md
//! ```

mod config;
mod features;
mod manifest;
mod report;
mod run;
mod synth;

pub use config::{NetTemplate, RunConfig};
pub use features::{
    audio_feature_path, audio_features, extract_features, load_audio_input, load_visual_inputs,
    standardize_channels, visual_feature_path, Modality,
};
pub use manifest::{validate_manifest, Category, DatasetManifest, ManifestEntry};
pub use report::{
    accuracy_table, cross_category_mean, cross_category_weighted_mean, format_p, improvement_report,
    p_value_table, parse_table_csv, write_reports, AccuracyRecord, CellKind, Comparison, Condition,
    ConditionMeans, Improvement, ReportTable, SignificanceRecord, SUMMARY_LABEL,
};
pub use run::{assign_folds, derive_seed, extract, run_experiment, ArtifactLayout, Workspace};
pub use synth::{class_color_bias, class_tones, fixture_config, generate_fixture, SynthSpec};
