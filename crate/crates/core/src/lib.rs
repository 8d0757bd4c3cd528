//! Camera model identification from the audio and visual content of videos.
//!
//! The crate is organised as a pipeline of small modules:
//!
//! * [`spectro`]: three-resolution log-Mel images from PCM audio.
//! * [`frames`]: frame loading and bilinear resizing.
//! * [`netcore`]: a compact CNN with exact backpropagation and SGD training.
//! * [`fusion`]: probability matrices, frame averaging and product/sum late fusion.
//! * [`evalstat`]: stratified k-fold splits, accuracy tables and McNemar tests.
//! * [`pipeline`]: manifest-driven experiments and report emission.
//!
//! Each capability has a runnable program under `examples/`, e.g.
//! `cargo run --release --example late_fusion`.

pub mod error;
pub mod evalstat;
pub mod frames;
pub mod fusion;
pub mod netcore;
pub mod pipeline;
pub mod spectro;

pub use error::{Error, Result};
