//! Frames in, classified faces out: reads a frame manifest, runs the
//! cascade and the mask classifier on every frame, and writes annotated
//! frames plus a JSONL detection log.

pub mod annotate;
pub mod config;
pub mod frame;
pub mod run;

pub use annotate::annotate;
pub use config::RunConfig;
pub use frame::{read_frames, Frame, Manifest};
pub use run::{run, Pipeline, RunSummary, StageTimings};
