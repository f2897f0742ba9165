use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::{info, warn};
use rayon::prelude::*;

use super::annotate::annotate;
use super::config::RunConfig;
use super::frame::{write_ppm, Frame, Manifest};
use crate::classifier::{MaskClassifier, BackboneSpec};
use crate::detector::{detect_faces_traced, CascadeConfig, CascadeNetworks, CascadeTimings};
use crate::error::{Error, Result};
use crate::record::Detection;
use crate::weights::WeightArchive;

/// Time spent per stage, summed over frames.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub cascade: CascadeTimings,
    pub classifier: Duration,
}

impl std::ops::AddAssign for StageTimings {
    fn add_assign(&mut self, o: Self) {
        self.cascade += o.cascade;
        self.classifier += o.classifier;
    }
}

/// Networks and settings shared read-only by all workers.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub networks: CascadeNetworks,
    pub classifier: MaskClassifier,
    pub cascade: CascadeConfig,
}

impl Pipeline {
    pub fn new(
        cascade_weights: &WeightArchive,
        classifier_weights: &WeightArchive,
        cascade: CascadeConfig,
        backbone: BackboneSpec,
    ) -> Result<Self> {
        cascade.validate()?;
        Ok(Pipeline {
            networks: CascadeNetworks::from_archive(cascade_weights)?,
            classifier: MaskClassifier::build(backbone, classifier_weights)?,
            cascade,
        })
    }

    pub fn from_config(config: &RunConfig) -> Result<Self> {
        Pipeline::new(
            &WeightArchive::load(&config.cascade_weights)?,
            &WeightArchive::load(&config.classifier_weights)?,
            config.cascade.clone(),
            config.backbone.clone(),
        )
    }

    /// Detects and classifies every face. Output is ordered by descending
    /// face score; equal scores keep cascade order. Boxes are widened to
    /// whole pixels (floor of the near edge, ceiling of the far edge), which
    /// keeps them inside the frame.
    pub fn process_frame(&self, frame: &Frame) -> Result<(Vec<Detection>, StageTimings)> {
        let tensor = frame.to_tensor();
        let (faces, trace) = detect_faces_traced(&tensor, &self.networks, &self.cascade)?;
        let t = Instant::now();
        let classified = self.classifier.classify_all(&tensor, &faces)?;
        let timings = StageTimings {
            cascade: trace.timings,
            classifier: t.elapsed(),
        };
        let mut detections: Vec<Detection> = classified
            .into_iter()
            .map(|(face, prediction)| {
                let b = face.bbox;
                Detection {
                    frame: frame.index,
                    x1: b.x1.floor() as u32,
                    y1: b.y1.floor() as u32,
                    x2: (b.x2.ceil() as u32).min(frame.width as u32),
                    y2: (b.y2.ceil() as u32).min(frame.height as u32),
                    label: prediction.label,
                    confidence: prediction.confidence,
                    face_score: face.score,
                }
            })
            .collect();
        detections.sort_by(|a, b| b.face_score.total_cmp(&a.face_score));
        Ok((detections, timings))
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub frames: usize,
    pub failed_frames: usize,
    pub detections: usize,
    pub wall_time: Duration,
    pub timings: StageTimings,
    pub log_path: PathBuf,
}

impl RunSummary {
    /// More than half of the frames failed.
    pub fn failed(&self) -> bool {
        2 * self.failed_frames > self.frames
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        let t = &self.timings;
        writeln!(f, "frames:      {} ({} failed)", self.frames, self.failed_frames)?;
        writeln!(f, "detections:  {}", self.detections)?;
        writeln!(f, "wall time:   {:.1} ms", ms(self.wall_time))?;
        if self.frames > self.failed_frames {
            let per = self.wall_time.as_secs_f64() / (self.frames - self.failed_frames) as f64;
            writeln!(f, "throughput:  {:.2} frames/s", 1.0 / per.max(f64::MIN_POSITIVE))?;
        }
        writeln!(f, "stage time (summed over workers):")?;
        writeln!(f, "  pyramid     {:10.1} ms", ms(t.cascade.pyramid))?;
        writeln!(f, "  stage 1     {:10.1} ms", ms(t.cascade.proposal))?;
        writeln!(f, "  stage 2     {:10.1} ms", ms(t.cascade.refine))?;
        writeln!(f, "  stage 3     {:10.1} ms", ms(t.cascade.output))?;
        writeln!(f, "  classifier  {:10.1} ms", ms(t.classifier))?;
        write!(f, "log:         {}", self.log_path.display())
    }
}

struct FrameResult {
    name: Option<PathBuf>,
    outcome: Result<(Frame, Vec<Detection>, StageTimings)>,
}

fn output_name(path: &Path) -> Option<PathBuf> {
    path.file_name().map(PathBuf::from)
}

/// Runs the whole pipeline described by `config`.
///
/// Frames are processed by a pool of `config.threads` workers in batches;
/// results are written strictly in frame order, so the log and annotated
/// frames do not depend on the thread count. A frame that fails is logged
/// and skipped.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    config.check_paths()?;
    let started = Instant::now();
    let pipeline = Pipeline::from_config(config)?;
    let manifest = Manifest::load(&config.manifest)?;
    std::fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    let log_path = config.output_dir.join(&config.log_name);
    let mut log = std::io::BufWriter::new(std::fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", config.threads)))?;

    let mut summary = RunSummary {
        frames: manifest.len(),
        log_path: log_path.clone(),
        ..RunSummary::default()
    };
    let batch = 2 * config.threads;
    let indices: Vec<usize> = (0..manifest.len()).collect();
    for chunk in indices.chunks(batch) {
        let results: Vec<FrameResult> = pool.install(|| {
            chunk
                .par_iter()
                .map(|&i| FrameResult {
                    name: output_name(&manifest.entries[i].path),
                    outcome: manifest.read_frame(i).and_then(|frame| {
                        let (detections, timings) = pipeline.process_frame(&frame)?;
                        let annotated = if config.annotate { annotate(&frame, &detections) } else { frame };
                        Ok((annotated, detections, timings))
                    }),
                })
                .collect()
        });
        for (result, &i) in results.into_iter().zip(chunk) {
            match result.outcome {
                Ok((annotated, detections, timings)) => {
                    summary.timings += timings;
                    summary.detections += detections.len();
                    for d in &detections {
                        let line = serde_json::to_string(d).expect("detections serialize");
                        writeln!(log, "{line}").map_err(|e| Error::io(&log_path, e))?;
                    }
                    if config.annotate {
                        if let Some(name) = result.name {
                            write_ppm(&annotated, config.output_dir.join(name))?;
                        }
                    }
                }
                Err(e) => {
                    warn!("frame {i} skipped: {e}");
                    summary.failed_frames += 1;
                }
            }
        }
    }
    log.flush().map_err(|e| Error::io(&log_path, e))?;
    summary.wall_time = started.elapsed();
    info!("{} frames, {} detections", summary.frames, summary.detections);
    Ok(summary)
}
