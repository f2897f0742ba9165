use std::time::{Duration, Instant};

use super::geometry::{calibrate, nms, square_pad, BoundingBox, FaceCandidate, Landmarks, NmsMode, RegressionOffsets};
use super::image::{build_image_pyramid, crop_resize, normalize_pixels, PyramidLevel, PROPOSAL_STRIDE, PROPOSAL_WINDOW};
use super::stages::{CascadeNetworks, StageNetwork, FACE_CHANNEL};
use super::CascadeConfig;
use crate::error::Result;
use crate::tensor::Tensor;

/// Crops evaluated per forward pass in the refinement stages.
const REFINE_BATCH: usize = 16;

/// Scores every window of one pyramid level with the fully convolutional
/// proposal network. Grid cell `(r, c)` maps to the 12x12 window at
/// `(2c, 2r)` in scaled pixels, divided by the level scale. Candidates come
/// back in row-major grid order.
pub fn generate_proposals(level: &PyramidLevel, pnet: &StageNetwork, threshold: f32) -> Result<Vec<FaceCandidate>> {
    let out = pnet.forward(&level.image)?;
    let [_, _, gh, gw] = out.probabilities.dims4()?;
    let stride = PROPOSAL_STRIDE as f32;
    let window = PROPOSAL_WINDOW as f32;
    let mut candidates = Vec::new();
    for r in 0..gh {
        for c in 0..gw {
            let p = out.probabilities.at4(0, FACE_CHANNEL, r, c);
            if p < threshold {
                continue;
            }
            let (x, y) = (stride * c as f32, stride * r as f32);
            let reg = |k| out.regression.at4(0, k, r, c);
            candidates.push(FaceCandidate {
                bbox: BoundingBox::new(
                    x / level.scale,
                    y / level.scale,
                    (x + window) / level.scale,
                    (y + window) / level.scale,
                ),
                score: p,
                offsets: RegressionOffsets::new(reg(0), reg(1), reg(2), reg(3)),
                landmarks: None,
            });
        }
    }
    Ok(candidates)
}

/// Rescores candidates with a refinement network. Each box is squared,
/// cropped from the raw frame and resized to the stage's input extent.
/// Survivors are calibrated with the new offsets; landmarks (output stage
/// only) are mapped into the frame through the pre-calibration square.
pub fn refine_stage(
    frame: &Tensor,
    candidates: &[FaceCandidate],
    network: &StageNetwork,
    threshold: f32,
) -> Result<Vec<FaceCandidate>> {
    let extent = network.stage().input_extent();
    let mut refined = Vec::new();
    for chunk in candidates.chunks(REFINE_BATCH) {
        let squares: Vec<BoundingBox> = chunk.iter().map(|c| square_pad(&c.bbox)).collect();
        let crops = squares
            .iter()
            .map(|sq| crop_resize(frame, sq, extent).map(|t| normalize_pixels(&t)))
            .collect::<Result<Vec<_>>>()?;
        let out = network.forward(&Tensor::stack_batch(&crops)?)?;
        for (i, sq) in squares.iter().enumerate() {
            let score = out.probabilities.at4(i, FACE_CHANNEL, 0, 0);
            if score < threshold {
                continue;
            }
            let reg = |k| out.regression.at4(i, k, 0, 0);
            let offsets = RegressionOffsets::new(reg(0), reg(1), reg(2), reg(3));
            let Some(bbox) = calibrate(sq, &offsets) else {
                continue;
            };
            let landmarks = out.landmarks.as_ref().map(|l| {
                let (w, h) = (sq.width(), sq.height());
                Landmarks(std::array::from_fn(|k| {
                    (sq.x1 + l.at4(i, 2 * k, 0, 0) * w, sq.y1 + l.at4(i, 2 * k + 1, 0, 0) * h)
                }))
            });
            refined.push(FaceCandidate {
                bbox,
                score,
                offsets,
                landmarks,
            });
        }
    }
    Ok(refined)
}

/// Wall-clock time spent in each cascade phase.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CascadeTimings {
    pub pyramid: Duration,
    pub proposal: Duration,
    pub refine: Duration,
    pub output: Duration,
}

impl std::ops::AddAssign for CascadeTimings {
    fn add_assign(&mut self, o: Self) {
        self.pyramid += o.pyramid;
        self.proposal += o.proposal;
        self.refine += o.refine;
        self.output += o.output;
    }
}

/// Candidate counts after each phase of one cascade run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CascadeCounts {
    pub pyramid_levels: usize,
    /// Raw proposals above the stage-1 threshold, all levels.
    pub proposals: usize,
    /// Survivors of per-level NMS.
    pub level_nms: usize,
    /// After cross-level NMS and calibration.
    pub stage1: usize,
    pub stage2: usize,
    pub stage3: usize,
    /// After clamping to the frame.
    pub final_count: usize,
}

#[derive(Clone, Debug, Default)]
pub struct CascadeTrace {
    pub counts: CascadeCounts,
    pub timings: CascadeTimings,
}

/// Runs the full cascade on a raw `[1, 3, H, W]` frame.
pub fn detect_faces(frame: &Tensor, networks: &CascadeNetworks, config: &CascadeConfig) -> Result<Vec<FaceCandidate>> {
    detect_faces_traced(frame, networks, config).map(|(faces, _)| faces)
}

pub fn detect_faces_traced(
    frame: &Tensor,
    networks: &CascadeNetworks,
    config: &CascadeConfig,
) -> Result<(Vec<FaceCandidate>, CascadeTrace)> {
    config.validate()?;
    let [_, _, height, width] = frame.dims4()?;
    let mut trace = CascadeTrace::default();

    let t = Instant::now();
    let levels = build_image_pyramid(frame, config)?;
    trace.timings.pyramid = t.elapsed();
    trace.counts.pyramid_levels = levels.len();

    let t = Instant::now();
    let mut pooled = Vec::new();
    for level in &levels {
        let proposals = generate_proposals(level, &networks.proposal, config.thresholds[0])?;
        trace.counts.proposals += proposals.len();
        pooled.extend(nms(&proposals, config.nms_within_level, NmsMode::Union));
    }
    trace.counts.level_nms = pooled.len();
    let stage1: Vec<FaceCandidate> = nms(&pooled, config.nms_across_levels, NmsMode::Union)
        .into_iter()
        .filter_map(|c| {
            calibrate(&c.bbox, &c.offsets).map(|bbox| FaceCandidate { bbox, ..c })
        })
        .collect();
    trace.counts.stage1 = stage1.len();
    trace.timings.proposal = t.elapsed();

    let t = Instant::now();
    let stage2 = refine_stage(frame, &stage1, &networks.refine, config.thresholds[1])?;
    let stage2 = nms(&stage2, config.nms_refine, NmsMode::Union);
    trace.counts.stage2 = stage2.len();
    trace.timings.refine = t.elapsed();

    let t = Instant::now();
    let stage3 = refine_stage(frame, &stage2, &networks.output, config.thresholds[2])?;
    let stage3 = nms(&stage3, config.nms_output, NmsMode::Min);
    trace.counts.stage3 = stage3.len();
    trace.timings.output = t.elapsed();

    let faces: Vec<FaceCandidate> = stage3
        .into_iter()
        .filter_map(|c| {
            c.bbox
                .clamped(width as f32, height as f32)
                .map(|bbox| FaceCandidate { bbox, ..c })
        })
        .collect();
    trace.counts.final_count = faces.len();
    Ok((faces, trace))
}
