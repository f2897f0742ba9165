//! Detector training objectives: squared Euclidean losses for box and
//! landmark regression, binary cross-entropy for face classification, and
//! their weighted sum. Everything here is `f64`.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Probabilities are clamped into `[PROB_EPS, 1 - PROB_EPS]` before `ln`.
pub const PROB_EPS: f64 = 1e-7;

/// `‖pred − target‖²` and its gradient `2 (pred − target)`.
pub fn euclidean<const N: usize>(pred: &[f64; N], target: &[f64; N]) -> Result<(f64, [f64; N])> {
    if pred.iter().chain(target).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("regression loss needs finite inputs".into()));
    }
    let diff: [f64; N] = std::array::from_fn(|i| pred[i] - target[i]);
    let loss = diff.iter().map(|d| d * d).sum();
    Ok((loss, diff.map(|d| 2.0 * d)))
}

pub fn loss_box(pred: &[f64; 4], target: &[f64; 4]) -> Result<(f64, [f64; 4])> {
    euclidean(pred, target)
}

/// Landmarks are five `(x, y)` points flattened as `x0, y0, .., x4, y4`.
pub fn loss_landmark(pred: &[f64; 10], target: &[f64; 10]) -> Result<(f64, [f64; 10])> {
    euclidean(pred, target)
}

/// Binary cross-entropy `−(y ln p + (1 − y) ln(1 − p))` of the face
/// probability `p`, and `dL/dp` at the clamped point.
pub fn loss_det(p: f64, y: f64) -> Result<(f64, f64)> {
    if y != 0.0 && y != 1.0 {
        return Err(Error::InvalidArgument(format!("detection label must be 0 or 1, got {y}")));
    }
    if !p.is_finite() {
        return Err(Error::InvalidArgument(format!("face probability must be finite, got {p}")));
    }
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    let loss = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    let grad = -(y / p - (1.0 - y) / (1.0 - p));
    Ok((loss, grad))
}

/// Which targets a sample defines.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TaskMask {
    pub det: bool,
    pub bbox: bool,
    pub landmark: bool,
}

/// One training example of the detector. A `None` target means the task is
/// not supervised for this sample.
#[derive(Clone, Debug)]
pub struct TrainingSample {
    pub input: Tensor,
    y_det: Option<f64>,
    pub y_box: Option<[f64; 4]>,
    pub y_landmark: Option<[f64; 10]>,
}

impl TrainingSample {
    pub fn new(
        input: Tensor,
        y_det: Option<u8>,
        y_box: Option<[f64; 4]>,
        y_landmark: Option<[f64; 10]>,
    ) -> Result<Self> {
        if let Some(y) = y_det {
            if y > 1 {
                return Err(Error::InvalidArgument(format!("detection label must be 0 or 1, got {y}")));
            }
        }
        Ok(TrainingSample {
            input,
            y_det: y_det.map(f64::from),
            y_box,
            y_landmark,
        })
    }

    pub fn y_det(&self) -> Option<f64> {
        self.y_det
    }

    pub fn mask(&self) -> TaskMask {
        TaskMask {
            det: self.y_det.is_some(),
            bbox: self.y_box.is_some(),
            landmark: self.y_landmark.is_some(),
        }
    }
}

/// Network outputs for one sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaskOutputs {
    /// Face probability.
    pub p: f64,
    pub bbox: [f64; 4],
    pub landmark: [f64; 10],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaskWeights {
    pub det: f64,
    pub bbox: f64,
    pub landmark: f64,
}

impl Default for TaskWeights {
    fn default() -> Self {
        TaskWeights {
            det: 1.0,
            bbox: 0.5,
            landmark: 0.5,
        }
    }
}

/// Per-task losses (unweighted, `None` outside the mask), the weighted
/// total, and gradients of the total with respect to each output.
#[derive(Clone, Debug, PartialEq)]
pub struct LossReport {
    pub det: Option<f64>,
    pub bbox: Option<f64>,
    pub landmark: Option<f64>,
    pub total: f64,
    pub grad_p: f64,
    pub grad_bbox: [f64; 4],
    pub grad_landmark: [f64; 10],
}

pub fn multitask_loss(sample: &TrainingSample, outputs: &TaskOutputs, weights: &TaskWeights) -> Result<LossReport> {
    if [weights.det, weights.bbox, weights.landmark]
        .iter()
        .any(|w| !w.is_finite() || *w < 0.0)
    {
        return Err(Error::InvalidArgument(format!("task weights must be non-negative, got {weights:?}")));
    }
    let mut report = LossReport {
        det: None,
        bbox: None,
        landmark: None,
        total: 0.0,
        grad_p: 0.0,
        grad_bbox: [0.0; 4],
        grad_landmark: [0.0; 10],
    };
    if let Some(y) = sample.y_det {
        let (l, g) = loss_det(outputs.p, y)?;
        report.det = Some(l);
        report.total += weights.det * l;
        report.grad_p = weights.det * g;
    }
    if let Some(y) = &sample.y_box {
        let (l, g) = loss_box(&outputs.bbox, y)?;
        report.bbox = Some(l);
        report.total += weights.bbox * l;
        report.grad_bbox = g.map(|v| weights.bbox * v);
    }
    if let Some(y) = &sample.y_landmark {
        let (l, g) = loss_landmark(&outputs.landmark, y)?;
        report.landmark = Some(l);
        report.total += weights.landmark * l;
        report.grad_landmark = g.map(|v| weights.landmark * v);
    }
    Ok(report)
}

/// Central finite difference of `f` at `x` with step `h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
