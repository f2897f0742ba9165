//! Matching detections against ground truth, precision / recall /
//! accuracy for the face and mask tasks, and comparison tables.
//!
//! Face task: a matched detection is a true positive, an unmatched
//! detection a false positive, an unmatched truth a false negative. There
//! is no true-negative unit, so TN stays 0. Mask task: counted over matched
//! pairs with `Mask` as the positive class.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::classifier::MaskLabel;
use crate::detector::iou;
use crate::record::{Detection, GroundTruthEntry};

pub const DEFAULT_IOU_THRESHOLD: f32 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.tn += o.tn;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TaskCounts {
    pub face: ConfusionCounts,
    pub mask: ConfusionCounts,
}

impl std::ops::AddAssign for TaskCounts {
    fn add_assign(&mut self, o: Self) {
        self.face += o.face;
        self.mask += o.mask;
    }
}

/// Content order of detections: descending face score, then box, label
/// and confidence. Records equal under it are interchangeable.
pub fn detection_order(a: &Detection, b: &Detection) -> Ordering {
    b.face_score
        .total_cmp(&a.face_score)
        .then((a.x1, a.y1, a.x2, a.y2).cmp(&(b.x1, b.y1, b.x2, b.y2)))
        .then(a.label.index().cmp(&b.label.index()))
        .then(a.confidence.total_cmp(&b.confidence))
}

/// Content order of truths: box, then label.
pub fn truth_order(a: &GroundTruthEntry, b: &GroundTruthEntry) -> Ordering {
    [a.x1, a.y1, a.x2, a.y2]
        .iter()
        .zip([b.x1, b.y1, b.x2, b.y2])
        .fold(Ordering::Equal, |acc, (x, y)| acc.then(x.total_cmp(&y)))
        .then(a.label.index().cmp(&b.label.index()))
}

/// Greedy matching inside one frame. Detections are visited in
/// [`detection_order`] (stable); each takes the unmatched truth of highest
/// IoU at or above `threshold`, ties going to the first in [`truth_order`].
/// The result does not depend on input order. Returns the matched truth
/// index per detection.
pub fn match_frame(detections: &[&Detection], truths: &[&GroundTruthEntry], threshold: f32) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detection_order(detections[a], detections[b]));
    let mut taken = vec![false; truths.len()];
    let mut assignment = vec![None; detections.len()];
    for d in order {
        let bbox = detections[d].bbox();
        let mut best: Option<(usize, f32)> = None;
        for (t, truth) in truths.iter().enumerate() {
            if taken[t] {
                continue;
            }
            let o = iou(&bbox, &truth.bbox());
            let better = best.is_none_or(|(bt, b)| o > b || (o == b && truth_order(truth, truths[bt]).is_lt()));
            if o >= threshold && better {
                best = Some((t, o));
            }
        }
        if let Some((t, _)) = best {
            taken[t] = true;
            assignment[d] = Some(t);
        }
    }
    assignment
}

fn count_frame(detections: &[&Detection], truths: &[&GroundTruthEntry], threshold: f32) -> TaskCounts {
    let assignment = match_frame(detections, truths, threshold);
    let mut c = TaskCounts::default();
    for (d, m) in assignment.iter().enumerate() {
        let Some(t) = m else {
            c.face.fp += 1;
            continue;
        };
        c.face.tp += 1;
        match (detections[d].label, truths[*t].label) {
            (MaskLabel::Mask, MaskLabel::Mask) => c.mask.tp += 1,
            (MaskLabel::NoMask, MaskLabel::NoMask) => c.mask.tn += 1,
            (MaskLabel::Mask, MaskLabel::NoMask) => c.mask.fp += 1,
            (MaskLabel::NoMask, MaskLabel::Mask) => c.mask.fn_ += 1,
        }
    }
    c.face.fn_ = (truths.len() as u64) - c.face.tp;
    c
}

/// Per-frame counts keyed by frame index; frames with neither detections
/// nor truths are absent.
pub fn match_by_frame(
    detections: &[Detection],
    truths: &[GroundTruthEntry],
    threshold: f32,
) -> BTreeMap<usize, TaskCounts> {
    let mut frames: BTreeMap<usize, (Vec<&Detection>, Vec<&GroundTruthEntry>)> = BTreeMap::new();
    for d in detections {
        frames.entry(d.frame).or_default().0.push(d);
    }
    for t in truths {
        frames.entry(t.frame).or_default().1.push(t);
    }
    frames
        .into_iter()
        .map(|(f, (d, t))| (f, count_frame(&d, &t, threshold)))
        .collect()
}

pub fn match_detections(detections: &[Detection], truths: &[GroundTruthEntry], threshold: f32) -> TaskCounts {
    let mut total = TaskCounts::default();
    for c in match_by_frame(detections, truths, threshold).into_values() {
        total += c;
    }
    total
}

/// Percentages; `None` where the denominator is zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Metrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: Option<f64>,
}

fn percent(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    Metrics {
        precision: percent(c.tp, c.tp + c.fp),
        recall: percent(c.tp, c.tp + c.fn_),
        accuracy: percent(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn_),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub counts: TaskCounts,
    pub face: Metrics,
    pub mask: Metrics,
}

pub fn compute_metrics(counts: &TaskCounts) -> EvalReport {
    EvalReport {
        counts: *counts,
        face: metrics(&counts.face),
        mask: metrics(&counts.mask),
    }
}

/// Figures as printed in the literature (percent, without the sign);
/// `None` where not reported.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReportedMetrics {
    pub precision: Option<&'static str>,
    pub recall: Option<&'static str>,
    pub accuracy: Option<&'static str>,
}

impl ReportedMetrics {
    pub fn to_metrics(&self) -> Metrics {
        let parse = |v: Option<&str>| v.map(|s| s.parse::<f64>().expect("baseline constants are numeric"));
        Metrics {
            precision: parse(self.precision),
            recall: parse(self.recall),
            accuracy: parse(self.accuracy),
        }
    }
}

/// A comparison row whose figures come from published work.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Baseline {
    pub name: &'static str,
    pub face: ReportedMetrics,
    pub mask: ReportedMetrics,
}

/// Cascaded mask-detection framework (mask accuracy and recall only).
pub fn cascaded_baselines() -> Vec<Baseline> {
    vec![Baseline {
        name: "Cascaded framework",
        face: ReportedMetrics::default(),
        mask: ReportedMetrics {
            precision: None,
            recall: Some("87.8"),
            accuracy: Some("86.6"),
        },
    }]
}

/// RetinaFaceMask with a MobileNet backbone.
pub fn retinafacemask_baselines() -> Vec<Baseline> {
    vec![Baseline {
        name: "RetinaFaceMask (MobileNet)",
        face: ReportedMetrics {
            precision: Some("83.0"),
            recall: Some("95.6"),
            accuracy: None,
        },
        mask: ReportedMetrics {
            precision: Some("82.3"),
            recall: Some("89.1"),
            accuracy: None,
        },
    }]
}

/// Figures published for the original trained MTCNN detector and
/// MobileNetV2 classifier on their own video dataset.
pub fn published_reference() -> Baseline {
    Baseline {
        name: "Published MTCNN+MobileNetV2",
        face: ReportedMetrics {
            precision: Some("94.50"),
            recall: Some("86.38"),
            accuracy: Some("81.84"),
        },
        mask: ReportedMetrics {
            precision: Some("84.39"),
            recall: Some("80.92"),
            accuracy: Some("81.74"),
        },
    }
}

pub fn all_baselines() -> Vec<Baseline> {
    let mut b = vec![published_reference()];
    b.extend(cascaded_baselines());
    b.extend(retinafacemask_baselines());
    b
}

const HEADER: [&str; 8] = [
    "approach",
    "source",
    "face_precision",
    "face_recall",
    "face_accuracy",
    "mask_precision",
    "mask_recall",
    "mask_accuracy",
];

fn rows(report: &EvalReport, baselines: &[Baseline]) -> Vec<Vec<String>> {
    let measured = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.2}"));
    let reported = |v: Option<&str>| v.unwrap_or("-").to_string();
    let mut row = vec!["This run".to_string(), "measured".to_string()];
    for m in [&report.face, &report.mask] {
        row.extend([measured(m.precision), measured(m.recall), measured(m.accuracy)]);
    }
    let mut rows = vec![row];
    for b in baselines {
        let mut row = vec![b.name.to_string(), "reported".to_string()];
        for m in [&b.face, &b.mask] {
            row.extend([reported(m.precision), reported(m.recall), reported(m.accuracy)]);
        }
        rows.push(row);
    }
    rows
}

/// Aligned plain-text table. Measured metrics with a zero denominator
/// print as `undefined`; metrics a baseline did not report print as `-`.
pub fn render_text(report: &EvalReport, baselines: &[Baseline]) -> String {
    let rows = rows(report, baselines);
    let widths: Vec<usize> = (0..HEADER.len())
        .map(|i| rows.iter().map(|r| r[i].len()).chain([HEADER[i].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[&str]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = String::new();
    let c = &report.counts;
    let _ = writeln!(out, "face: TP={} FP={} FN={} TN={}", c.face.tp, c.face.fp, c.face.fn_, c.face.tn);
    let _ = writeln!(out, "mask: TP={} FP={} FN={} TN={}", c.mask.tp, c.mask.fp, c.mask.fn_, c.mask.tn);
    let _ = writeln!(out, "{}", line(&HEADER));
    for r in &rows {
        let refs: Vec<&str> = r.iter().map(String::as_str).collect();
        let _ = writeln!(out, "{}", line(&refs));
    }
    if !baselines.is_empty() {
        let _ = writeln!(out, "reported rows are literature values, not measured here");
    }
    out
}

/// CSV with a header and one row per approach, measured row first.
pub fn render_csv(report: &EvalReport, baselines: &[Baseline]) -> String {
    let mut out = HEADER.join(",");
    out.push('\n');
    for r in rows(report, baselines) {
        let quoted: Vec<String> = r
            .iter()
            .map(|c| if c.contains(',') { format!("\"{c}\"") } else { c.clone() })
            .collect();
        out.push_str(&quoted.join(","));
        out.push('\n');
    }
    out
}
