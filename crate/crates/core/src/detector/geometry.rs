//! Boxes, overlap measures, non-maximum suppression and box regression.

use serde::{Deserialize, Serialize};

/// Axis-aligned box in frame pixels, origin top-left, `x2 > x1`, `y2 > y1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x1: f32,
    pub y1: f32,
    pub x2: f32,
    pub y2: f32,
}

impl BoundingBox {
    pub fn new(x1: f32, y1: f32, x2: f32, y2: f32) -> Self {
        BoundingBox { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> f32 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f32 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f32 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    /// Finite coordinates with positive width and height.
    pub fn is_valid(&self) -> bool {
        [self.x1, self.y1, self.x2, self.y2].iter().all(|v| v.is_finite())
            && self.x2 > self.x1
            && self.y2 > self.y1
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f32 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn scaled(&self, factor: f32) -> BoundingBox {
        BoundingBox::new(self.x1 * factor, self.y1 * factor, self.x2 * factor, self.y2 * factor)
    }

    /// Intersection with `[0, width] x [0, height]`; `None` if nothing is left.
    pub fn clamped(&self, width: f32, height: f32) -> Option<BoundingBox> {
        let b = BoundingBox::new(
            self.x1.clamp(0.0, width),
            self.y1.clamp(0.0, height),
            self.x2.clamp(0.0, width),
            self.y2.clamp(0.0, height),
        );
        b.is_valid().then_some(b)
    }
}

/// Normalized regression offsets, in units of box width and height.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegressionOffsets {
    pub dx1: f32,
    pub dy1: f32,
    pub dx2: f32,
    pub dy2: f32,
}

impl RegressionOffsets {
    pub fn new(dx1: f32, dy1: f32, dx2: f32, dy2: f32) -> Self {
        RegressionOffsets { dx1, dy1, dx2, dy2 }
    }
}

/// Five facial keypoints in frame pixels: left eye, right eye, nose, left
/// and right mouth corner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landmarks(pub [(f32, f32); 5]);

#[derive(Clone, Debug, PartialEq)]
pub struct FaceCandidate {
    pub bbox: BoundingBox,
    /// Face probability in `[0, 1]`.
    pub score: f32,
    pub offsets: RegressionOffsets,
    pub landmarks: Option<Landmarks>,
}

impl FaceCandidate {
    pub fn new(bbox: BoundingBox, score: f32) -> Self {
        FaceCandidate {
            bbox,
            score,
            offsets: RegressionOffsets::default(),
            landmarks: None,
        }
    }
}

/// Intersection over union; 0 for disjoint or degenerate boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f32 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NmsMode {
    /// Intersection over union.
    Union,
    /// Intersection over the smaller area.
    Min,
}

pub fn overlap(a: &BoundingBox, b: &BoundingBox, mode: NmsMode) -> f32 {
    match mode {
        NmsMode::Union => iou(a, b),
        NmsMode::Min => {
            let inter = a.intersection_area(b);
            let smaller = a.area().min(b.area());
            if smaller <= 0.0 {
                0.0
            } else {
                inter / smaller
            }
        }
    }
}

/// Indices into `scores` sorted by descending score, ties by lower index.
pub fn score_order(scores: impl Iterator<Item = f32>) -> Vec<usize> {
    let scores: Vec<f32> = scores.collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Greedy suppression: keep the best remaining candidate and drop every
/// other whose overlap with it exceeds `threshold`. Survivors come back in
/// descending score order.
pub fn nms(candidates: &[FaceCandidate], threshold: f32, mode: NmsMode) -> Vec<FaceCandidate> {
    nms_indices(candidates, threshold, mode)
        .into_iter()
        .map(|i| candidates[i].clone())
        .collect()
}

/// Like [`nms`] but returns the surviving input indices.
pub fn nms_indices(candidates: &[FaceCandidate], threshold: f32, mode: NmsMode) -> Vec<usize> {
    let order = score_order(candidates.iter().map(|c| c.score));
    let mut suppressed = vec![false; candidates.len()];
    let mut keep = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        keep.push(i);
        for &j in &order[pos + 1..] {
            if !suppressed[j] && overlap(&candidates[i].bbox, &candidates[j].bbox, mode) > threshold {
                suppressed[j] = true;
            }
        }
    }
    keep
}

/// Shifts each edge by its offset times the box width or height. `None`
/// when the result has no area.
pub fn calibrate(bbox: &BoundingBox, offsets: &RegressionOffsets) -> Option<BoundingBox> {
    let w = bbox.width();
    let h = bbox.height();
    let out = BoundingBox::new(
        bbox.x1 + offsets.dx1 * w,
        bbox.y1 + offsets.dy1 * h,
        bbox.x2 + offsets.dx2 * w,
        bbox.y2 + offsets.dy2 * h,
    );
    out.is_valid().then_some(out)
}

/// Smallest square with the same center and side `max(w, h)`.
pub fn square_pad(bbox: &BoundingBox) -> BoundingBox {
    let side = bbox.width().max(bbox.height());
    let cx = (bbox.x1 + bbox.x2) / 2.0;
    let cy = (bbox.y1 + bbox.y2) / 2.0;
    let half = side / 2.0;
    BoundingBox::new(cx - half, cy - half, cx + half, cy + half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cand(x1: f32, y1: f32, x2: f32, y2: f32, score: f32) -> FaceCandidate {
        FaceCandidate::new(BoundingBox::new(x1, y1, x2, y2), score)
    }

    /// Counts unit pixels covered by integer-aligned boxes.
    fn raster_iou(a: [i32; 4], b: [i32; 4]) -> f64 {
        let (mut inter, mut union) = (0u32, 0u32);
        for y in a[1].min(b[1])..a[3].max(b[3]) {
            for x in a[0].min(b[0])..a[2].max(b[2]) {
                let ia = x >= a[0] && x < a[2] && y >= a[1] && y < a[3];
                let ib = x >= b[0] && x < b[2] && y >= b[1] && y < b[3];
                inter += u32::from(ia && ib);
                union += u32::from(ia || ib);
            }
        }
        inter as f64 / union as f64
    }

    #[test]
    fn iou_examples() {
        let a = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &BoundingBox::new(20.0, 20.0, 30.0, 30.0)), 0.0);
        let b = BoundingBox::new(5.0, 5.0, 15.0, 15.0);
        assert!((iou(&a, &b) as f64 - 25.0 / 175.0).abs() < 1e-6);
        assert!((raster_iou([0, 0, 10, 10], [5, 5, 15, 15]) - 25.0 / 175.0).abs() < 1e-12);
    }

    #[test]
    fn nms_examples() {
        let one = vec![cand(0.0, 0.0, 5.0, 5.0, 0.3)];
        assert_eq!(nms(&one, 0.5, NmsMode::Union), one);
        let two = vec![cand(0.0, 0.0, 5.0, 5.0, 0.8), cand(0.0, 0.0, 5.0, 5.0, 0.9)];
        let kept = nms(&two, 0.5, NmsMode::Union);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].score, 0.9);
        assert!(nms(&[], 0.5, NmsMode::Min).is_empty());
    }

    #[test]
    fn nms_ties_prefer_lower_index() {
        let c = vec![cand(0.0, 0.0, 5.0, 5.0, 0.5), cand(0.0, 0.0, 5.0, 5.1, 0.5)];
        assert_eq!(nms_indices(&c, 0.5, NmsMode::Union), vec![0]);
    }

    #[test]
    fn min_mode_suppresses_nested_boxes() {
        let c = vec![cand(0.0, 0.0, 20.0, 20.0, 0.9), cand(2.0, 2.0, 6.0, 6.0, 0.8)];
        assert_eq!(nms(&c, 0.5, NmsMode::Union).len(), 2);
        assert_eq!(nms(&c, 0.5, NmsMode::Min).len(), 1);
    }

    #[test]
    fn calibrate_examples() {
        let b = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(calibrate(&b, &RegressionOffsets::default()), Some(b));
        assert_eq!(
            calibrate(&b, &RegressionOffsets::new(0.1, 0.1, -0.1, -0.1)),
            Some(BoundingBox::new(1.0, 1.0, 9.0, 9.0))
        );
        assert_eq!(calibrate(&b, &RegressionOffsets::new(0.6, 0.0, -0.6, 0.0)), None);
    }

    #[test]
    fn square_pad_examples() {
        let sq = BoundingBox::new(3.0, 4.0, 13.0, 14.0);
        assert_eq!(square_pad(&sq), sq);
        assert_eq!(
            square_pad(&BoundingBox::new(0.0, 0.0, 10.0, 20.0)),
            BoundingBox::new(-5.0, 0.0, 15.0, 20.0)
        );
    }

    fn arb_int_box() -> impl Strategy<Value = [i32; 4]> {
        (0..40i32, 0..40i32, 1..25i32, 1..25i32).prop_map(|(x, y, w, h)| [x, y, x + w, y + h])
    }

    fn to_box(b: [i32; 4]) -> BoundingBox {
        BoundingBox::new(b[0] as f32, b[1] as f32, b[2] as f32, b[3] as f32)
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_matches_raster(a in arb_int_box(), b in arb_int_box()) {
            let (ba, bb) = (to_box(a), to_box(b));
            prop_assert_eq!(iou(&ba, &bb), iou(&bb, &ba));
            prop_assert!((iou(&ba, &bb) as f64 - raster_iou(a, b)).abs() <= 1e-6);
            prop_assert_eq!(iou(&ba, &bb) == 1.0, a == b);
        }

        #[test]
        fn square_pad_is_square(x in -50f32..50.0, y in -50f32..50.0, w in 0.5f32..40.0, h in 0.5f32..40.0) {
            let s = square_pad(&BoundingBox::new(x, y, x + w, y + h));
            prop_assert!((s.width() - s.height()).abs() <= 1e-4);
        }

        #[test]
        fn calibrate_commutes_with_scaling(
            x in 0f32..100.0, y in 0f32..100.0, w in 1f32..50.0, h in 1f32..50.0,
            d in prop::array::uniform4(-0.3f32..0.3), alpha in 0.25f32..4.0,
        ) {
            let b = BoundingBox::new(x, y, x + w, y + h);
            let o = RegressionOffsets::new(d[0], d[1], d[2], d[3]);
            let lhs = calibrate(&b.scaled(alpha), &o).unwrap();
            let rhs = calibrate(&b, &o).unwrap().scaled(alpha);
            for (p, q) in [(lhs.x1, rhs.x1), (lhs.y1, rhs.y1), (lhs.x2, rhs.x2), (lhs.y2, rhs.y2)] {
                prop_assert!((p - q).abs() <= 1e-4 * p.abs().max(1.0));
            }
        }

        #[test]
        fn nms_is_idempotent_subset(boxes in prop::collection::vec((arb_int_box(), 0f32..1.0), 0..30), t in 0.1f32..0.9) {
            let c: Vec<_> = boxes.iter().map(|(b, s)| FaceCandidate::new(to_box(*b), *s)).collect();
            let once = nms(&c, t, NmsMode::Union);
            prop_assert_eq!(&nms(&once, t, NmsMode::Union), &once);
            for k in &once {
                prop_assert!(c.contains(k));
            }
            for (i, a) in once.iter().enumerate() {
                for b in &once[i + 1..] {
                    prop_assert!(iou(&a.bbox, &b.bbox) <= t);
                }
            }
        }
    }
}
