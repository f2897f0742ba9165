//! C ABI over the cascadet engine.
//!
//! Handles are opaque and owned by the caller once created; release them
//! with the matching `_free` function. Every fallible call returns a
//! [`CascadetStatus`]; on failure a message is kept per thread and can be
//! copied out with [`cascadet_last_error_message`]. Panics never cross the
//! boundary.
//!
//! Images are 8-bit interleaved RGB, row-major, `3 * width * height` bytes.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use cascadet::classifier::{BackboneSpec, MaskClassifier, MaskLabel};
use cascadet::detector::{iou, BoundingBox, CascadeConfig, FaceCandidate};
use cascadet::eval::{metrics, ConfusionCounts};
use cascadet::pipeline::{Frame, Pipeline};
use cascadet::weights::WeightArchive;
use cascadet::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CascadetStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    InvalidArgument = 2,
    /// A file could not be read.
    Io = 3,
    /// A weight archive failed its checksum.
    Checksum = 4,
    /// Malformed weight archive or weights that do not fit the network.
    Format = 5,
    /// An image or tensor of the wrong size.
    Shape = 6,
    /// The caller's output buffer is too small; the needed count was written.
    BufferTooSmall = 7,
    /// A bug inside the library.
    Internal = 8,
}

/// Classifier verdict.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CascadetLabel {
    Mask = 0,
    NoMask = 1,
}

impl From<MaskLabel> for CascadetLabel {
    fn from(l: MaskLabel) -> Self {
        match l {
            MaskLabel::Mask => CascadetLabel::Mask,
            MaskLabel::NoMask => CascadetLabel::NoMask,
        }
    }
}

/// Axis-aligned box in pixels, `x2 > x1` and `y2 > y1`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CascadetBox {
    pub x1: f32,
    pub y1: f32,
    pub x2: f32,
    pub y2: f32,
}

/// One classified face, box in whole pixels.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CascadetDetection {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
    pub label: CascadetLabel,
    /// Probability of `label`.
    pub confidence: f32,
    /// Face probability from the detector.
    pub face_score: f32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CascadetCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

/// A percentage; `defined` is false when its denominator is zero, and
/// `value` is then 0.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CascadetMetric {
    pub value: f64,
    pub defined: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CascadetMetrics {
    pub precision: CascadetMetric,
    pub recall: CascadetMetric,
    pub accuracy: CascadetMetric,
}

/// Detector plus mask classifier.
pub struct CascadetDetector {
    pipeline: Pipeline,
}

/// Mask classifier alone.
pub struct CascadetClassifier {
    classifier: MaskClassifier,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
}

struct Failure(CascadetStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => CascadetStatus::Io,
            Error::ChecksumMismatch { .. } => CascadetStatus::Checksum,
            Error::BadMagic(_)
            | Error::UnsupportedVersion(_)
            | Error::Truncated(_)
            | Error::Format(_)
            | Error::MissingParameter(_)
            | Error::ParameterShape { .. }
            | Error::Config(_) => CascadetStatus::Format,
            Error::Shape { .. } => CascadetStatus::Shape,
            Error::InvalidArgument(_) => CascadetStatus::InvalidArgument,
            _ => CascadetStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: CascadetStatus, message: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, message.into()))
}

/// Runs `body`, recording the error message and turning panics into
/// [`CascadetStatus::Internal`].
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CascadetStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            CascadetStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("panic inside cascadet");
            CascadetStatus::Internal
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return fail(CascadetStatus::NullPointer, format!("{what} is null"));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => fail(CascadetStatus::InvalidArgument, format!("{what} is not UTF-8")),
    }
}

unsafe fn frame_arg(rgb: *const u8, width: usize, height: usize) -> Result<Frame, Failure> {
    if rgb.is_null() {
        return fail(CascadetStatus::NullPointer, "rgb is null");
    }
    let len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Failure(CascadetStatus::Shape, format!("{width}x{height} image is too large")))?;
    let pixels = std::slice::from_raw_parts(rgb, len).to_vec();
    Frame::new(0, width, height, pixels).map_err(|e| Failure(CascadetStatus::Shape, e.to_string()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cascadet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated
/// and always NUL-terminated when `len > 0`). Returns the buffer size
/// needed for the whole message including the terminator. The message is
/// empty after a successful call.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cascadet_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Loads both weight archives with default cascade and classifier
/// settings. On success `*out` owns a new handle.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cascadet_detector_load(
    cascade_weights: *const c_char,
    classifier_weights: *const c_char,
    out: *mut *mut CascadetDetector,
) -> CascadetStatus {
    guard(|| {
        if out.is_null() {
            return fail(CascadetStatus::NullPointer, "out is null");
        }
        *out = std::ptr::null_mut();
        let cascade = WeightArchive::load(path_arg(cascade_weights, "cascade_weights")?)?;
        let classifier = WeightArchive::load(path_arg(classifier_weights, "classifier_weights")?)?;
        let pipeline = Pipeline::new(&cascade, &classifier, CascadeConfig::default(), BackboneSpec::default())?;
        *out = Box::into_raw(Box::new(CascadetDetector { pipeline }));
        Ok(())
    })
}

/// Releases a detector. Null is ignored.
///
/// # Safety
/// `detector` must come from [`cascadet_detector_load`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn cascadet_detector_free(detector: *mut CascadetDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}

/// Detects and classifies every face in an RGB image, best face score
/// first. `*count` receives the number of detections. When it exceeds
/// `capacity` nothing is written to `out` and the status is
/// `BUFFER_TOO_SMALL`; pass `out = NULL, capacity = 0` to query the count.
///
/// # Safety
/// `rgb` must hold `3 * width * height` bytes; `out` must be null or hold
/// `capacity` elements; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cascadet_detector_detect(
    detector: *const CascadetDetector,
    rgb: *const u8,
    width: usize,
    height: usize,
    out: *mut CascadetDetection,
    capacity: usize,
    count: *mut usize,
) -> CascadetStatus {
    guard(|| {
        if detector.is_null() || count.is_null() {
            return fail(CascadetStatus::NullPointer, "detector or count is null");
        }
        *count = 0;
        let frame = frame_arg(rgb, width, height)?;
        let (detections, _) = (*detector).pipeline.process_frame(&frame)?;
        *count = detections.len();
        if detections.len() > capacity || (out.is_null() && !detections.is_empty()) {
            return fail(
                CascadetStatus::BufferTooSmall,
                format!("{} detections, buffer holds {capacity}", detections.len()),
            );
        }
        for (i, d) in detections.iter().enumerate() {
            *out.add(i) = CascadetDetection {
                x1: d.x1,
                y1: d.y1,
                x2: d.x2,
                y2: d.y2,
                label: d.label.into(),
                confidence: d.confidence,
                face_score: d.face_score,
            };
        }
        Ok(())
    })
}

/// Loads a classifier archive with the default backbone.
///
/// # Safety
/// `weights` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cascadet_classifier_load(
    weights: *const c_char,
    out: *mut *mut CascadetClassifier,
) -> CascadetStatus {
    guard(|| {
        if out.is_null() {
            return fail(CascadetStatus::NullPointer, "out is null");
        }
        *out = std::ptr::null_mut();
        let archive = WeightArchive::load(path_arg(weights, "weights")?)?;
        let classifier = MaskClassifier::build(BackboneSpec::default(), &archive)?;
        *out = Box::into_raw(Box::new(CascadetClassifier { classifier }));
        Ok(())
    })
}

/// Releases a classifier. Null is ignored.
///
/// # Safety
/// `classifier` must come from [`cascadet_classifier_load`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn cascadet_classifier_free(classifier: *mut CascadetClassifier) {
    if !classifier.is_null() {
        drop(Box::from_raw(classifier));
    }
}

/// Classifies the face inside `face` (square-padded, then resized).
///
/// # Safety
/// `rgb` must hold `3 * width * height` bytes; `label` and `confidence`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn cascadet_classifier_classify(
    classifier: *const CascadetClassifier,
    rgb: *const u8,
    width: usize,
    height: usize,
    face: CascadetBox,
    label: *mut CascadetLabel,
    confidence: *mut f32,
) -> CascadetStatus {
    guard(|| {
        if classifier.is_null() || label.is_null() || confidence.is_null() {
            return fail(CascadetStatus::NullPointer, "classifier, label or confidence is null");
        }
        let bbox = BoundingBox::new(face.x1, face.y1, face.x2, face.y2);
        if !bbox.is_valid() {
            return fail(CascadetStatus::InvalidArgument, format!("invalid box {face:?}"));
        }
        let frame = frame_arg(rgb, width, height)?;
        let faces = [FaceCandidate::new(bbox, 1.0)];
        let results = (*classifier).classifier.classify_all(&frame.to_tensor(), &faces)?;
        let (_, prediction) = &results[0];
        *label = prediction.label.into();
        *confidence = prediction.confidence;
        Ok(())
    })
}

/// Intersection over union; 0 for disjoint or degenerate boxes.
#[no_mangle]
pub extern "C" fn cascadet_iou(a: CascadetBox, b: CascadetBox) -> f32 {
    let bb = |c: CascadetBox| BoundingBox::new(c.x1, c.y1, c.x2, c.y2);
    catch_unwind(|| iou(&bb(a), &bb(b))).unwrap_or(0.0)
}

/// Precision, recall and accuracy in percent from confusion counts.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cascadet_metrics(counts: CascadetCounts, out: *mut CascadetMetrics) -> CascadetStatus {
    guard(|| {
        if out.is_null() {
            return fail(CascadetStatus::NullPointer, "out is null");
        }
        let m = metrics(&ConfusionCounts {
            tp: counts.tp,
            tn: counts.tn,
            fp: counts.fp,
            fn_: counts.fn_,
        });
        let metric = |v: Option<f64>| CascadetMetric {
            value: v.unwrap_or(0.0),
            defined: v.is_some(),
        };
        *out = CascadetMetrics {
            precision: metric(m.precision),
            recall: metric(m.recall),
            accuracy: metric(m.accuracy),
        };
        Ok(())
    })
}
