#ifndef CASCADET_H
#define CASCADET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Classifier verdict.
 */
typedef enum CascadetLabel {
  CASCADET_LABEL_MASK = 0,
  CASCADET_LABEL_NO_MASK = 1,
} CascadetLabel;

/*
 Result of every fallible call.
 */
typedef enum CascadetStatus {
  CASCADET_STATUS_OK = 0,
  /*
   A required pointer argument was null.
   */
  CASCADET_STATUS_NULL_POINTER = 1,
  CASCADET_STATUS_INVALID_ARGUMENT = 2,
  /*
   A file could not be read.
   */
  CASCADET_STATUS_IO = 3,
  /*
   A weight archive failed its checksum.
   */
  CASCADET_STATUS_CHECKSUM = 4,
  /*
   Malformed weight archive or weights that do not fit the network.
   */
  CASCADET_STATUS_FORMAT = 5,
  /*
   An image or tensor of the wrong size.
   */
  CASCADET_STATUS_SHAPE = 6,
  /*
   The caller's output buffer is too small; the needed count was written.
   */
  CASCADET_STATUS_BUFFER_TOO_SMALL = 7,
  /*
   A bug inside the library.
   */
  CASCADET_STATUS_INTERNAL = 8,
} CascadetStatus;

/*
 Mask classifier alone.
 */
typedef struct CascadetClassifier CascadetClassifier;

/*
 Detector plus mask classifier.
 */
typedef struct CascadetDetector CascadetDetector;

/*
 One classified face, box in whole pixels.
 */
typedef struct CascadetDetection {
  uint32_t x1;
  uint32_t y1;
  uint32_t x2;
  uint32_t y2;
  enum CascadetLabel label;
  /*
   Probability of `label`.
   */
  float confidence;
  /*
   Face probability from the detector.
   */
  float face_score;
} CascadetDetection;

/*
 Axis-aligned box in pixels, `x2 > x1` and `y2 > y1`.
 */
typedef struct CascadetBox {
  float x1;
  float y1;
  float x2;
  float y2;
} CascadetBox;

typedef struct CascadetCounts {
  uint64_t tp;
  uint64_t tn;
  uint64_t fp;
  uint64_t fn_;
} CascadetCounts;

/*
 A percentage; `defined` is false when its denominator is zero, and
 `value` is then 0.
 */
typedef struct CascadetMetric {
  double value;
  bool defined;
} CascadetMetric;

typedef struct CascadetMetrics {
  struct CascadetMetric precision;
  struct CascadetMetric recall;
  struct CascadetMetric accuracy;
} CascadetMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *cascadet_version(void);

/*
 Copies the calling thread's last error message into `buf` (truncated
 and always NUL-terminated when `len > 0`). Returns the buffer size
 needed for the whole message including the terminator. The message is
 empty after a successful call.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
size_t cascadet_last_error_message(char *buf, size_t len);

/*
 Loads both weight archives with default cascade and classifier
 settings. On success `*out` owns a new handle.

 # Safety
 Paths must be NUL-terminated strings; `out` must be writable.
 */
enum CascadetStatus cascadet_detector_load(const char *cascade_weights,
                                           const char *classifier_weights,
                                           struct CascadetDetector **out);

/*
 Releases a detector. Null is ignored.

 # Safety
 `detector` must come from [`cascadet_detector_load`] and not be used again.
 */
void cascadet_detector_free(struct CascadetDetector *detector);

/*
 Detects and classifies every face in an RGB image, best face score
 first. `*count` receives the number of detections. When it exceeds
 `capacity` nothing is written to `out` and the status is
 `BUFFER_TOO_SMALL`; pass `out = NULL, capacity = 0` to query the count.

 # Safety
 `rgb` must hold `3 * width * height` bytes; `out` must be null or hold
 `capacity` elements; `count` must be writable.
 */
enum CascadetStatus cascadet_detector_detect(const struct CascadetDetector *detector,
                                             const uint8_t *rgb,
                                             size_t width,
                                             size_t height,
                                             struct CascadetDetection *out,
                                             size_t capacity,
                                             size_t *count);

/*
 Loads a classifier archive with the default backbone.

 # Safety
 `weights` must be a NUL-terminated string; `out` must be writable.
 */
enum CascadetStatus cascadet_classifier_load(const char *weights, struct CascadetClassifier **out);

/*
 Releases a classifier. Null is ignored.

 # Safety
 `classifier` must come from [`cascadet_classifier_load`] and not be used again.
 */
void cascadet_classifier_free(struct CascadetClassifier *classifier);

/*
 Classifies the face inside `face` (square-padded, then resized).

 # Safety
 `rgb` must hold `3 * width * height` bytes; `label` and `confidence`
 must be writable.
 */
enum CascadetStatus cascadet_classifier_classify(const struct CascadetClassifier *classifier,
                                                 const uint8_t *rgb,
                                                 size_t width,
                                                 size_t height,
                                                 struct CascadetBox face,
                                                 enum CascadetLabel *label,
                                                 float *confidence);

/*
 Intersection over union; 0 for disjoint or degenerate boxes.
 */
float cascadet_iou(struct CascadetBox a, struct CascadetBox b);

/*
 Precision, recall and accuracy in percent from confusion counts.

 # Safety
 `out` must be writable.
 */
enum CascadetStatus cascadet_metrics(struct CascadetCounts counts, struct CascadetMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CASCADET_H */
