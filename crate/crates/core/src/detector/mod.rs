//! Three-stage cascaded face detector.

pub mod cascade;
pub mod geometry;
pub mod image;
pub mod stages;

pub use cascade::{
    detect_faces, detect_faces_traced, generate_proposals, refine_stage, CascadeCounts, CascadeTimings, CascadeTrace,
};
pub use geometry::{
    calibrate, iou, nms, nms_indices, overlap, square_pad, BoundingBox, FaceCandidate, Landmarks, NmsMode,
    RegressionOffsets,
};
pub use image::{build_image_pyramid, crop_resize, normalize_pixels, pyramid_scales, PyramidLevel};
pub use stages::{cascade_param_specs, CascadeNetworks, Stage, StageNetwork};

use crate::error::{Error, Result};

/// Tunables of the cascade. Defaults follow the common MTCNN settings.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeConfig {
    /// Smallest face side, in frame pixels, the pyramid is built to find.
    pub min_face_size: usize,
    pub pyramid_factor: f32,
    /// Face-probability thresholds of the proposal, refine and output stages.
    pub thresholds: [f32; 3],
    pub nms_within_level: f32,
    pub nms_across_levels: f32,
    pub nms_refine: f32,
    /// Applied in intersection-over-minimum mode.
    pub nms_output: f32,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            min_face_size: 20,
            pyramid_factor: 0.709,
            thresholds: [0.6, 0.7, 0.7],
            nms_within_level: 0.5,
            nms_across_levels: 0.7,
            nms_refine: 0.7,
            nms_output: 0.7,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f32| v > 0.0 && v < 1.0;
        if self.min_face_size < image::PROPOSAL_WINDOW {
            return Err(Error::Config(format!(
                "min_face_size must be at least {}, got {}",
                image::PROPOSAL_WINDOW,
                self.min_face_size
            )));
        }
        if !open_unit(self.pyramid_factor) {
            return Err(Error::Config(format!(
                "pyramid_factor must lie in (0, 1), got {}",
                self.pyramid_factor
            )));
        }
        let all = self.thresholds.iter().chain([
            &self.nms_within_level,
            &self.nms_across_levels,
            &self.nms_refine,
            &self.nms_output,
        ]);
        if let Some(t) = all.into_iter().find(|t| !open_unit(**t)) {
            return Err(Error::Config(format!("thresholds must lie in (0, 1), got {t}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        CascadeConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            CascadeConfig { pyramid_factor: 1.0, ..Default::default() },
            CascadeConfig { min_face_size: 8, ..Default::default() },
            CascadeConfig { thresholds: [0.6, 0.0, 0.7], ..Default::default() },
            CascadeConfig { nms_output: 1.5, ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }
}
