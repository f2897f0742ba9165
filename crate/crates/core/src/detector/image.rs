//! Resampling, pixel normalization and the image pyramid.
//!
//! Frames are `[1, 3, H, W]` tensors of raw 0..=255 channel values.
//! Network inputs are normalized with `(v - 127.5) / 128`.

use log::warn;

use super::geometry::BoundingBox;
use super::CascadeConfig;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const PIXEL_MEAN: f32 = 127.5;
pub const PIXEL_SCALE: f32 = 128.0;
/// Side of the proposal network's receptive window.
pub const PROPOSAL_WINDOW: usize = 12;
/// Stride of the proposal grid in scaled-image pixels.
pub const PROPOSAL_STRIDE: usize = 2;

/// Textual form of the normalization, stored in archive metadata.
pub const NORMALIZATION_TAG: &str = "(v-127.5)/128";

pub fn normalize_pixels(frame: &Tensor) -> Tensor {
    Tensor::new(
        frame.shape().to_vec(),
        frame
            .data()
            .iter()
            .map(|&v| (v - PIXEL_MEAN) / PIXEL_SCALE)
            .collect(),
    )
    .expect("same shape")
}

/// Bilinear resampling of the region `bbox` of `frame` onto an
/// `out_h x out_w` grid using pixel-center alignment. Samples outside the
/// frame read as zero.
pub fn resample_region(frame: &Tensor, bbox: &BoundingBox, out_h: usize, out_w: usize) -> Result<Tensor> {
    let [n, c, h, w] = frame.dims4()?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidArgument("resample target must be non-empty".into()));
    }
    let sy = bbox.height() as f64 / out_h as f64;
    let sx = bbox.width() as f64 / out_w as f64;
    // per-axis (lower index, fraction) pairs
    let taps = |origin: f32, step: f64, count: usize| -> Vec<(isize, f32)> {
        (0..count)
            .map(|i| {
                let pos = origin as f64 + (i as f64 + 0.5) * step - 0.5;
                let lo = pos.floor();
                (lo as isize, (pos - lo) as f32)
            })
            .collect()
    };
    let rows = taps(bbox.y1, sy, out_h);
    let cols = taps(bbox.x1, sx, out_w);
    let src = frame.data();
    let mut out = Vec::with_capacity(n * c * out_h * out_w);
    for plane in src.chunks_exact(h * w) {
        let at = |y: isize, x: isize| -> f32 {
            if y < 0 || x < 0 || y as usize >= h || x as usize >= w {
                0.0
            } else {
                plane[y as usize * w + x as usize]
            }
        };
        for &(y0, fy) in &rows {
            for &(x0, fx) in &cols {
                let a = at(y0, x0);
                let b = at(y0, x0 + 1);
                let c0 = at(y0 + 1, x0);
                let d = at(y0 + 1, x0 + 1);
                let top = a + (b - a) * fx;
                let bottom = c0 + (d - c0) * fx;
                out.push(top + (bottom - top) * fy);
            }
        }
    }
    Tensor::new(vec![n, c, out_h, out_w], out)
}

/// Square crop of `bbox` resized to `out_extent x out_extent`. Regions
/// outside the frame are zero.
pub fn crop_resize(frame: &Tensor, bbox: &BoundingBox, out_extent: usize) -> Result<Tensor> {
    resample_region(frame, bbox, out_extent, out_extent)
}

#[derive(Clone, Debug)]
pub struct PyramidLevel {
    pub scale: f32,
    /// Normalized, resampled frame.
    pub image: Tensor,
}

/// Scales `(12 / min_face) * factor^k` for every `k` with
/// `min(height, width) * scale >= 12`, largest first.
pub fn pyramid_scales(height: usize, width: usize, config: &CascadeConfig) -> Vec<f32> {
    let shortest = height.min(width) as f64;
    if shortest < config.min_face_size as f64 {
        return Vec::new();
    }
    let base = PROPOSAL_WINDOW as f64 / config.min_face_size as f64;
    let factor = config.pyramid_factor as f64;
    let mut scales = Vec::new();
    for k in 0.. {
        let s = base * factor.powi(k);
        if shortest * s < PROPOSAL_WINDOW as f64 {
            break;
        }
        scales.push(s as f32);
    }
    scales
}

/// Normalized copies of `frame` at every pyramid scale.
pub fn build_image_pyramid(frame: &Tensor, config: &CascadeConfig) -> Result<Vec<PyramidLevel>> {
    let [_, _, h, w] = frame.dims4()?;
    let scales = pyramid_scales(h, w, config);
    if scales.is_empty() {
        warn!(
            "{w}x{h} frame is smaller than the minimum face size {}; no pyramid levels",
            config.min_face_size
        );
    }
    let full = BoundingBox::new(0.0, 0.0, w as f32, h as f32);
    let normalized = normalize_pixels(frame);
    scales
        .into_iter()
        .map(|scale| {
            let sh = ((h as f64 * scale as f64).ceil() as usize).max(PROPOSAL_WINDOW);
            let sw = ((w as f64 * scale as f64).ceil() as usize).max(PROPOSAL_WINDOW);
            Ok(PyramidLevel {
                scale,
                image: resample_region(&normalized, &full, sh, sw)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::Lcg;

    fn config(min_face: usize) -> CascadeConfig {
        CascadeConfig {
            min_face_size: min_face,
            ..CascadeConfig::default()
        }
    }

    #[test]
    fn pyramid_scales_for_100px_frame() {
        // 0.6 * 0.709^k for k = 0..4; k = 5 gives 10.7 px < 12
        let want = [0.6, 0.4254, 0.301609, 0.213841, 0.151613];
        let got = pyramid_scales(100, 100, &config(20));
        assert_eq!(got.len(), 5);
        for (g, w) in got.iter().zip(want) {
            assert!((*g as f64 - w).abs() < 1e-4, "{g} vs {w}");
        }
    }

    #[test]
    fn pyramid_boundaries() {
        assert_eq!(pyramid_scales(12, 12, &config(12)), vec![1.0]);
        assert!(pyramid_scales(10, 10, &config(20)).is_empty());
        let frame = Tensor::zeros(&[1, 3, 10, 10]).unwrap();
        assert!(build_image_pyramid(&frame, &config(20)).unwrap().is_empty());
    }

    #[test]
    fn pyramid_levels_meet_window_floor() {
        let frame = Tensor::full(&[1, 3, 57, 91], 200.0).unwrap();
        let levels = build_image_pyramid(&frame, &config(20)).unwrap();
        assert!(!levels.is_empty());
        for pair in levels.windows(2) {
            assert!(pair[0].scale > pair[1].scale);
        }
        for l in &levels {
            let [_, _, h, w] = l.image.dims4().unwrap();
            assert!(h.min(w) >= PROPOSAL_WINDOW);
        }
        let next = levels.last().unwrap().scale * 0.709;
        assert!((57.0 * next) < 12.0);
    }

    #[test]
    fn crop_of_full_frame_is_identity() {
        let mut rng = Lcg::new(8);
        let data = (0..3 * 16 * 16).map(|_| rng.next_unit() as f32 * 255.0).collect();
        let frame = Tensor::new(vec![1, 3, 16, 16], data).unwrap();
        let crop = crop_resize(&frame, &BoundingBox::new(0.0, 0.0, 16.0, 16.0), 16).unwrap();
        assert!(crop.bit_eq(&frame));
    }

    #[test]
    fn crop_outside_frame_is_zero() {
        let frame = Tensor::full(&[1, 3, 8, 8], 9.0).unwrap();
        let crop = crop_resize(&frame, &BoundingBox::new(20.0, 20.0, 30.0, 30.0), 6).unwrap();
        assert!(crop.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn downscale_preserves_constant() {
        let frame = Tensor::full(&[1, 3, 20, 20], 77.25).unwrap();
        let crop = crop_resize(&frame, &BoundingBox::new(0.0, 0.0, 20.0, 20.0), 10).unwrap();
        assert!(crop.data().iter().all(|&v| v == 77.25));
    }

    #[test]
    fn normalization_maps_range() {
        let t = Tensor::vector(vec![0.0, 127.5, 255.0]);
        assert_eq!(normalize_pixels(&t).data(), &[-127.5 / 128.0, 0.0, 127.5 / 128.0]);
    }
}
