//! Deterministic fixtures: synthetic frames with ground truth, and seeded
//! weight archives for the cascade and the classifier.
//!
//! No trained weights ship with this crate. The fixture archives start
//! from [`random_init`] and then fit each classification head as a linear
//! probe on features of synthetic faces, so the fixture detector finds
//! the synthetic faces often enough to exercise every stage. Nothing here
//! aims at accuracy on real images.

use crate::classifier::{BackboneSpec, MaskLabel, CLASS_ORDER};
use crate::detector::image::NORMALIZATION_TAG;
use crate::detector::{
    build_image_pyramid, cascade_param_specs, crop_resize, iou, normalize_pixels, square_pad, BoundingBox,
    CascadeConfig, Stage, StageNetwork,
};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::Network;
use crate::pipeline::frame::{write_ppm, Frame};
use crate::record::{write_jsonl, GroundTruthEntry};
use crate::tensor::Tensor;
use crate::train::{train_head, HeadParams, LabeledFeature, TrainConfig};
use crate::weights::{random_init, Lcg, WeightArchive};

pub const FRAME_WIDTH: usize = 640;
pub const FRAME_HEIGHT: usize = 360;
/// Horizontal drift of every face per frame, in pixels.
const DRIFT: f32 = 3.0;
/// Scenes whose faces train the fixture classifier head.
const CLASSIFIER_SCENES: u64 = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct SceneFace {
    pub cx: f32,
    pub cy: f32,
    pub w: f32,
    pub h: f32,
    pub masked: bool,
    pub skin: [u8; 3],
    pub mask_color: [u8; 3],
}

/// A static arrangement of faces; frame `i` shifts every face right by
/// `3 i` pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub faces: Vec<SceneFace>,
}

impl Scene {
    /// Up to `count` non-overlapping faces, 44 to 110 px wide, leaving room
    /// for `frames` frames of drift.
    pub fn generate(width: usize, height: usize, count: usize, frames: usize, seed: u64) -> Scene {
        let mut rng = Lcg::new(seed ^ 0x5eed_f00d);
        let mut faces: Vec<SceneFace> = Vec::new();
        let drift = DRIFT * frames as f32;
        for _ in 0..count * 40 {
            if faces.len() == count {
                break;
            }
            let w = 44.0 + (rng.next_unit() * 66.0) as f32;
            let h = (w * 1.25).round();
            let w = w.round();
            let span_x = width as f32 - w - drift - 8.0;
            let span_y = height as f32 - h - 8.0;
            if span_x <= 0.0 || span_y <= 0.0 {
                continue;
            }
            let cx = (4.0 + w / 2.0 + rng.next_unit() as f32 * span_x).round();
            let cy = (4.0 + h / 2.0 + rng.next_unit() as f32 * span_y).round();
            let candidate = BoundingBox::new(cx - w / 2.0 - 6.0, cy - h / 2.0 - 6.0, cx + w / 2.0 + drift + 6.0, cy + h / 2.0 + 6.0);
            let clear = faces.iter().all(|f| {
                let other = BoundingBox::new(f.cx - f.w / 2.0, f.cy - f.h / 2.0, f.cx + f.w / 2.0 + drift, f.cy + f.h / 2.0);
                candidate.intersection_area(&other) == 0.0
            });
            if !clear {
                continue;
            }
            let tone = rng.next_unit() as f32;
            let skin = [
                (150.0 + 90.0 * tone) as u8,
                (105.0 + 75.0 * tone) as u8,
                (80.0 + 70.0 * tone) as u8,
            ];
            let mask_color = if rng.next_below(2) == 0 { [185, 215, 240] } else { [235, 235, 235] };
            faces.push(SceneFace {
                cx,
                cy,
                w,
                h,
                masked: faces.len().is_multiple_of(2),
                skin,
                mask_color,
            });
        }
        Scene {
            width,
            height,
            seed,
            faces,
        }
    }

    fn face_at(&self, face: &SceneFace, index: usize) -> SceneFace {
        SceneFace {
            cx: face.cx + DRIFT * index as f32,
            ..face.clone()
        }
    }

    pub fn truth(&self, index: usize) -> Vec<GroundTruthEntry> {
        self.faces
            .iter()
            .map(|f| {
                let f = self.face_at(f, index);
                GroundTruthEntry {
                    frame: index,
                    x1: f.cx - f.w / 2.0,
                    y1: f.cy - f.h / 2.0,
                    x2: f.cx + f.w / 2.0,
                    y2: f.cy + f.h / 2.0,
                    label: if f.masked { MaskLabel::Mask } else { MaskLabel::NoMask },
                }
            })
            .collect()
    }

    pub fn render(&self, index: usize) -> Frame {
        let (w, h) = (self.width, self.height);
        let mut rng = Lcg::new(self.seed.wrapping_mul(31).wrapping_add(index as u64));
        let mut frame = Frame::filled(index, w, h, [0, 0, 0]);
        for y in 0..h {
            let t = y as f32 / h as f32;
            for x in 0..w {
                let s = x as f32 / w as f32;
                let noise = rng.next_symmetric(8.0);
                let px = [
                    60.0 + 50.0 * t + 10.0 * s + noise,
                    70.0 + 35.0 * t + noise,
                    95.0 + 5.0 * t - 15.0 * s + noise,
                ];
                frame.set_pixel(x, y, px.map(|v| v.round().clamp(0.0, 255.0) as u8));
            }
        }
        for face in &self.faces {
            draw_face(&mut frame, &self.face_at(face, index));
        }
        frame
    }
}

fn draw_face(frame: &mut Frame, f: &SceneFace) {
    let inside = |x: f32, y: f32, cx: f32, cy: f32, rx: f32, ry: f32| {
        let (dx, dy) = ((x - cx) / rx, (y - cy) / ry);
        dx * dx + dy * dy <= 1.0
    };
    let x0 = (f.cx - f.w / 2.0).floor().max(0.0) as usize;
    let x1 = ((f.cx + f.w / 2.0).ceil() as usize).min(frame.width);
    let y0 = (f.cy - f.h / 2.0).floor().max(0.0) as usize;
    let y1 = ((f.cy + f.h / 2.0).ceil() as usize).min(frame.height);
    let dark = f.skin.map(|c| (c as f32 * 0.45) as u8);
    let hair = [45, 35, 30];
    for y in y0..y1 {
        for x in x0..x1 {
            let (px, py) = (x as f32 + 0.5, y as f32 + 0.5);
            if !inside(px, py, f.cx, f.cy, f.w / 2.0, f.h / 2.0) {
                continue;
            }
            let ry = (py - f.cy) / f.h;
            let rx = (px - f.cx) / f.w;
            let mut color = f.skin;
            if ry < -0.3 {
                color = hair;
            }
            let eye = |ex: f32| inside(rx, ry, ex, -0.1, 0.08, 0.045);
            if eye(-0.2) || eye(0.2) {
                color = [25, 25, 30];
            }
            if f.masked {
                if ry > 0.02 && rx.abs() < 0.46 {
                    color = f.mask_color;
                }
            } else {
                if inside(rx, ry, 0.0, 0.08, 0.05, 0.08) {
                    color = dark;
                }
                if ry > 0.22 && ry < 0.27 && rx.abs() < 0.16 {
                    color = [150, 40, 50];
                }
            }
            frame.set_pixel(x, y, color);
        }
    }
}

/// The default fixture scene: four faces over ten 640x360 frames.
pub fn default_scene(seed: u64) -> Scene {
    Scene::generate(FRAME_WIDTH, FRAME_HEIGHT, 4, 10, seed)
}

/// Scenes used only to fit the fixture heads.
fn calibration_scenes(seed: u64) -> Vec<Scene> {
    (0..3)
        .map(|k| Scene::generate(FRAME_WIDTH, FRAME_HEIGHT, 5, 1, seed.wrapping_add(1000 + k)))
        .collect()
}

/// Solves `a x = b` for symmetric positive definite `a` (Cholesky).
fn solve_spd(mut a: Vec<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    for j in 0..n {
        let d = (a[j * n + j] - (0..j).map(|k| a[j * n + k].powi(2)).sum::<f64>()).sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let s: f64 = (0..j).map(|k| a[i * n + k] * a[j * n + k]).sum();
            a[i * n + j] = (a[i * n + j] - s) / d;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| a[i * n + k] * y[k]).sum::<f64>()) / a[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| a[k * n + i] * x[k]).sum::<f64>()) / a[i * n + i];
    }
    x
}

/// Fisher discriminant turned into logit rows `[background, face]`. The
/// face-minus-background logit is `a (d . f - c)`, where `d` is the
/// discriminant direction (ridge-regularized pooled covariance) and `c`
/// the midpoint of the projected class means, raised if needed so at most
/// `negative_pass` of the negatives clear it.
fn fit_probe(pos: &[Vec<f32>], neg: &[Vec<f32>], negative_pass: f64) -> (Vec<f32>, [f32; 2]) {
    let dim = pos.first().or(neg.first()).map_or(0, Vec::len);
    let mean = |set: &[Vec<f32>]| -> Vec<f64> {
        let mut m = vec![0f64; dim];
        for v in set {
            for (a, b) in m.iter_mut().zip(v) {
                *a += f64::from(*b);
            }
        }
        m.iter().map(|a| a / set.len().max(1) as f64).collect()
    };
    let (mp, mn) = (mean(pos), mean(neg));
    let mut cov = vec![0f64; dim * dim];
    for (set, m) in [(pos, &mp), (neg, &mn)] {
        for v in set {
            let c: Vec<f64> = v.iter().zip(m).map(|(x, m)| f64::from(*x) - m).collect();
            for i in 0..dim {
                for j in 0..dim {
                    cov[i * dim + j] += c[i] * c[j];
                }
            }
        }
    }
    let total = (pos.len() + neg.len()).max(1) as f64;
    cov.iter_mut().for_each(|v| *v /= total);
    let ridge = 1e-3 * (0..dim).map(|i| cov[i * dim + i]).sum::<f64>() / dim.max(1) as f64 + 1e-12;
    (0..dim).for_each(|i| cov[i * dim + i] += ridge);
    let diff: Vec<f64> = mp.iter().zip(&mn).map(|(a, b)| a - b).collect();
    let d = solve_spd(cov, &diff);

    let project = |v: &Vec<f32>| v.iter().zip(&d).map(|(x, w)| f64::from(*x) * w).sum::<f64>();
    let zp: Vec<f64> = pos.iter().map(project).collect();
    let mut zn: Vec<f64> = neg.iter().map(project).collect();
    zn.sort_by(f64::total_cmp);
    let avg = |z: &[f64]| z.iter().sum::<f64>() / z.len().max(1) as f64;
    let (ap, an) = (avg(&zp), avg(&zn));
    let quantile = zn
        .get(((1.0 - negative_pass) * zn.len() as f64) as usize)
        .copied()
        .unwrap_or(an);
    let c = ((ap + an) / 2.0).max(quantile);
    let spread = (zn.iter().map(|z| (z - an).powi(2)).sum::<f64>() / zn.len().max(1) as f64).sqrt();
    let a = if ap > c { 3.0 / (ap - c) } else { 1.0 / spread.max(1e-6) };
    let half: Vec<f32> = d.iter().map(|w| (a * w / 2.0) as f32).collect();
    let mut rows: Vec<f32> = half.iter().map(|w| -w).collect();
    rows.extend(&half);
    let b = (a * c / 2.0) as f32;
    (rows, [b, -b])
}

/// Ridge regression of `targets` on `features`, as `[K, dim]` weights and
/// `K` biases.
fn fit_regression<const K: usize>(features: &[Vec<f32>], targets: &[[f32; K]]) -> (Vec<f32>, Vec<f32>) {
    let dim = features.first().map_or(0, Vec::len);
    let n = features.len().max(1) as f64;
    let fm: Vec<f64> = (0..dim)
        .map(|i| features.iter().map(|v| f64::from(v[i])).sum::<f64>() / n)
        .collect();
    let ym: Vec<f64> = (0..K)
        .map(|k| targets.iter().map(|t| f64::from(t[k])).sum::<f64>() / n)
        .collect();
    let mut cov = vec![0f64; dim * dim];
    let mut cross = vec![0f64; dim * K];
    for (v, t) in features.iter().zip(targets) {
        let c: Vec<f64> = v.iter().zip(&fm).map(|(x, m)| f64::from(*x) - m).collect();
        for i in 0..dim {
            for j in 0..dim {
                cov[i * dim + j] += c[i] * c[j];
            }
            for k in 0..K {
                cross[k * dim + i] += c[i] * (f64::from(t[k]) - ym[k]);
            }
        }
    }
    let ridge = 1e-2 * (0..dim).map(|i| cov[i * dim + i]).sum::<f64>() / dim.max(1) as f64 + 1e-9;
    (0..dim).for_each(|i| cov[i * dim + i] += ridge);
    let mut weights = Vec::with_capacity(K * dim);
    let mut bias = Vec::with_capacity(K);
    for k in 0..K {
        let w = solve_spd(cov.clone(), &cross[k * dim..(k + 1) * dim]);
        bias.push((ym[k] - w.iter().zip(&fm).map(|(a, b)| a * b).sum::<f64>()) as f32);
        weights.extend(w.iter().map(|&v| v as f32));
    }
    (weights, bias)
}

/// Offsets that move `from` onto `to`.
fn offsets_to(from: &BoundingBox, to: &BoundingBox) -> [f32; 4] {
    let (w, h) = (from.width(), from.height());
    [(to.x1 - from.x1) / w, (to.y1 - from.y1) / h, (to.x2 - from.x2) / w, (to.y2 - from.y2) / h]
}

fn nearest_truth(b: &BoundingBox, truth: &[GroundTruthEntry]) -> BoundingBox {
    truth
        .iter()
        .map(|t| t.bbox())
        .max_by(|x, y| iou(b, x).total_cmp(&iou(b, y)))
        .expect("positive samples have a truth")
}

fn set(archive: &mut WeightArchive, name: &str, data: Vec<f32>) -> Result<()> {
    let shape = archive.get(name).expect("fixture parameter exists").shape().to_vec();
    archive.replace(name, Tensor::new(shape, data)?)
}

fn scale(archive: &mut WeightArchive, name: &str, k: f32) {
    if let Some(t) = archive.get_mut(name) {
        t.data_mut().iter_mut().for_each(|v| *v *= k);
    }
}

fn vectors(t: &Tensor) -> Vec<Vec<f32>> {
    let n = t.shape()[0];
    t.data().chunks_exact(t.len() / n).map(<[f32]>::to_vec).collect()
}

fn max_iou(b: &BoundingBox, truth: &[GroundTruthEntry]) -> f32 {
    truth.iter().map(|t| iou(b, &t.bbox())).fold(0.0, f32::max)
}

/// Positive crops around truths and negative crops elsewhere.
fn sample_boxes(scene: &Scene, truth: &[GroundTruthEntry], rng: &mut Lcg) -> (Vec<BoundingBox>, Vec<BoundingBox>) {
    let mut pos = Vec::new();
    for t in truth {
        let b = t.bbox();
        for _ in 0..4 {
            let mut j = |s: f32| rng.next_symmetric(0.15) * s;
            let (w, h) = (b.width(), b.height());
            pos.push(BoundingBox::new(b.x1 + j(w), b.y1 + j(h), b.x2 + j(w), b.y2 + j(h)));
        }
    }
    let mut neg = Vec::new();
    while neg.len() < 6 * pos.len().max(4) {
        let s = 24.0 + rng.next_unit() as f32 * 110.0;
        let x = rng.next_unit() as f32 * (scene.width as f32 - s);
        let y = rng.next_unit() as f32 * (scene.height as f32 - s);
        let b = BoundingBox::new(x, y, x + s, y + s * 1.2);
        if max_iou(&b, truth) < 0.2 {
            neg.push(b);
        }
    }
    (pos, neg)
}

fn crops(frame: &Tensor, boxes: &[BoundingBox], extent: usize) -> Result<Tensor> {
    let list = boxes
        .iter()
        .map(|b| crop_resize(frame, &square_pad(b), extent).map(|t| normalize_pixels(&t)))
        .collect::<Result<Vec<_>>>()?;
    Tensor::stack_batch(&list)
}

/// Cascade weights for `seed`, with probe-fitted classification heads.
pub fn cascade_archive(seed: u64) -> Result<WeightArchive> {
    let mut archive = random_init(&cascade_param_specs()?, seed)?;
    scale(&mut archive, "onet.landmark.weight", 0.1);
    set(
        &mut archive,
        "onet.landmark.bias",
        vec![0.3, 0.35, 0.7, 0.35, 0.5, 0.55, 0.35, 0.75, 0.65, 0.75],
    )?;

    let scenes = calibration_scenes(seed);
    let frames: Vec<(Tensor, Vec<GroundTruthEntry>)> =
        scenes.iter().map(|s| (s.render(0).to_tensor(), s.truth(0))).collect();
    let mut rng = Lcg::new(seed.wrapping_add(77));

    // stage 1: every grid cell of every pyramid level
    let pnet = StageNetwork::build(Stage::Proposal, &archive)?;
    let (mut pos, mut neg, mut offsets) = (Vec::new(), Vec::new(), Vec::new());
    for (frame, truth) in &frames {
        for level in build_image_pyramid(frame, &CascadeConfig::default())? {
            let f = pnet.features(&level.image)?;
            let [_, c, gh, gw] = f.dims4()?;
            for r in 0..gh {
                for col in 0..gw {
                    let (x, y) = (2.0 * col as f32, 2.0 * r as f32);
                    let b = BoundingBox::new(x, y, x + 12.0, y + 12.0).scaled(1.0 / level.scale);
                    let o = max_iou(&b, truth);
                    let v = || (0..c).map(|k| f.at4(0, k, r, col)).collect::<Vec<f32>>();
                    if o >= 0.5 {
                        pos.push(v());
                        offsets.push(offsets_to(&b, &nearest_truth(&b, truth)));
                    } else if o < 0.2 && (r * gw + col) % 5 == 0 {
                        neg.push(v());
                    }
                }
            }
        }
    }
    let (w, b) = fit_probe(&pos, &neg, 0.01);
    set(&mut archive, "pnet.cls.weight", w)?;
    set(&mut archive, "pnet.cls.bias", b.to_vec())?;
    let (w, b) = fit_regression(&pos, &offsets);
    set(&mut archive, "pnet.box.weight", w)?;
    set(&mut archive, "pnet.box.bias", b)?;

    // stages 2 and 3: jittered truth crops against background crops
    for (stage, name, pass) in [(Stage::Refine, "rnet", 0.05), (Stage::Output, "onet", 0.05)] {
        let net = StageNetwork::build(stage, &archive)?;
        let (mut pos, mut neg, mut offsets) = (Vec::new(), Vec::new(), Vec::new());
        for (scene, (frame, truth)) in scenes.iter().zip(&frames) {
            let (p, n) = sample_boxes(scene, truth, &mut rng);
            pos.extend(vectors(&net.features(&crops(frame, &p, stage.input_extent())?)?));
            neg.extend(vectors(&net.features(&crops(frame, &n, stage.input_extent())?)?));
            offsets.extend(p.iter().map(|b| offsets_to(&square_pad(b), &nearest_truth(b, truth))));
        }
        let (w, b) = fit_probe(&pos, &neg, pass);
        set(&mut archive, &format!("{name}.cls.weight"), w)?;
        set(&mut archive, &format!("{name}.cls.bias"), b.to_vec())?;
        let (w, b) = fit_regression(&pos, &offsets);
        set(&mut archive, &format!("{name}.box.weight"), w)?;
        set(&mut archive, &format!("{name}.box.bias"), b)?;
    }

    archive.set_metadata("normalization", NORMALIZATION_TAG)?;
    archive.set_metadata("class_order", "background,face")?;
    archive.set_metadata("fixture_seed", &seed.to_string())?;
    Ok(archive)
}

/// LeCun-style rescaling of conv weights and unit-centred batch-norm
/// statistics, so activations keep their scale through the backbone.
pub fn condition_backbone(archive: &mut WeightArchive) {
    let names: Vec<(String, Vec<usize>)> = archive
        .iter()
        .map(|(n, t)| (n.to_string(), t.shape().to_vec()))
        .collect();
    for (name, shape) in names {
        if name.ends_with(".var") || name.ends_with(".gamma") {
            archive.get_mut(&name).unwrap().data_mut().iter_mut().for_each(|v| *v += 1.0);
        } else if name.ends_with(".weight") && shape.len() == 4 && name.starts_with("backbone") {
            let fan_in: usize = shape[1..].iter().product();
            scale(archive, &name, (3.0 / fan_in as f32).sqrt() / 0.1);
        }
    }
}

/// Classifier weights for `seed`. The head is trained on backbone features
/// of synthetic masked and unmasked faces.
pub fn classifier_archive(spec: &BackboneSpec, seed: u64) -> Result<WeightArchive> {
    let mut archive = random_init(&spec.param_specs()?, seed)?;
    condition_backbone(&mut archive);
    let backbone = Network::build(3, spec.feature_layers()?, &archive)?;
    let channels = spec.final_channels();

    let mut rng = Lcg::new(seed.wrapping_add(99));
    let mut jobs = Vec::new();
    for k in 0..CLASSIFIER_SCENES {
        let scene = Scene::generate(FRAME_WIDTH, FRAME_HEIGHT, 5, 1, seed.wrapping_add(2000 + k));
        let frame = scene.render(0).to_tensor();
        for t in scene.truth(0) {
            let b = t.bbox();
            let (w, h) = (b.width(), b.height());
            for _ in 0..3 {
                // detector boxes tend to be looser than the truth
                let grow = 0.9 + 0.6 * rng.next_unit() as f32;
                let cx = (b.x1 + b.x2) / 2.0 + rng.next_symmetric(0.08) * w;
                let cy = (b.y1 + b.y2) / 2.0 + rng.next_symmetric(0.08) * h;
                let (hw, hh) = (grow * w / 2.0, grow * h / 2.0);
                let jb = BoundingBox::new(cx - hw, cy - hh, cx + hw, cy + hh);
                jobs.push((crops(&frame, &[jb], spec.input_extent)?, t.label));
            }
        }
    }
    let data: Vec<LabeledFeature> = jobs
        .par_iter()
        .map(|(crop, label)| {
            let features = backbone.forward(crop)?;
            Ok(LabeledFeature {
                features: features.data().iter().map(|&v| f64::from(v)).collect(),
                label: *label,
            })
        })
        .collect::<Result<_>>()?;
    // train on standardized features, then fold the standardization into fc1
    let n = data.len().max(1) as f64;
    let mu: Vec<f64> = (0..channels).map(|i| data.iter().map(|s| s.features[i]).sum::<f64>() / n).collect();
    let sigma: Vec<f64> = (0..channels)
        .map(|i| {
            let var = data.iter().map(|s| (s.features[i] - mu[i]).powi(2)).sum::<f64>() / n;
            if var > 1e-12 { var.sqrt() } else { 1.0 }
        })
        .collect();
    let standardized: Vec<LabeledFeature> = data
        .iter()
        .map(|s| LabeledFeature {
            features: s.features.iter().enumerate().map(|(i, v)| (v - mu[i]) / sigma[i]).collect(),
            label: s.label,
        })
        .collect();
    let params = HeadParams::random(channels, spec.head_hidden, 0.02, seed)?;
    let config = TrainConfig {
        learning_rate: 0.002,
        epochs: 15,
        seed,
    };
    let mut trained = train_head(params, &standardized, &config)?;
    let p = &mut trained.params;
    for j in 0..p.hidden {
        let row = &mut p.w1[j * channels..(j + 1) * channels];
        let mut shift = 0.0;
        for i in 0..channels {
            row[i] /= sigma[i];
            shift += row[i] * mu[i];
        }
        p.b1[j] -= shift;
    }
    trained.params.store(&mut archive)?;

    archive.set_metadata("normalization", NORMALIZATION_TAG)?;
    archive.set_metadata("class_order", CLASS_ORDER)?;
    archive.set_metadata("input_extent", &spec.input_extent.to_string())?;
    archive.set_metadata("width_multiplier", &spec.width_multiplier.to_string())?;
    archive.set_metadata("fixture_seed", &seed.to_string())?;
    Ok(archive)
}

/// Paths of a fixture set written by [`write_fixture_set`].
#[derive(Clone, Debug)]
pub struct FixtureSet {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub manifest: PathBuf,
    pub truth: PathBuf,
    pub cascade_weights: PathBuf,
    pub classifier_weights: PathBuf,
}

/// Writes `frames` frames of `scene` as `frames/frame_NNN.ppm`, the
/// manifest `frames.txt` and the ground truth `truth.jsonl`.
pub fn write_scene(dir: &Path, scene: &Scene, frames: usize) -> Result<(PathBuf, PathBuf)> {
    let frame_dir = dir.join("frames");
    std::fs::create_dir_all(&frame_dir).map_err(|e| Error::io(&frame_dir, e))?;
    let mut manifest = String::new();
    let mut truth = Vec::new();
    for i in 0..frames {
        let name = format!("frame_{i:03}.ppm");
        write_ppm(&scene.render(i), frame_dir.join(&name))?;
        manifest.push_str(&format!("frames/{name}\n"));
        truth.extend(scene.truth(i));
    }
    let manifest_path = dir.join("frames.txt");
    std::fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    let truth_path = dir.join("truth.jsonl");
    write_jsonl(&truth, &truth_path)?;
    Ok((manifest_path, truth_path))
}

/// Writes a complete runnable set into `dir`: the default scene, both
/// archives, and `detect.conf` pointing at them with output into `out/`.
pub fn write_fixture_set(
    dir: &Path,
    frames: usize,
    seed: u64,
    cascade: &WeightArchive,
    classifier: &WeightArchive,
) -> Result<FixtureSet> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (manifest, truth) = write_scene(dir, &default_scene(seed), frames)?;
    let cascade_weights = dir.join("cascade.cwts");
    let classifier_weights = dir.join("classifier.cwts");
    cascade.save(&cascade_weights)?;
    classifier.save(&classifier_weights)?;
    let config = dir.join("detect.conf");
    let text = "\
# fixture run: paths are relative to this file
manifest = frames.txt
output_dir = out
cascade_weights = cascade.cwts
classifier_weights = classifier.cwts
threads = 1
";
    std::fs::write(&config, text).map_err(|e| Error::io(&config, e))?;
    Ok(FixtureSet {
        dir: dir.to_path_buf(),
        config,
        manifest,
        truth,
        cascade_weights,
        classifier_weights,
    })
}
