//! Oracle suites behind `cascadet selfcheck` and the acceptance tests.
//!
//! Every check compares the engine against an independent, deliberately
//! naive reference, or against a fixed expected value, and reports a
//! single pass/fail line with its runtime.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::classifier::BackboneSpec;
use crate::detector::{cascade_param_specs, iou, nms_indices, overlap, BoundingBox, CascadeNetworks, FaceCandidate, NmsMode};
use crate::eval::{
    all_baselines, compute_metrics, metrics, render_csv, render_text, ConfusionCounts, Metrics, TaskCounts,
};
use crate::loss::{central_difference, loss_box, loss_det, loss_landmark, relative_error};
use crate::network::{LayerKind, Network};
use crate::ops::{self, BatchNormParams};
use crate::pipeline::{run, RunConfig};
use crate::tensor::Tensor;
use crate::train::{loss_is_monotone, train_demo};
use crate::weights::{random_init, Lcg, WeightArchive};
use crate::{fixture, Error};

/// Seed of the fixed-seed checks.
pub const SELFCHECK_SEED: u64 = 0;

/// Outcome of one check.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// One-line summary of what was compared, or why it failed.
    pub detail: String,
    /// Extra lines printed under the summary.
    pub report: Vec<String>,
    pub elapsed: Duration,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {}: {} {} ({:.2} s) {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.elapsed.as_secs_f64(),
            self.detail
        )?;
        for line in &self.report {
            write!(f, "\n    {line}")?;
        }
        Ok(())
    }
}

type Outcome = std::result::Result<(String, Vec<String>), String>;

fn timed(id: u8, name: &'static str, limit: Option<Duration>, body: impl FnOnce() -> Outcome) -> CheckResult {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let (mut passed, mut detail, report) = match outcome {
        Ok((d, r)) => (true, d, r),
        Err(d) => (false, d, Vec::new()),
    };
    if let Some(limit) = limit {
        if elapsed > limit {
            passed = false;
            detail = format!("{detail}; exceeded time limit of {} s", limit.as_secs());
        }
    }
    CheckResult {
        id,
        name,
        passed,
        detail,
        report,
        elapsed,
    }
}

fn ensure(ok: bool, message: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

fn random_tensor(shape: &[usize], bound: f32, rng: &mut Lcg) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..len).map(|_| rng.next_symmetric(bound)).collect()).expect("consistent shape")
}

/// Value range `[lo, hi]` inclusive.
fn pick(rng: &mut Lcg, lo: usize, hi: usize) -> usize {
    lo + rng.next_below(hi - lo + 1)
}

// ---------------------------------------------------------------------------
// operator oracles

fn naive_conv(x: &Tensor, w: &Tensor, bias: &[f32], stride: usize, pad: usize, groups_per_channel: bool) -> Tensor {
    let [n, c, ih, iw] = x.dims4().expect("rank 4");
    let [oc, _, kh, kw] = w.dims4().expect("rank 4");
    let oh = (ih + 2 * pad - kh) / stride + 1;
    let ow = (iw + 2 * pad - kw) / stride + 1;
    let mut out = Vec::with_capacity(n * oc * oh * ow);
    for b in 0..n {
        for o in 0..oc {
            for y in 0..oh {
                for xo in 0..ow {
                    let mut acc = 0.0f32;
                    let channels: Vec<(usize, usize)> =
                        if groups_per_channel { vec![(o, 0)] } else { (0..c).map(|i| (i, i)).collect() };
                    for (ic, wc) in channels {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (y * stride + ky) as isize - pad as isize;
                                let ix = (xo * stride + kx) as isize - pad as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < ih && (ix as usize) < iw {
                                    acc += w.at4(o, wc, ky, kx) * x.at4(b, ic, iy as usize, ix as usize);
                                }
                            }
                        }
                    }
                    out.push(acc + bias[o]);
                }
            }
        }
    }
    Tensor::new(vec![n, oc, oh, ow], out).expect("consistent shape")
}

fn naive_max_pool(x: &Tensor, k: usize, s: usize) -> Tensor {
    let [n, c, ih, iw] = x.dims4().expect("rank 4");
    let (oh, ow) = ((ih - k) / s + 1, (iw - k) / s + 1);
    let mut out = Vec::new();
    for b in 0..n {
        for ch in 0..c {
            for y in 0..oh {
                for xo in 0..ow {
                    let mut best = f32::NEG_INFINITY;
                    for ky in 0..k {
                        for kx in 0..k {
                            best = best.max(x.at4(b, ch, y * s + ky, xo * s + kx));
                        }
                    }
                    out.push(best);
                }
            }
        }
    }
    Tensor::new(vec![n, c, oh, ow], out).expect("consistent shape")
}

fn naive_gap(x: &Tensor) -> Tensor {
    let [n, c, h, w] = x.dims4().expect("rank 4");
    let mut out = Vec::new();
    for b in 0..n {
        for ch in 0..c {
            let mut sum = 0.0f64;
            for y in 0..h {
                for xo in 0..w {
                    sum += f64::from(x.at4(b, ch, y, xo));
                }
            }
            out.push((sum / (h * w) as f64) as f32);
        }
    }
    Tensor::new(vec![n, c, 1, 1], out).expect("consistent shape")
}

fn naive_dense(rows: usize, k: usize, x: &[f32], w: &[f32], bias: &[f32]) -> Vec<f32> {
    let m = bias.len();
    let mut out = Vec::new();
    for r in 0..rows {
        for j in 0..m {
            let mut acc = 0.0f64;
            for i in 0..k {
                acc += f64::from(w[j * k + i]) * f64::from(x[r * k + i]);
            }
            out.push((acc + f64::from(bias[j])) as f32);
        }
    }
    out
}

fn naive_batch_norm(x: &Tensor, p: &BatchNormParams) -> Tensor {
    let [n, c, h, w] = x.dims4().expect("rank 4");
    let mut out = Vec::new();
    for b in 0..n {
        for ch in 0..c {
            let scale = f64::from(p.gamma[ch]) / (f64::from(p.variance[ch]) + f64::from(p.epsilon)).sqrt();
            for y in 0..h {
                for xo in 0..w {
                    let v = f64::from(x.at4(b, ch, y, xo));
                    out.push(((v - f64::from(p.mean[ch])) * scale + f64::from(p.beta[ch])) as f32);
                }
            }
        }
    }
    Tensor::new(vec![n, c, h, w], out).expect("consistent shape")
}

/// Elementwise tolerance of the operator suite.
pub const OPERATOR_TOLERANCE: f32 = 1e-5;
/// Randomized shapes per operator.
pub const OPERATOR_CASES: usize = 100;

fn compare(op: &str, case: usize, got: &Tensor, want: &Tensor, worst: &mut f32) -> std::result::Result<(), String> {
    ensure(got.shape() == want.shape(), || {
        format!("{op} case {case}: shape {:?}, oracle {:?}", got.shape(), want.shape())
    })?;
    let diff = got.max_abs_diff(want).unwrap_or(f32::INFINITY);
    *worst = worst.max(diff);
    ensure(diff <= OPERATOR_TOLERANCE, || {
        format!("{op} case {case} {:?}: max difference {diff:e}", got.shape())
    })
}

/// conv2d, depthwise, pointwise, max and average pooling, dense and batch
/// norm against scalar loops, each on [`OPERATOR_CASES`] random shapes.
pub fn operator_oracles(seed: u64) -> CheckResult {
    timed(1, "operator oracles", Some(Duration::from_secs(60)), || {
        let mut rng = Lcg::new(seed);
        let mut worst = 0.0f32;
        for case in 0..OPERATOR_CASES {
            let n = pick(&mut rng, 1, 2);
            let c = pick(&mut rng, 1, 5);
            let k = pick(&mut rng, 1, 4);
            let stride = pick(&mut rng, 1, 2);
            let pad = rng.next_below(k);
            let h = pick(&mut rng, k.max(1), k + 9);
            let w = pick(&mut rng, k.max(1), k + 9);
            let x = random_tensor(&[n, c, h, w], 1.0, &mut rng);

            let oc = pick(&mut rng, 1, 5);
            let wt = random_tensor(&[oc, c, k, k], 1.0, &mut rng);
            let bias: Vec<f32> = (0..oc).map(|_| rng.next_symmetric(1.0)).collect();
            let got = ops::conv2d(&x, &wt, Some(&bias), stride, pad).map_err(err)?;
            compare("conv2d", case, &got, &naive_conv(&x, &wt, &bias, stride, pad, false), &mut worst)?;

            let dw = random_tensor(&[c, 1, k, k], 1.0, &mut rng);
            let dbias: Vec<f32> = (0..c).map(|_| rng.next_symmetric(1.0)).collect();
            let got = ops::depthwise_conv2d(&x, &dw, Some(&dbias), stride, pad).map_err(err)?;
            compare("depthwise", case, &got, &naive_conv(&x, &dw, &dbias, stride, pad, true), &mut worst)?;

            let pw = random_tensor(&[oc, c, 1, 1], 1.0, &mut rng);
            let got = ops::pointwise_conv2d(&x, &pw, Some(&bias)).map_err(err)?;
            compare("pointwise", case, &got, &naive_conv(&x, &pw, &bias, 1, 0, false), &mut worst)?;

            let pk = pick(&mut rng, 1, h.min(w).min(3));
            let ps = pick(&mut rng, 1, 2);
            let got = ops::max_pool2d(&x, pk, ps).map_err(err)?;
            compare("max_pool", case, &got, &naive_max_pool(&x, pk, ps), &mut worst)?;
            let got = ops::global_avg_pool(&x).map_err(err)?;
            compare("global_avg_pool", case, &got, &naive_gap(&x), &mut worst)?;

            let features = c * h * w;
            let m = pick(&mut rng, 1, 8);
            let dwt = random_tensor(&[m, features], 0.2, &mut rng);
            let db: Vec<f32> = (0..m).map(|_| rng.next_symmetric(1.0)).collect();
            let got = ops::dense(&x, &dwt, Some(&db)).map_err(err)?;
            let want = Tensor::new(vec![n, m, 1, 1], naive_dense(n, features, x.data(), dwt.data(), &db))
                .expect("consistent shape");
            compare("dense", case, &got, &want, &mut worst)?;

            let bn = BatchNormParams {
                gamma: (0..c).map(|_| rng.next_symmetric(2.0)).collect(),
                beta: (0..c).map(|_| rng.next_symmetric(1.0)).collect(),
                mean: (0..c).map(|_| rng.next_symmetric(1.0)).collect(),
                variance: (0..c).map(|_| 0.1 + rng.next_symmetric(1.0).abs()).collect(),
                epsilon: 1e-3,
            };
            let got = ops::batch_norm(&x, &bn).map_err(err)?;
            compare("batch_norm", case, &got, &naive_batch_norm(&x, &bn), &mut worst)?;
        }
        Ok((format!("7 operators x {OPERATOR_CASES} shapes, worst difference {worst:.1e}"), Vec::new()))
    })
}

// ---------------------------------------------------------------------------
// gradients

pub const GRADIENT_DRAWS: usize = 100;

/// Analytic gradients of the detection, box and landmark losses against
/// central differences, [`GRADIENT_DRAWS`] draws each.
pub fn gradient_suite(seed: u64) -> CheckResult {
    timed(2, "loss gradients", Some(Duration::from_secs(10)), || {
        let mut rng = Lcg::new(seed);
        let mut uniform = |lo: f64, hi: f64| lo + (hi - lo) * rng.next_unit();
        let (mut worst_quad, mut worst_det) = (0.0f64, 0.0f64);
        for draw in 0..GRADIENT_DRAWS {
            let pred: [f64; 10] = std::array::from_fn(|_| uniform(-1.0, 1.0));
            let target: [f64; 10] = std::array::from_fn(|_| uniform(-1.0, 1.0));
            let (_, grad) = loss_landmark(&pred, &target).map_err(err)?;
            for k in 0..10 {
                let f = |v: f64| {
                    let mut p = pred;
                    p[k] = v;
                    loss_landmark(&p, &target).expect("finite").0
                };
                let e = relative_error(grad[k], central_difference(f, pred[k], 1e-4), 1e-6);
                worst_quad = worst_quad.max(e);
            }
            let (p4, t4): ([f64; 4], [f64; 4]) = (std::array::from_fn(|i| pred[i]), std::array::from_fn(|i| target[i]));
            let (_, grad) = loss_box(&p4, &t4).map_err(err)?;
            for k in 0..4 {
                let f = |v: f64| {
                    let mut p = p4;
                    p[k] = v;
                    loss_box(&p, &t4).expect("finite").0
                };
                worst_quad = worst_quad.max(relative_error(grad[k], central_difference(f, p4[k], 1e-4), 1e-6));
            }
            let p = uniform(0.02, 0.98);
            let y = (draw % 2) as f64;
            let (_, g) = loss_det(p, y).map_err(err)?;
            let fd = central_difference(|v| loss_det(v, y).expect("in range").0, p, 1e-6);
            worst_det = worst_det.max(relative_error(g, fd, 1e-8));
        }
        ensure(worst_quad <= 1e-6, || format!("quadratic loss relative error {worst_quad:e} > 1e-6"))?;
        ensure(worst_det <= 1e-5, || format!("cross-entropy relative error {worst_det:e} > 1e-5"))?;
        Ok((
            format!("{GRADIENT_DRAWS} draws per loss, worst relative error {worst_quad:.1e} (box/landmark), {worst_det:.1e} (detection)"),
            Vec::new(),
        ))
    })
}

// ---------------------------------------------------------------------------
// fully convolutional proposals

/// Largest difference between the proposal network's dense map on a
/// `24x24` image and separate evaluation of every `12x12` window.
pub fn fcn_max_difference(networks: &CascadeNetworks, image: &Tensor) -> crate::Result<f32> {
    use crate::detector::image::{PROPOSAL_STRIDE, PROPOSAL_WINDOW};
    use crate::detector::stages::FACE_CHANNEL;
    let dense = networks.proposal.forward(image)?.probabilities;
    let [_, _, gh, gw] = dense.dims4()?;
    let [_, c, _, _] = image.dims4()?;
    let mut worst = 0.0f32;
    for r in 0..gh {
        for col in 0..gw {
            let mut window = Vec::with_capacity(c * PROPOSAL_WINDOW * PROPOSAL_WINDOW);
            for ch in 0..c {
                for y in 0..PROPOSAL_WINDOW {
                    for x in 0..PROPOSAL_WINDOW {
                        window.push(image.at4(0, ch, PROPOSAL_STRIDE * r + y, PROPOSAL_STRIDE * col + x));
                    }
                }
            }
            let window = Tensor::new(vec![1, c, PROPOSAL_WINDOW, PROPOSAL_WINDOW], window)?;
            let single = networks.proposal.forward(&window)?.probabilities;
            worst = worst.max((single.at4(0, FACE_CHANNEL, 0, 0) - dense.at4(0, FACE_CHANNEL, r, col)).abs());
        }
    }
    Ok(worst)
}

pub fn fcn_equivalence(seed: u64) -> CheckResult {
    timed(3, "proposal map equals sliding windows", None, || {
        let archive = random_init(&cascade_param_specs().map_err(err)?, seed).map_err(err)?;
        let nets = CascadeNetworks::from_archive(&archive).map_err(err)?;
        let mut rng = Lcg::new(seed ^ 0x5eed);
        let mut worst = 0.0f32;
        let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
        for _ in 0..5 {
            let image = random_tensor(&[1, 3, 24, 24], 3.0, &mut rng);
            worst = worst.max(fcn_max_difference(&nets, &image).map_err(err)?);
            for &p in nets.proposal.forward(&image).map_err(err)?.probabilities.data() {
                lo = lo.min(p);
                hi = hi.max(p);
            }
        }
        ensure(hi - lo > 1e-3, || format!("probability map is flat ({lo}..{hi})"))?;
        ensure(worst <= 1e-4, || format!("probabilities differ by {worst:e}"))?;
        Ok((format!("5 images, 7x7 windows each, worst difference {worst:.1e}"), Vec::new()))
    })
}

// ---------------------------------------------------------------------------
// NMS and IoU

/// Repeatedly takes the best remaining box (lowest index on ties) and
/// discards everything overlapping it by more than `threshold`.
pub fn reference_nms(boxes: &[FaceCandidate], threshold: f32, mode: NmsMode) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..boxes.len()).collect();
    let mut keep = Vec::new();
    while !remaining.is_empty() {
        let mut best = remaining[0];
        for &j in &remaining {
            if boxes[j].score > boxes[best].score {
                best = j;
            }
        }
        keep.push(best);
        remaining.retain(|&j| j != best && overlap(&boxes[best].bbox, &boxes[j].bbox, mode) <= threshold);
    }
    keep
}

/// IoU of integer boxes by counting covered unit pixels.
pub fn raster_iou(a: [i32; 4], b: [i32; 4]) -> f64 {
    let (mut inter, mut union) = (0u64, 0u64);
    for y in a[1].min(b[1])..a[3].max(b[3]) {
        for x in a[0].min(b[0])..a[2].max(b[2]) {
            let ia = x >= a[0] && x < a[2] && y >= a[1] && y < a[3];
            let ib = x >= b[0] && x < b[2] && y >= b[1] && y < b[3];
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

pub const NMS_INSTANCES: usize = 1000;
pub const NMS_BOXES: usize = 50;

pub fn nms_suite(seed: u64) -> CheckResult {
    timed(4, "NMS and IoU", None, || {
        let mut rng = Lcg::new(seed);
        for instance in 0..NMS_INSTANCES {
            let boxes: Vec<FaceCandidate> = (0..NMS_BOXES)
                .map(|_| {
                    let x = 100.0 * rng.next_unit() as f32;
                    let y = 100.0 * rng.next_unit() as f32;
                    let w = 5.0 + 35.0 * rng.next_unit() as f32;
                    let h = 5.0 + 35.0 * rng.next_unit() as f32;
                    // coarse scores so ties occur
                    let score = (rng.next_below(20) as f32 + 1.0) / 21.0;
                    FaceCandidate::new(BoundingBox::new(x, y, x + w, y + h), score)
                })
                .collect();
            let threshold = 0.2 + 0.6 * rng.next_unit() as f32;
            let mode = if instance % 2 == 0 { NmsMode::Union } else { NmsMode::Min };
            let got = nms_indices(&boxes, threshold, mode);
            let want = reference_nms(&boxes, threshold, mode);
            ensure(got == want, || format!("instance {instance}: kept {got:?}, reference {want:?}"))?;
            for (i, &a) in got.iter().enumerate() {
                for &b in &got[i + 1..] {
                    let o = overlap(&boxes[a].bbox, &boxes[b].bbox, mode);
                    ensure(o <= threshold, || format!("instance {instance}: survivors overlap {o} > {threshold}"))?;
                }
            }
        }
        let mut worst = 0.0f64;
        for case in 0..2000 {
            let mut int_box = || {
                let x = rng.next_below(30) as i32;
                let y = rng.next_below(30) as i32;
                [x, y, x + 1 + rng.next_below(20) as i32, y + 1 + rng.next_below(20) as i32]
            };
            let (a, b) = (int_box(), int_box());
            let fb = |v: [i32; 4]| BoundingBox::new(v[0] as f32, v[1] as f32, v[2] as f32, v[3] as f32);
            let d = (f64::from(iou(&fb(a), &fb(b))) - raster_iou(a, b)).abs();
            worst = worst.max(d);
            ensure(d <= 1e-6, || format!("IoU case {case} {a:?} {b:?}: off by {d:e}"))?;
        }
        Ok((
            format!("{NMS_INSTANCES} x {NMS_BOXES}-box instances match the reference; 2000 IoU pairs within {worst:.1e}"),
            Vec::new(),
        ))
    })
}

// ---------------------------------------------------------------------------
// residual identity

/// Archive holding zeros for every parameter in `specs`.
pub fn zero_archive(specs: &[(String, Vec<usize>)]) -> crate::Result<WeightArchive> {
    let mut archive = WeightArchive::new();
    for (name, shape) in specs {
        archive.insert(name.clone(), Tensor::zeros(shape)?)?;
    }
    Ok(archive)
}

pub fn residual_identity(seed: u64) -> CheckResult {
    timed(5, "residual identity and symmetric softmax", None, || {
        let spec = BackboneSpec::default();
        let zeros = zero_archive(&spec.param_specs().map_err(err)?).map_err(err)?;
        let mut rng = Lcg::new(seed);
        let mut channels = 3;
        let (mut blocks, mut residual) = (0, 0);
        for layer in spec.layers().map_err(err)? {
            let next = layer.output_channels(channels);
            if let LayerKind::Bottleneck { residual: r, .. } = layer.kind {
                blocks += 1;
                if r {
                    residual += 1;
                    let name = layer.name.clone();
                    let net = Network::build(channels, vec![layer], &zeros).map_err(err)?;
                    let x = random_tensor(&[1, channels, 6, 6], 4.0, &mut rng);
                    let y = net.forward(&x).map_err(err)?;
                    ensure(y.bit_eq(&x), || format!("{name} changes its input"))?;
                }
            }
            channels = next;
        }
        ensure(blocks == 17, || format!("backbone has {blocks} blocks, expected 17"))?;
        ensure(residual > 0, || "no residual-eligible block".into())?;

        let net = Network::build(3, spec.layers().map_err(err)?, &zeros).map_err(err)?;
        let x = random_tensor(&[1, 3, spec.input_extent, spec.input_extent], 2.0, &mut rng);
        let p = net.forward(&x).map_err(err)?;
        let mut worst = 0.0f64;
        for v in p.data() {
            worst = worst.max((f64::from(*v) - 0.5).abs());
        }
        for _ in 0..100 {
            let z = rng.next_symmetric(50.0);
            for v in ops::softmax_slice(&[z, z]) {
                worst = worst.max((f64::from(v) - 0.5).abs());
            }
        }
        ensure(worst <= 1e-9, || format!("symmetric softmax off by {worst:e}"))?;
        Ok((
            format!("{residual} of {blocks} blocks residual, each exact; softmax within {worst:.0e} of 0.5"),
            Vec::new(),
        ))
    })
}

// ---------------------------------------------------------------------------
// training

pub fn training_demo(seed: u64) -> CheckResult {
    timed(6, "desk-scale training", Some(Duration::from_secs(30)), || {
        let out = train_demo(seed).map_err(err)?;
        let last = out.curve.last().ok_or("empty curve")?;
        ensure(last.accuracy >= 0.95, || format!("final accuracy {:.4} < 0.95", last.accuracy))?;
        ensure(loss_is_monotone(&out.curve), || "loss increased after epoch 1".into())?;
        Ok((
            format!(
                "{} epochs, loss {:.4} -> {:.4}, accuracy {:.1}%",
                out.curve.len(),
                out.curve[0].loss,
                last.loss,
                100.0 * last.accuracy
            ),
            Vec::new(),
        ))
    })
}

// ---------------------------------------------------------------------------
// metrics

/// Literature figures as they must appear, typed independently of the
/// shipped tables: name, then face and mask precision, recall, accuracy.
const EXPECTED_BASELINES: [(&str, [&str; 6]); 3] = [
    ("Published MTCNN+MobileNetV2", ["94.50", "86.38", "81.84", "84.39", "80.92", "81.74"]),
    ("Cascaded framework", ["-", "-", "-", "-", "87.8", "86.6"]),
    ("RetinaFaceMask (MobileNet)", ["83.0", "95.6", "-", "82.3", "89.1", "-"]),
];

pub fn metric_formulas() -> CheckResult {
    timed(7, "metric formulas and baselines", None, || {
        let exact = |c: ConfusionCounts, want: Metrics| {
            let got = metrics(&c);
            ensure(got == want, || format!("{c:?}: got {got:?}, expected {want:?}"))
        };
        exact(
            ConfusionCounts { tp: 2, tn: 0, fp: 0, fn_: 0 },
            Metrics { precision: Some(100.0), recall: Some(100.0), accuracy: Some(100.0) },
        )?;
        let c = ConfusionCounts { tp: 94, tn: 0, fp: 6, fn_: 14 };
        exact(
            c,
            Metrics {
                precision: Some(100.0 * 94.0 / 100.0),
                recall: Some(100.0 * 94.0 / 108.0),
                accuracy: Some(100.0 * 94.0 / 114.0),
            },
        )?;
        exact(ConfusionCounts::default(), Metrics { precision: None, recall: None, accuracy: None })?;
        let report = compute_metrics(&TaskCounts { face: c, mask: c });
        let csv = render_csv(&report, &[]);
        ensure(csv.lines().nth(1).is_some_and(|l| l.contains(",94.00,87.04,82.46,")), || {
            format!("measured row renders as {:?}", csv.lines().nth(1))
        })?;

        let baselines = all_baselines();
        let csv = render_csv(&report, &baselines);
        ensure(csv.lines().count() == 2 + baselines.len(), || format!("CSV has {} lines", csv.lines().count()))?;
        let text = render_text(&report, &baselines);
        for (name, figures) in EXPECTED_BASELINES {
            let quoted = format!("\"{name}\",reported,{}", figures.join(","));
            let plain = format!("{name},reported,{}", figures.join(","));
            ensure(csv.lines().any(|l| l == quoted || l == plain), || format!("CSV row for {name} differs"))?;
            let row = text.lines().find(|l| l.starts_with(name)).ok_or_else(|| format!("no text row for {name}"))?;
            let cells: Vec<&str> = row[name.len()..].split_whitespace().collect();
            ensure(cells.len() == 7 && cells[0] == "reported" && cells[1..] == figures, || {
                format!("text row for {name} reads {cells:?}")
            })?;
        }
        Ok((format!("3 confusion examples exact; {} baseline rows verbatim", baselines.len()), Vec::new()))
    })
}

// ---------------------------------------------------------------------------
// end-to-end determinism

/// Every file below `dir`, by relative path.
pub fn snapshot(dir: &Path) -> std::io::Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).expect("below dir").display().to_string();
                files.insert(rel, std::fs::read(&path)?);
            }
        }
    }
    Ok(files)
}

pub const DETERMINISM_FRAMES: usize = 10;

/// Runs the fixture sequence three times (1, 1 and 4 workers) under
/// `workdir` and compares every output byte.
pub fn pipeline_determinism(workdir: &Path, seed: u64) -> CheckResult {
    timed(8, "end-to-end determinism", None, || {
        let start = Instant::now();
        let cascade = fixture::cascade_archive(seed).map_err(err)?;
        let classifier = fixture::classifier_archive(&BackboneSpec::default(), seed).map_err(err)?;
        let set = fixture::write_fixture_set(workdir, DETERMINISM_FRAMES, seed, &cascade, &classifier)
            .map_err(err)?;
        let mut report = vec![format!("fixture weights and frames built in {:.1} s", start.elapsed().as_secs_f64())];
        let text = std::fs::read_to_string(&set.config).map_err(|e| e.to_string())?;
        let base = RunConfig::parse(&text, &set.dir, Vec::new()).map_err(err)?;

        let mut outputs = Vec::new();
        for (label, threads) in [("run A", 1), ("run B", 1), ("run C", 4)] {
            let mut config = base.clone();
            config.threads = threads;
            config.output_dir = workdir.join(format!("out_{threads}_{}", outputs.len()));
            let summary = run(&config).map_err(err)?;
            ensure(summary.failed_frames == 0, || format!("{label}: {} frames failed", summary.failed_frames))?;
            ensure(summary.detections > 0, || format!("{label}: no detections"))?;
            ensure(summary.wall_time < Duration::from_secs(120), || {
                format!("{label} took {:.1} s", summary.wall_time.as_secs_f64())
            })?;
            if outputs.is_empty() {
                report.extend(summary.to_string().lines().map(str::to_string));
            }
            report.push(format!(
                "{label}: {threads} worker(s), {} frames, {} detections, {:.1} s",
                summary.frames,
                summary.detections,
                summary.wall_time.as_secs_f64()
            ));
            outputs.push(snapshot(&config.output_dir).map_err(|e| e.to_string())?);
        }
        let first = &outputs[0];
        ensure(first.len() == DETERMINISM_FRAMES + 1, || format!("expected {} output files, got {}", DETERMINISM_FRAMES + 1, first.len()))?;
        for (i, other) in outputs.iter().enumerate().skip(1) {
            ensure(other.keys().eq(first.keys()), || format!("run {i} wrote different files"))?;
            for (name, bytes) in first {
                ensure(other[name] == *bytes, || format!("run {i}: {name} differs"))?;
            }
        }
        Ok((
            format!("{} files byte-identical across 2 runs and 1 vs 4 workers", first.len()),
            report,
        ))
    })
}

// ---------------------------------------------------------------------------
// weight format

pub const BIT_FLIPS: usize = 100;

pub fn weight_fuzz(seed: u64) -> CheckResult {
    timed(9, "weight archive corruption", None, || {
        let specs = BackboneSpec { width_multiplier: 0.35, ..BackboneSpec::default() }
            .param_specs()
            .map_err(err)?;
        let mut archive = random_init(&specs[..12.min(specs.len())], seed).map_err(err)?;
        archive.set_metadata("class_order", "Mask,NoMask").map_err(err)?;
        let bytes = archive.to_bytes();
        let back = WeightArchive::from_bytes(&bytes).map_err(err)?;
        ensure(back.bit_eq(&archive), || "round trip changed the archive".into())?;
        ensure(back.to_bytes() == bytes, || "re-encoding changed the bytes".into())?;

        let mut rng = Lcg::new(seed);
        let total_bits = 8 * bytes.len();
        let mut flipped = std::collections::BTreeSet::new();
        while flipped.len() < BIT_FLIPS {
            flipped.insert(rng.next_below(total_bits));
        }
        for &bit in &flipped {
            let mut corrupt = bytes.clone();
            corrupt[bit / 8] ^= 1 << (bit % 8);
            match WeightArchive::from_bytes(&corrupt) {
                Err(Error::ChecksumMismatch { .. }) => {}
                other => return Err(format!("bit {bit}: expected checksum failure, got {other:?}")),
            }
        }
        Ok((
            format!("{BIT_FLIPS} distinct single-bit flips of a {}-byte archive rejected; round trip exact", bytes.len()),
            Vec::new(),
        ))
    })
}

/// A check taking the scratch directory for the end-to-end run.
pub type Check = fn(&Path) -> CheckResult;

/// All nine checks in criterion order, with the fixed seed.
pub const CHECKS: [Check; 9] = [
    |_| operator_oracles(SELFCHECK_SEED),
    |_| gradient_suite(SELFCHECK_SEED),
    |_| fcn_equivalence(SELFCHECK_SEED),
    |_| nms_suite(SELFCHECK_SEED),
    |_| residual_identity(SELFCHECK_SEED),
    |_| training_demo(SELFCHECK_SEED),
    |_| metric_formulas(),
    |dir| pipeline_determinism(dir, SELFCHECK_SEED),
    |_| weight_fuzz(SELFCHECK_SEED),
];

/// Runs [`CHECKS`]; `workdir` receives the end-to-end fixture.
pub fn run_all(workdir: &Path) -> Vec<CheckResult> {
    CHECKS.iter().map(|check| check(workdir)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_nms_keeps_disjoint_and_drops_duplicates() {
        let c = |x: f32, s: f32| FaceCandidate::new(BoundingBox::new(x, 0.0, x + 10.0, 10.0), s);
        let boxes = [c(0.0, 0.5), c(1.0, 0.9), c(50.0, 0.7), c(0.0, 0.9)];
        assert_eq!(reference_nms(&boxes, 0.5, NmsMode::Union), vec![1, 2]);
    }

    #[test]
    fn raster_iou_examples() {
        assert_eq!(raster_iou([0, 0, 2, 2], [1, 0, 3, 2]), 2.0 / 6.0);
        assert_eq!(raster_iou([0, 0, 1, 1], [5, 5, 6, 6]), 0.0);
    }

    #[test]
    fn naive_conv_known_value() {
        let x = Tensor::full(&[1, 1, 3, 3], 2.0).unwrap();
        let w = Tensor::full(&[1, 1, 3, 3], 1.0).unwrap();
        assert_eq!(naive_conv(&x, &w, &[0.5], 1, 0, false).data(), &[18.5]);
        assert_eq!(naive_conv(&x, &w, &[0.0], 1, 1, false).at4(0, 0, 0, 0), 8.0);
    }

    #[test]
    fn fast_checks_pass() {
        for r in [gradient_suite(1), metric_formulas(), weight_fuzz(1)] {
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn display_has_verdict() {
        let r = timed(4, "x", None, || Err("boom".into()));
        assert!(r.to_string().starts_with("criterion 4: FAIL x"));
    }
}
