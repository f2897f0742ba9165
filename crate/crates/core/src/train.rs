//! SGD training of the classifier head (dense, ReLU, dense, softmax) on
//! fixed feature vectors. The backbone is not trained.
//!
//! Runs in `f64` on a single thread. The shuffle order comes from the
//! fixture generator, so a seed fully determines the run.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::classifier::MaskLabel;
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::weights::{Lcg, WeightArchive};

/// Parameters of the two dense layers, row-major `[out, in]` weights.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams {
    pub in_features: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Gradients, laid out like [`HeadParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct HeadGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl HeadParams {
    /// Weights uniform in `[-bound, bound)`, biases zero.
    pub fn random(in_features: usize, hidden: usize, bound: f32, seed: u64) -> Result<Self> {
        if in_features == 0 || hidden == 0 {
            return Err(Error::InvalidArgument("head dimensions must be positive".into()));
        }
        let mut rng = Lcg::new(seed);
        let mut draw = |n: usize| (0..n).map(|_| f64::from(rng.next_symmetric(bound))).collect();
        Ok(HeadParams {
            in_features,
            hidden,
            w1: draw(hidden * in_features),
            b1: vec![0.0; hidden],
            w2: draw(2 * hidden),
            b2: vec![0.0; 2],
        })
    }

    /// Reads `head.fc1` and `head.fc2` from a classifier archive.
    pub fn from_archive(archive: &WeightArchive, in_features: usize, hidden: usize) -> Result<Self> {
        let get = |name: &str, shape: &[usize]| -> Result<Vec<f64>> {
            Ok(archive.require(name, shape)?.data().iter().map(|&v| f64::from(v)).collect())
        };
        Ok(HeadParams {
            in_features,
            hidden,
            w1: get("head.fc1.weight", &[hidden, in_features])?,
            b1: get("head.fc1.bias", &[hidden])?,
            w2: get("head.fc2.weight", &[2, hidden])?,
            b2: get("head.fc2.bias", &[2])?,
        })
    }

    /// Writes the parameters back (as `f32`) under the classifier's names.
    pub fn store(&self, archive: &mut WeightArchive) -> Result<()> {
        let t = |shape: Vec<usize>, v: &[f64]| Tensor::new(shape, v.iter().map(|&x| x as f32).collect());
        let entries = [
            ("head.fc1.weight", t(vec![self.hidden, self.in_features], &self.w1)?),
            ("head.fc1.bias", t(vec![self.hidden], &self.b1)?),
            ("head.fc2.weight", t(vec![2, self.hidden], &self.w2)?),
            ("head.fc2.bias", t(vec![2], &self.b2)?),
        ];
        for (name, tensor) in entries {
            if archive.get(name).is_some() {
                archive.replace(name, tensor)?;
            } else {
                archive.insert(name, tensor)?;
            }
        }
        Ok(())
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|j| {
                let row = &self.w1[j * self.in_features..(j + 1) * self.in_features];
                let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[j];
                z.max(0.0)
            })
            .collect()
    }

    fn logits(&self, h: &[f64]) -> [f64; 2] {
        std::array::from_fn(|k| {
            let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
            row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + self.b2[k]
        })
    }

    /// `[p(Mask), p(NoMask)]`.
    pub fn probabilities(&self, x: &[f64]) -> [f64; 2] {
        softmax2(self.logits(&self.hidden_activations(x)))
    }

    pub fn predict(&self, x: &[f64]) -> MaskLabel {
        let p = self.probabilities(x);
        if p[0] > p[1] {
            MaskLabel::Mask
        } else {
            MaskLabel::NoMask
        }
    }

    /// Cross-entropy of the true class and its gradient for one sample.
    pub fn loss_and_grad(&self, x: &[f64], label: MaskLabel) -> (f64, HeadGrads) {
        let h = self.hidden_activations(x);
        let logits = self.logits(&h);
        let p = softmax2(logits);
        let t = label.index();
        let loss = -log_softmax2(logits)[t];
        let dz2: [f64; 2] = std::array::from_fn(|k| p[k] - if k == t { 1.0 } else { 0.0 });
        let mut g = HeadGrads {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.hidden],
            w2: vec![0.0; self.w2.len()],
            b2: dz2.to_vec(),
        };
        for k in 0..2 {
            for j in 0..self.hidden {
                g.w2[k * self.hidden + j] = dz2[k] * h[j];
            }
        }
        for j in 0..self.hidden {
            if h[j] <= 0.0 {
                continue;
            }
            let dh = dz2[0] * self.w2[j] + dz2[1] * self.w2[self.hidden + j];
            g.b1[j] = dh;
            for (i, &v) in x.iter().enumerate() {
                g.w1[j * self.in_features + i] = dh * v;
            }
        }
        (loss, g)
    }

    fn step(&mut self, g: &HeadGrads, lr: f64) {
        let apply = |p: &mut [f64], d: &[f64]| p.iter_mut().zip(d).for_each(|(p, d)| *p -= lr * d);
        apply(&mut self.w1, &g.w1);
        apply(&mut self.b1, &g.b1);
        apply(&mut self.w2, &g.w2);
        apply(&mut self.b2, &g.b2);
    }
}

fn softmax2(z: [f64; 2]) -> [f64; 2] {
    log_softmax2(z).map(f64::exp)
}

fn log_softmax2(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
    [z[0] - lse, z[1] - lse]
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledFeature {
    pub features: Vec<f64>,
    pub label: MaskLabel,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 30,
            seed: 0,
        }
    }
}

/// Full-dataset loss and accuracy after an epoch's updates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    /// Fraction in `[0, 1]`.
    pub accuracy: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: HeadParams,
    pub curve: Vec<EpochStats>,
}

/// Mean cross-entropy and accuracy of `params` over `data`.
pub fn evaluate(params: &HeadParams, data: &[LabeledFeature]) -> (f64, f64) {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for s in data {
        loss += params.loss_and_grad(&s.features, s.label).0;
        correct += usize::from(params.predict(&s.features) == s.label);
    }
    let n = data.len().max(1) as f64;
    (loss / n, correct as f64 / n)
}

/// Per-sample SGD for `config.epochs` epochs, reshuffling every epoch.
pub fn train_head(mut params: HeadParams, data: &[LabeledFeature], config: &TrainConfig) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if !config.learning_rate.is_finite() || config.learning_rate < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be a non-negative number, got {}",
            config.learning_rate
        )));
    }
    if let Some(s) = data.iter().find(|s| s.features.len() != params.in_features) {
        return Err(Error::shape(
            "train_head",
            format!("sample has {} features, head expects {}", s.features.len(), params.in_features),
        ));
    }
    let mut rng = Lcg::new(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            let (_, g) = params.loss_and_grad(&data[i].features, data[i].label);
            params.step(&g, config.learning_rate);
        }
        let (loss, accuracy) = evaluate(&params, data);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        curve.push(EpochStats { epoch, loss, accuracy });
    }
    Ok(TrainOutcome { params, curve })
}

/// Two linearly separable clusters at `±2u` for a random unit vector `u`,
/// with per-coordinate noise uniform in `[-0.4, 0.4)`. Labels alternate,
/// starting with `Mask` on the positive side.
pub fn separable_clusters(count: usize, dim: usize, seed: u64) -> Vec<LabeledFeature> {
    let mut rng = Lcg::new(seed);
    let raw: Vec<f64> = (0..dim).map(|_| 2.0 * rng.next_unit() - 1.0).collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let u: Vec<f64> = raw.iter().map(|v| v / norm).collect();
    (0..count)
        .map(|i| {
            let (sign, label) = if i % 2 == 0 { (1.0, MaskLabel::Mask) } else { (-1.0, MaskLabel::NoMask) };
            let features = u
                .iter()
                .map(|ui| sign * 2.0 * ui + 0.8 * rng.next_unit() - 0.4)
                .collect();
            LabeledFeature { features, label }
        })
        .collect()
}

/// Samples, feature width and hidden units of [`train_demo`].
pub const DEMO_SAMPLES: usize = 200;
pub const DEMO_FEATURES: usize = 16;
pub const DEMO_HIDDEN: usize = 16;

/// Trains a fresh head on [`separable_clusters`] with the default
/// schedule. Everything derives from `seed`.
pub fn train_demo(seed: u64) -> Result<TrainOutcome> {
    let data = separable_clusters(DEMO_SAMPLES, DEMO_FEATURES, seed);
    let params = HeadParams::random(DEMO_FEATURES, DEMO_HIDDEN, 0.1, seed.wrapping_add(1))?;
    let config = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    train_head(params, &data, &config)
}

/// True when no epoch after the first raises the loss.
pub fn loss_is_monotone(curve: &[EpochStats]) -> bool {
    curve.windows(2).all(|w| w[1].loss <= w[0].loss)
}

pub fn curve_csv(curve: &[EpochStats]) -> String {
    let mut out = String::from("epoch,loss,accuracy\n");
    for s in curve {
        let _ = writeln!(out, "{},{:.6},{:.4}", s.epoch, s.loss, s.accuracy);
    }
    out
}

pub fn write_curve_csv(curve: &[EpochStats], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(curve_csv(curve).as_bytes()))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{central_difference, relative_error};

    #[test]
    fn zero_learning_rate_leaves_params() {
        let data = separable_clusters(20, 16, 1);
        let params = HeadParams::random(16, 8, 0.1, 2).unwrap();
        let cfg = TrainConfig { learning_rate: 0.0, epochs: 3, seed: 0 };
        let out = train_head(params.clone(), &data, &cfg).unwrap();
        assert_eq!(out.params, params);
        assert_eq!(out.curve.len(), 3);
    }

    #[test]
    fn invalid_inputs_rejected() {
        let params = HeadParams::random(4, 3, 0.1, 2).unwrap();
        let cfg = TrainConfig::default();
        assert!(train_head(params.clone(), &[], &cfg).is_err());
        let data = separable_clusters(4, 5, 0);
        assert!(train_head(params.clone(), &data, &cfg).is_err());
        let data = separable_clusters(4, 4, 0);
        let bad = TrainConfig { learning_rate: -1.0, ..cfg };
        assert!(train_head(params, &data, &bad).is_err());
    }

    #[test]
    fn divergence_reported() {
        let data = separable_clusters(10, 4, 0);
        let params = HeadParams::random(4, 3, 0.1, 2).unwrap();
        let cfg = TrainConfig { learning_rate: f64::MAX, epochs: 5, seed: 0 };
        assert!(matches!(train_head(params, &data, &cfg), Err(Error::Diverged { .. })));
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let data = separable_clusters(6, 5, 3);
        let params = HeadParams::random(5, 4, 0.5, 9).unwrap();
        for s in &data {
            let (_, g) = params.loss_and_grad(&s.features, s.label);
            let check = |get: fn(&mut HeadParams) -> &mut Vec<f64>, analytic: &[f64]| {
                let mut base = params.clone();
                for (i, &a) in analytic.iter().enumerate() {
                    let x0 = get(&mut base)[i];
                    let f = |x: f64| {
                        let mut p = params.clone();
                        get(&mut p)[i] = x;
                        p.loss_and_grad(&s.features, s.label).0
                    };
                    let fd = central_difference(f, x0, 1e-6);
                    assert!(relative_error(a, fd, 1e-4) < 1e-5, "{a} vs {fd}");
                }
            };
            check(|p| &mut p.w1, &g.w1);
            check(|p| &mut p.b1, &g.b1);
            check(|p| &mut p.w2, &g.w2);
            check(|p| &mut p.b2, &g.b2);
        }
    }

    #[test]
    fn single_sample_is_memorized() {
        let data = separable_clusters(1, 16, 4);
        let params = HeadParams::random(16, 8, 0.1, 5).unwrap();
        let cfg = TrainConfig { learning_rate: 0.05, epochs: 1, seed: 1 };
        let mut p = params;
        let mut loss = f64::INFINITY;
        for _ in 0..2000 {
            let out = train_head(p, &data, &cfg).unwrap();
            p = out.params;
            loss = out.curve[0].loss;
            if loss < 1e-2 {
                break;
            }
        }
        assert!(loss < 1e-2, "final loss {loss}");
    }

    #[test]
    fn separable_set_reaches_high_accuracy_with_monotone_loss() {
        let data = separable_clusters(200, 16, 7);
        let params = HeadParams::random(16, 16, 0.1, 8).unwrap();
        let out = train_head(params, &data, &TrainConfig::default()).unwrap();
        let last = out.curve.last().unwrap();
        assert!(last.accuracy >= 0.95, "{last:?}");
        for pair in out.curve.windows(2) {
            assert!(pair[1].loss <= pair[0].loss, "{pair:?}");
        }
        let again = train_head(HeadParams::random(16, 16, 0.1, 8).unwrap(), &data, &TrainConfig::default()).unwrap();
        assert_eq!(again.params, out.params);
    }

    #[test]
    fn demo_converges_for_many_seeds() {
        for seed in 0..40 {
            let out = train_demo(seed).unwrap();
            let last = out.curve.last().unwrap();
            assert!(last.accuracy >= 0.95 && loss_is_monotone(&out.curve), "seed {seed}: {:?}", out.curve);
        }
    }

    #[test]
    fn csv_layout() {
        let curve = [EpochStats { epoch: 1, loss: 0.5, accuracy: 0.75 }];
        assert_eq!(curve_csv(&curve), "epoch,loss,accuracy\n1,0.500000,0.7500\n");
    }

    #[test]
    fn archive_round_trip() {
        let p = HeadParams::random(6, 3, 0.1, 1).unwrap();
        let mut a = WeightArchive::new();
        p.store(&mut a).unwrap();
        let back = HeadParams::from_archive(&a, 6, 3).unwrap();
        for (x, y) in p.w1.iter().zip(&back.w1) {
            assert_eq!(*x as f32, *y as f32);
        }
    }
}
