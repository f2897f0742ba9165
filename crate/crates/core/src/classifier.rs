//! Mask / no-mask classifier: a MobileNetV2 backbone of 17 bottleneck
//! blocks followed by a small dense head.
//!
//! Layer names: `backbone.stem`, `backbone.blockNN` (00..=16),
//! `backbone.last`, then `head.fc1` and `head.fc2`. Class index 0 is
//! [`MaskLabel::Mask`], index 1 is [`MaskLabel::NoMask`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::detector::{crop_resize, normalize_pixels, square_pad, FaceCandidate};
use crate::error::{Error, Result};
use crate::network::{self, LayerKind, LayerSpec, Network};
use crate::tensor::Tensor;
use crate::weights::WeightArchive;

/// Number of bottleneck blocks the backbone must contain.
pub const BLOCK_COUNT: usize = 17;
pub const CLASS_ORDER: &str = "Mask,NoMask";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MaskLabel {
    Mask,
    NoMask,
}

impl MaskLabel {
    pub fn index(self) -> usize {
        match self {
            MaskLabel::Mask => 0,
            MaskLabel::NoMask => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(MaskLabel::Mask),
            1 => Some(MaskLabel::NoMask),
            _ => None,
        }
    }
}

impl fmt::Display for MaskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskLabel::Mask => "Mask",
            MaskLabel::NoMask => "NoMask",
        })
    }
}

impl std::str::FromStr for MaskLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Mask" => Ok(MaskLabel::Mask),
            "NoMask" => Ok(MaskLabel::NoMask),
            other => Err(Error::InvalidArgument(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskPrediction {
    pub label: MaskLabel,
    /// Probability of `label`.
    pub confidence: f32,
    /// `[p(Mask), p(NoMask)]`.
    pub probabilities: [f32; 2],
}

impl MaskPrediction {
    /// Argmax of `probabilities`; an exact tie resolves to `NoMask`.
    pub fn from_probabilities(probabilities: [f32; 2]) -> Self {
        let label = if probabilities[0] > probabilities[1] {
            MaskLabel::Mask
        } else {
            MaskLabel::NoMask
        };
        MaskPrediction {
            label,
            confidence: probabilities[label.index()],
            probabilities,
        }
    }
}

/// One row of the block table: `repeats` blocks, the first with `stride`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockGroup {
    pub expansion: usize,
    pub out_channels: usize,
    pub repeats: usize,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackboneSpec {
    pub input_extent: usize,
    pub width_multiplier: f32,
    pub stem_channels: usize,
    pub last_channels: usize,
    pub groups: Vec<BlockGroup>,
    pub head_hidden: usize,
    pub bn_epsilon: f32,
}

impl Default for BackboneSpec {
    fn default() -> Self {
        let g = |expansion, out_channels, repeats, stride| BlockGroup {
            expansion,
            out_channels,
            repeats,
            stride,
        };
        BackboneSpec {
            input_extent: 96,
            width_multiplier: 1.0,
            stem_channels: 32,
            last_channels: 1280,
            groups: vec![
                g(1, 16, 1, 1),
                g(6, 24, 2, 2),
                g(6, 32, 3, 2),
                g(6, 64, 4, 2),
                g(6, 96, 3, 1),
                g(6, 160, 3, 2),
                g(6, 320, 1, 1),
            ],
            head_hidden: 128,
            bn_epsilon: 1e-3,
        }
    }
}

/// Rounds `v` to a multiple of 8, never dropping more than 10%.
fn make_divisible(v: f32) -> usize {
    let divisor = 8.0f32;
    let rounded = ((v + divisor / 2.0) / divisor).floor() * divisor;
    let mut out = rounded.max(divisor);
    if out < 0.9 * v {
        out += divisor;
    }
    out as usize
}

impl BackboneSpec {
    pub fn block_count(&self) -> usize {
        self.groups.iter().map(|g| g.repeats).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_count() != BLOCK_COUNT {
            return Err(Error::Config(format!(
                "backbone must have {BLOCK_COUNT} bottleneck blocks, table has {}",
                self.block_count()
            )));
        }
        if !(32..=224).contains(&self.input_extent) {
            return Err(Error::Config(format!(
                "classifier input extent must lie in 32..=224, got {}",
                self.input_extent
            )));
        }
        if !(self.width_multiplier > 0.0) || self.head_hidden == 0 {
            return Err(Error::Config("width multiplier and head width must be positive".into()));
        }
        Ok(())
    }

    fn scaled(&self, c: usize) -> usize {
        make_divisible(c as f32 * self.width_multiplier)
    }

    pub fn final_channels(&self) -> usize {
        if self.width_multiplier > 1.0 {
            self.scaled(self.last_channels)
        } else {
            self.last_channels
        }
    }

    /// Full layer table: stem, blocks, final 1x1 conv, head.
    pub fn layers(&self) -> Result<Vec<LayerSpec>> {
        self.validate()?;
        let eps = self.bn_epsilon;
        let mut layers = Vec::new();
        let conv_bn_relu6 = |layers: &mut Vec<LayerSpec>, name: &str, out_channels, kernel, stride, padding| {
            layers.push(LayerSpec::new(
                name,
                LayerKind::Conv { out_channels, kernel, stride, padding, bias: false },
            ));
            layers.push(LayerSpec::new(format!("{name}.bn"), LayerKind::BatchNorm { epsilon: eps }));
            layers.push(LayerSpec::new(format!("{name}.act"), LayerKind::Relu6));
        };
        let mut channels = self.scaled(self.stem_channels);
        conv_bn_relu6(&mut layers, "backbone.stem", channels, 3, 2, 1);
        let mut index = 0;
        for g in &self.groups {
            let out = self.scaled(g.out_channels);
            for r in 0..g.repeats {
                let stride = if r == 0 { g.stride } else { 1 };
                layers.push(LayerSpec::new(
                    format!("backbone.block{index:02}"),
                    LayerKind::Bottleneck {
                        expansion: g.expansion,
                        out_channels: out,
                        stride,
                        residual: stride == 1 && channels == out,
                        epsilon: eps,
                    },
                ));
                channels = out;
                index += 1;
            }
        }
        let last = self.final_channels();
        conv_bn_relu6(&mut layers, "backbone.last", last, 1, 1, 0);
        layers.push(LayerSpec::new("head.pool", LayerKind::GlobalAvgPool));
        layers.push(LayerSpec::new(
            "head.fc1",
            LayerKind::Dense { in_features: last, out_features: self.head_hidden },
        ));
        layers.push(LayerSpec::new("head.relu", LayerKind::Relu));
        layers.push(LayerSpec::new(
            "head.fc2",
            LayerKind::Dense { in_features: self.head_hidden, out_features: 2 },
        ));
        layers.push(LayerSpec::new("head.softmax", LayerKind::Softmax));
        Ok(layers)
    }

    /// Layers up to and including the global pool, which emits the
    /// feature vector the head consumes.
    pub fn feature_layers(&self) -> Result<Vec<LayerSpec>> {
        let mut layers = self.layers()?;
        let pool = layers.iter().position(|l| l.name == "head.pool").expect("head.pool present");
        layers.truncate(pool + 1);
        Ok(layers)
    }

    pub fn param_specs(&self) -> Result<Vec<(String, Vec<usize>)>> {
        network::param_specs(3, &self.layers()?)
    }
}

/// A bound classifier network.
#[derive(Clone, Debug)]
pub struct MaskClassifier {
    spec: BackboneSpec,
    network: Network,
}

impl MaskClassifier {
    pub fn build(spec: BackboneSpec, weights: &WeightArchive) -> Result<Self> {
        if let Some(order) = weights.metadata().get("class_order") {
            if order != CLASS_ORDER {
                return Err(Error::Config(format!(
                    "classifier archive declares class order {order:?}, expected {CLASS_ORDER:?}"
                )));
            }
        }
        let network = Network::build(3, spec.layers()?, weights)?;
        Ok(MaskClassifier { spec, network })
    }

    pub fn spec(&self) -> &BackboneSpec {
        &self.spec
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    fn check_input(&self, crop: &Tensor) -> Result<()> {
        let e = self.spec.input_extent;
        if crop.shape() != [1, 3, e, e] {
            return Err(Error::shape(
                "classify_face",
                format!("expected a [1, 3, {e}, {e}] crop, got {:?}", crop.shape()),
            ));
        }
        Ok(())
    }

    /// Classifies a crop that is already resized and normalized.
    pub fn classify_face(&self, crop: &Tensor) -> Result<MaskPrediction> {
        self.check_input(crop)?;
        let p = self.network.forward(crop)?;
        Ok(MaskPrediction::from_probabilities([p.data()[0], p.data()[1]]))
    }

    /// Crops every face from the raw frame (square-padded) and classifies it,
    /// preserving input order.
    pub fn classify_all(&self, frame: &Tensor, faces: &[FaceCandidate]) -> Result<Vec<(FaceCandidate, MaskPrediction)>> {
        faces
            .iter()
            .map(|face| {
                let crop = crop_resize(frame, &square_pad(&face.bbox), self.spec.input_extent)?;
                let prediction = self.classify_face(&normalize_pixels(&crop))?;
                Ok((face.clone(), prediction))
            })
            .collect()
    }
}
