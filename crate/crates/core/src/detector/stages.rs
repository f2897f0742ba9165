//! Layer tables for the three cascade networks.
//!
//! Each stage is a trunk followed by independent heads: a two-way softmax
//! (`[background, face]`), four box-regression outputs, and for the output
//! stage ten landmark outputs ordered `x0, y0, x1, y1, .., x4, y4`
//! normalized to the input crop.

use crate::error::Result;
use crate::network::{self, LayerKind, LayerSpec, Network};
use crate::tensor::Tensor;
use crate::weights::WeightArchive;

/// Channel of the classification head holding the face probability.
pub const FACE_CHANNEL: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Proposal,
    Refine,
    Output,
}

impl Stage {
    pub fn prefix(self) -> &'static str {
        match self {
            Stage::Proposal => "pnet",
            Stage::Refine => "rnet",
            Stage::Output => "onet",
        }
    }

    /// Square input side the stage was laid out for.
    pub fn input_extent(self) -> usize {
        match self {
            Stage::Proposal => 12,
            Stage::Refine => 24,
            Stage::Output => 48,
        }
    }

    pub fn has_landmarks(self) -> bool {
        self == Stage::Output
    }
}

fn conv(name: String, out_channels: usize, kernel: usize) -> LayerSpec {
    LayerSpec::new(
        name,
        LayerKind::Conv {
            out_channels,
            kernel,
            stride: 1,
            padding: 0,
            bias: true,
        },
    )
}

fn pool(name: String, kernel: usize) -> LayerSpec {
    LayerSpec::new(name, LayerKind::MaxPool { kernel, stride: 2 })
}

fn act(name: String) -> LayerSpec {
    LayerSpec::new(name, LayerKind::Prelu)
}

/// Trunk layers and the channel count they emit.
pub fn trunk_layers(stage: Stage) -> (Vec<LayerSpec>, usize) {
    let p = stage.prefix();
    let n = |s: &str| format!("{p}.{s}");
    match stage {
        Stage::Proposal => (
            vec![
                conv(n("conv1"), 10, 3),
                act(n("prelu1")),
                pool(n("pool1"), 2),
                conv(n("conv2"), 16, 3),
                act(n("prelu2")),
                conv(n("conv3"), 32, 3),
                act(n("prelu3")),
            ],
            32,
        ),
        // 24 -> 22 -> 10 -> 8 -> 3 -> 2
        Stage::Refine => (
            vec![
                conv(n("conv1"), 28, 3),
                act(n("prelu1")),
                pool(n("pool1"), 3),
                conv(n("conv2"), 48, 3),
                act(n("prelu2")),
                pool(n("pool2"), 3),
                conv(n("conv3"), 64, 2),
                act(n("prelu3")),
                LayerSpec::new(n("fc"), LayerKind::Dense { in_features: 64 * 2 * 2, out_features: 128 }),
                act(n("prelu4")),
            ],
            128,
        ),
        // 48 -> 46 -> 22 -> 20 -> 9 -> 7 -> 3 -> 2
        Stage::Output => (
            vec![
                conv(n("conv1"), 32, 3),
                act(n("prelu1")),
                pool(n("pool1"), 3),
                conv(n("conv2"), 64, 3),
                act(n("prelu2")),
                pool(n("pool2"), 3),
                conv(n("conv3"), 64, 3),
                act(n("prelu3")),
                pool(n("pool3"), 2),
                conv(n("conv4"), 128, 2),
                act(n("prelu4")),
                LayerSpec::new(n("fc"), LayerKind::Dense { in_features: 128 * 2 * 2, out_features: 256 }),
                act(n("prelu5")),
            ],
            256,
        ),
    }
}

fn head(stage: Stage, name: &str, trunk_channels: usize, outputs: usize, softmax: bool) -> Vec<LayerSpec> {
    let full = format!("{}.{name}", stage.prefix());
    let mut layers = vec![match stage {
        Stage::Proposal => LayerSpec::new(full.clone(), LayerKind::PointwiseConv { out_channels: outputs, bias: true }),
        _ => LayerSpec::new(
            full.clone(),
            LayerKind::Dense {
                in_features: trunk_channels,
                out_features: outputs,
            },
        ),
    }];
    if softmax {
        layers.push(LayerSpec::new(format!("{full}.prob"), LayerKind::Softmax));
    }
    layers
}

fn all_layers(stage: Stage) -> (Vec<LayerSpec>, usize, [Vec<LayerSpec>; 3]) {
    let (trunk, c) = trunk_layers(stage);
    let landmarks = if stage.has_landmarks() {
        head(stage, "landmark", c, 10, false)
    } else {
        Vec::new()
    };
    (trunk, c, [head(stage, "cls", c, 2, true), head(stage, "box", c, 4, false), landmarks])
}

/// Every parameter `(name, shape)` of one stage.
pub fn stage_param_specs(stage: Stage) -> Result<Vec<(String, Vec<usize>)>> {
    let (trunk, c, heads) = all_layers(stage);
    let mut specs = network::param_specs(3, &trunk)?;
    for h in heads.iter().filter(|h| !h.is_empty()) {
        specs.extend(network::param_specs(c, h)?);
    }
    Ok(specs)
}

/// Parameters of all three stages, proposal first.
pub fn cascade_param_specs() -> Result<Vec<(String, Vec<usize>)>> {
    let mut specs = Vec::new();
    for stage in [Stage::Proposal, Stage::Refine, Stage::Output] {
        specs.extend(stage_param_specs(stage)?);
    }
    Ok(specs)
}

/// Raw per-head outputs of a stage network.
#[derive(Clone, Debug)]
pub struct StageOutput {
    /// `[n, 2, h, w]` (proposal) or `[n, 2, 1, 1]` class probabilities.
    pub probabilities: Tensor,
    pub regression: Tensor,
    pub landmarks: Option<Tensor>,
}

#[derive(Clone, Debug)]
pub struct StageNetwork {
    stage: Stage,
    trunk: Network,
    classifier: Network,
    regressor: Network,
    landmarks: Option<Network>,
}

impl StageNetwork {
    pub fn build(stage: Stage, archive: &WeightArchive) -> Result<Self> {
        let (trunk, c, [cls, reg, lmk]) = all_layers(stage);
        Ok(StageNetwork {
            stage,
            trunk: Network::build(3, trunk, archive)?,
            classifier: Network::build(c, cls, archive)?,
            regressor: Network::build(c, reg, archive)?,
            landmarks: if lmk.is_empty() {
                None
            } else {
                Some(Network::build(c, lmk, archive)?)
            },
        })
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    /// Output of the shared trunk, the input of every head.
    pub fn features(&self, input: &Tensor) -> Result<Tensor> {
        self.trunk.forward(input)
    }

    pub fn forward(&self, input: &Tensor) -> Result<StageOutput> {
        let features = self.trunk.forward(input)?;
        Ok(StageOutput {
            probabilities: self.classifier.forward(&features)?,
            regression: self.regressor.forward(&features)?,
            landmarks: self
                .landmarks
                .as_ref()
                .map(|n| n.forward(&features))
                .transpose()?,
        })
    }
}

/// The three stage networks of the cascade.
#[derive(Clone, Debug)]
pub struct CascadeNetworks {
    pub proposal: StageNetwork,
    pub refine: StageNetwork,
    pub output: StageNetwork,
}

impl CascadeNetworks {
    pub fn from_archive(archive: &WeightArchive) -> Result<Self> {
        Ok(CascadeNetworks {
            proposal: StageNetwork::build(Stage::Proposal, archive)?,
            refine: StageNetwork::build(Stage::Refine, archive)?,
            output: StageNetwork::build(Stage::Output, archive)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::random_init;

    #[test]
    fn stage_shapes() {
        let archive = random_init(&cascade_param_specs().unwrap(), 3).unwrap();
        let nets = CascadeNetworks::from_archive(&archive).unwrap();

        let out = nets.proposal.forward(&Tensor::zeros(&[1, 3, 12, 12]).unwrap()).unwrap();
        assert_eq!(out.probabilities.shape(), &[1, 2, 1, 1]);
        assert_eq!(out.regression.shape(), &[1, 4, 1, 1]);
        let out = nets.proposal.forward(&Tensor::zeros(&[1, 3, 24, 30]).unwrap()).unwrap();
        assert_eq!(out.probabilities.shape(), &[1, 2, 7, 10]);

        let out = nets.refine.forward(&Tensor::zeros(&[2, 3, 24, 24]).unwrap()).unwrap();
        assert_eq!(out.probabilities.shape(), &[2, 2, 1, 1]);
        assert!(out.landmarks.is_none());

        let out = nets.output.forward(&Tensor::zeros(&[1, 3, 48, 48]).unwrap()).unwrap();
        assert_eq!(out.regression.shape(), &[1, 4, 1, 1]);
        assert_eq!(out.landmarks.unwrap().shape(), &[1, 10, 1, 1]);
    }

    #[test]
    fn missing_stage_rejected() {
        let archive = random_init(&stage_param_specs(Stage::Proposal).unwrap(), 3).unwrap();
        assert!(CascadeNetworks::from_archive(&archive).is_err());
    }
}
