//! Sequential networks bound to a [`WeightArchive`].
//!
//! A [`LayerSpec`] names a layer and describes its shape; parameter names are
//! derived from the layer name (`<layer>.weight`, `<layer>.bias`,
//! `<layer>.gamma`, `<layer>.beta`, `<layer>.mean`, `<layer>.var`,
//! `<layer>.alpha`). Bottleneck blocks use the sub-prefixes `expand`,
//! `dw` and `project`, each with `.weight` and the batch-norm set.

use crate::block::{self, BottleneckParams, ConvBn};
use crate::error::{Error, Result};
use crate::ops::{self, BatchNormParams};
use crate::tensor::Tensor;
use crate::weights::WeightArchive;

#[derive(Clone, Debug, PartialEq)]
pub enum LayerKind {
    Conv {
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    },
    DepthwiseConv {
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    },
    PointwiseConv {
        out_channels: usize,
        bias: bool,
    },
    BatchNorm {
        epsilon: f32,
    },
    Relu,
    Relu6,
    Prelu,
    MaxPool {
        kernel: usize,
        stride: usize,
    },
    GlobalAvgPool,
    Dense {
        in_features: usize,
        out_features: usize,
    },
    Softmax,
    Bottleneck {
        expansion: usize,
        out_channels: usize,
        stride: usize,
        residual: bool,
        epsilon: f32,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        LayerSpec {
            name: name.into(),
            kind,
        }
    }

    /// Channels (or features, after a dense layer) produced for `in_channels`.
    pub fn output_channels(&self, in_channels: usize) -> usize {
        match self.kind {
            LayerKind::Conv { out_channels, .. }
            | LayerKind::PointwiseConv { out_channels, .. }
            | LayerKind::Bottleneck { out_channels, .. } => out_channels,
            LayerKind::Dense { out_features, .. } => out_features,
            _ => in_channels,
        }
    }

    /// `(name, shape)` of every parameter this layer reads.
    pub fn param_specs(&self, in_channels: usize) -> Vec<(String, Vec<usize>)> {
        let p = |suffix: &str| format!("{}.{suffix}", self.name);
        let bn = |prefix: String, c: usize| -> Vec<(String, Vec<usize>)> {
            ["gamma", "beta", "mean", "var"]
                .iter()
                .map(|s| (format!("{prefix}.{s}"), vec![c]))
                .collect()
        };
        match self.kind {
            LayerKind::Conv {
                out_channels,
                kernel,
                bias,
                ..
            } => {
                let mut v = vec![(p("weight"), vec![out_channels, in_channels, kernel, kernel])];
                if bias {
                    v.push((p("bias"), vec![out_channels]));
                }
                v
            }
            LayerKind::DepthwiseConv { kernel, bias, .. } => {
                let mut v = vec![(p("weight"), vec![in_channels, 1, kernel, kernel])];
                if bias {
                    v.push((p("bias"), vec![in_channels]));
                }
                v
            }
            LayerKind::PointwiseConv { out_channels, bias } => {
                let mut v = vec![(p("weight"), vec![out_channels, in_channels, 1, 1])];
                if bias {
                    v.push((p("bias"), vec![out_channels]));
                }
                v
            }
            LayerKind::BatchNorm { .. } => bn(self.name.clone(), in_channels),
            LayerKind::Prelu => vec![(p("alpha"), vec![in_channels])],
            LayerKind::Dense {
                in_features,
                out_features,
            } => vec![
                (p("weight"), vec![out_features, in_features]),
                (p("bias"), vec![out_features]),
            ],
            LayerKind::Bottleneck {
                expansion,
                out_channels,
                ..
            } => {
                let hidden = in_channels * expansion;
                let mut v = Vec::new();
                if expansion != 1 {
                    v.push((p("expand.weight"), vec![hidden, in_channels, 1, 1]));
                    v.extend(bn(p("expand"), hidden));
                }
                v.push((p("dw.weight"), vec![hidden, 1, 3, 3]));
                v.extend(bn(p("dw"), hidden));
                v.push((p("project.weight"), vec![out_channels, hidden, 1, 1]));
                v.extend(bn(p("project"), out_channels));
                v
            }
            LayerKind::Relu
            | LayerKind::Relu6
            | LayerKind::MaxPool { .. }
            | LayerKind::GlobalAvgPool
            | LayerKind::Softmax => Vec::new(),
        }
    }
}

/// Parameter specs for a whole layer sequence, checking channel flow.
pub fn param_specs(input_channels: usize, layers: &[LayerSpec]) -> Result<Vec<(String, Vec<usize>)>> {
    let mut channels = input_channels;
    let mut out = Vec::new();
    for layer in layers {
        check_layer(layer, channels)?;
        out.extend(layer.param_specs(channels));
        channels = layer.output_channels(channels);
    }
    Ok(out)
}

fn check_layer(layer: &LayerSpec, in_channels: usize) -> Result<()> {
    let bad = |msg: String| Err(Error::shape(format!("layer `{}`", layer.name), msg));
    match layer.kind {
        LayerKind::Conv { stride, kernel, out_channels, .. } if stride == 0 || kernel == 0 || out_channels == 0 => {
            bad("zero stride, kernel or channel count".into())
        }
        LayerKind::DepthwiseConv { stride, kernel, .. } | LayerKind::MaxPool { stride, kernel }
            if stride == 0 || kernel == 0 =>
        {
            bad("zero stride or kernel".into())
        }
        LayerKind::Bottleneck { expansion, stride, residual, out_channels, .. } => {
            if expansion == 0 || out_channels == 0 || !(stride == 1 || stride == 2) {
                return bad(format!("invalid block expansion {expansion}, stride {stride}"));
            }
            if residual && (stride != 1 || in_channels != out_channels) {
                return bad(format!(
                    "residual block needs stride 1 and {in_channels} -> {in_channels} channels, got stride {stride}, {in_channels} -> {out_channels}"
                ));
            }
            Ok(())
        }
        LayerKind::BatchNorm { epsilon } if !(epsilon >= 0.0) => bad(format!("epsilon {epsilon}")),
        _ => Ok(()),
    }
}

#[derive(Clone, Debug)]
enum Op {
    Conv { weight: Tensor, bias: Option<Vec<f32>>, stride: usize, padding: usize },
    Depthwise { weight: Tensor, bias: Option<Vec<f32>>, stride: usize, padding: usize },
    Pointwise { weight: Tensor, bias: Option<Vec<f32>> },
    BatchNorm(BatchNormParams),
    Relu,
    Relu6,
    Prelu(Vec<f32>),
    MaxPool { kernel: usize, stride: usize },
    GlobalAvgPool,
    Dense { weight: Tensor, bias: Vec<f32> },
    Softmax,
    Bottleneck { params: Box<BottleneckParams>, stride: usize, residual: bool },
}

#[derive(Clone, Debug)]
struct Layer {
    name: String,
    op: Op,
}

/// An immutable layer sequence with bound parameters.
#[derive(Clone, Debug)]
pub struct Network {
    input_channels: usize,
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
}

fn fetch(archive: &WeightArchive, name: &str, shape: &[usize]) -> Result<Tensor> {
    archive.require(name, shape).cloned()
}

fn fetch_bn(archive: &WeightArchive, prefix: &str, c: usize, epsilon: f32) -> Result<BatchNormParams> {
    let get = |s: &str| fetch(archive, &format!("{prefix}.{s}"), &[c]).map(Tensor::into_data);
    let params = BatchNormParams {
        gamma: get("gamma")?,
        beta: get("beta")?,
        mean: get("mean")?,
        variance: get("var")?,
        epsilon,
    };
    if let Some(v) = params.variance.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "`{prefix}.var` holds negative variance {v}"
        )));
    }
    Ok(params)
}

impl Network {
    /// Binds `layers` to parameters in `archive`, checking every name and
    /// shape, for inputs with `input_channels` channels.
    pub fn build(input_channels: usize, layers: Vec<LayerSpec>, archive: &WeightArchive) -> Result<Self> {
        let mut channels = input_channels;
        let mut bound = Vec::with_capacity(layers.len());
        for spec in &layers {
            check_layer(spec, channels)?;
            let name = &spec.name;
            let w = |suffix: &str, shape: Vec<usize>| fetch(archive, &format!("{name}.{suffix}"), &shape);
            let b = |present: bool, c: usize| -> Result<Option<Vec<f32>>> {
                if present {
                    Ok(Some(w("bias", vec![c])?.into_data()))
                } else {
                    Ok(None)
                }
            };
            let op = match spec.kind {
                LayerKind::Conv { out_channels, kernel, stride, padding, bias } => Op::Conv {
                    weight: w("weight", vec![out_channels, channels, kernel, kernel])?,
                    bias: b(bias, out_channels)?,
                    stride,
                    padding,
                },
                LayerKind::DepthwiseConv { kernel, stride, padding, bias } => Op::Depthwise {
                    weight: w("weight", vec![channels, 1, kernel, kernel])?,
                    bias: b(bias, channels)?,
                    stride,
                    padding,
                },
                LayerKind::PointwiseConv { out_channels, bias } => Op::Pointwise {
                    weight: w("weight", vec![out_channels, channels, 1, 1])?,
                    bias: b(bias, out_channels)?,
                },
                LayerKind::BatchNorm { epsilon } => Op::BatchNorm(fetch_bn(archive, name, channels, epsilon)?),
                LayerKind::Relu => Op::Relu,
                LayerKind::Relu6 => Op::Relu6,
                LayerKind::Prelu => Op::Prelu(w("alpha", vec![channels])?.into_data()),
                LayerKind::MaxPool { kernel, stride } => Op::MaxPool { kernel, stride },
                LayerKind::GlobalAvgPool => Op::GlobalAvgPool,
                LayerKind::Dense { in_features, out_features } => Op::Dense {
                    weight: w("weight", vec![out_features, in_features])?,
                    bias: w("bias", vec![out_features])?.into_data(),
                },
                LayerKind::Softmax => Op::Softmax,
                LayerKind::Bottleneck { expansion, out_channels, stride, residual, epsilon } => {
                    let hidden = channels * expansion;
                    let conv_bn = |sub: &str, shape: Vec<usize>, c: usize| -> Result<ConvBn> {
                        Ok(ConvBn {
                            weight: w(&format!("{sub}.weight"), shape)?,
                            bn: fetch_bn(archive, &format!("{name}.{sub}"), c, epsilon)?,
                        })
                    };
                    let expand = if expansion == 1 {
                        None
                    } else {
                        Some(conv_bn("expand", vec![hidden, channels, 1, 1], hidden)?)
                    };
                    Op::Bottleneck {
                        params: Box::new(BottleneckParams {
                            expand,
                            depthwise: conv_bn("dw", vec![hidden, 1, 3, 3], hidden)?,
                            project: conv_bn("project", vec![out_channels, hidden, 1, 1], out_channels)?,
                        }),
                        stride,
                        residual,
                    }
                }
            };
            bound.push(Layer { name: name.clone(), op });
            channels = spec.output_channels(channels);
        }
        Ok(Network {
            input_channels,
            specs: layers,
            layers: bound,
        })
    }

    /// A network with no layers; its forward pass is the identity.
    pub fn empty(input_channels: usize) -> Self {
        Network {
            input_channels,
            specs: Vec::new(),
            layers: Vec::new(),
        }
    }

    pub fn input_channels(&self) -> usize {
        self.input_channels
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layer_names(&self) -> impl Iterator<Item = &str> {
        self.layers.iter().map(|l| l.name.as_str())
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let mut x = input.clone();
        for layer in &self.layers {
            x = apply(layer, &x).map_err(|e| e.in_layer(&layer.name))?;
        }
        Ok(x)
    }

    /// Forward pass that also returns every layer's output, keyed by layer name.
    pub fn forward_traced(&self, input: &Tensor) -> Result<(Tensor, Vec<(String, Tensor)>)> {
        let mut x = input.clone();
        let mut trace = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            x = apply(layer, &x).map_err(|e| e.in_layer(&layer.name))?;
            trace.push((layer.name.clone(), x.clone()));
        }
        Ok((x, trace))
    }
}

fn apply(layer: &Layer, x: &Tensor) -> Result<Tensor> {
    match &layer.op {
        Op::Conv { weight, bias, stride, padding } => ops::conv2d(x, weight, bias.as_deref(), *stride, *padding),
        Op::Depthwise { weight, bias, stride, padding } => {
            ops::depthwise_conv2d(x, weight, bias.as_deref(), *stride, *padding)
        }
        Op::Pointwise { weight, bias } => ops::pointwise_conv2d(x, weight, bias.as_deref()),
        Op::BatchNorm(p) => ops::batch_norm(x, p),
        Op::Relu => Ok(ops::relu(x)),
        Op::Relu6 => Ok(ops::relu6(x)),
        Op::Prelu(alpha) => ops::prelu(x, alpha),
        Op::MaxPool { kernel, stride } => ops::max_pool2d(x, *kernel, *stride),
        Op::GlobalAvgPool => ops::global_avg_pool(x),
        Op::Dense { weight, bias } => ops::dense(x, weight, Some(bias)),
        Op::Softmax => ops::softmax(x),
        Op::Bottleneck { params, stride, residual } => block::bottleneck_block(x, params, *stride, *residual),
    }
}
