//! Inverted-residual bottleneck block.

use crate::error::{Error, Result};
use crate::ops::{self, BatchNormParams};
use crate::tensor::Tensor;

/// A bias-free convolution followed by batch normalization.
#[derive(Clone, Debug)]
pub struct ConvBn {
    pub weight: Tensor,
    pub bn: BatchNormParams,
}

/// Parameters of one bottleneck block. `expand` is absent when the
/// expansion factor is 1.
#[derive(Clone, Debug)]
pub struct BottleneckParams {
    pub expand: Option<ConvBn>,
    /// `[hidden, 1, 3, 3]` depthwise kernel.
    pub depthwise: ConvBn,
    /// `[out, hidden, 1, 1]` linear projection.
    pub project: ConvBn,
}

impl BottleneckParams {
    pub fn out_channels(&self) -> usize {
        self.project.weight.shape()[0]
    }

    pub fn hidden_channels(&self) -> usize {
        self.depthwise.weight.shape()[0]
    }
}

/// expand (1x1) -> BN -> ReLU6 -> depthwise 3x3 -> BN -> ReLU6 -> project
/// (1x1) -> BN, with no activation after the projection. When `residual`
/// is set the block input is added to the projection.
pub fn bottleneck_block(
    input: &Tensor,
    params: &BottleneckParams,
    stride: usize,
    residual: bool,
) -> Result<Tensor> {
    let [_, in_c, _, _] = input.dims4()?;
    if residual && (stride != 1 || in_c != params.out_channels()) {
        return Err(Error::shape(
            "bottleneck_block",
            format!(
                "residual needs stride 1 and equal channels, got stride {stride}, {in_c} -> {}",
                params.out_channels()
            ),
        ));
    }
    let hidden = match &params.expand {
        Some(expand) => {
            let x = ops::pointwise_conv2d(input, &expand.weight, None)?;
            ops::relu6(&ops::batch_norm(&x, &expand.bn)?)
        }
        None => input.clone(),
    };
    let x = ops::depthwise_conv2d(&hidden, &params.depthwise.weight, None, stride, 1)?;
    let x = ops::relu6(&ops::batch_norm(&x, &params.depthwise.bn)?);
    let x = ops::pointwise_conv2d(&x, &params.project.weight, None)?;
    let projected = ops::batch_norm(&x, &params.project.bn)?;
    if residual {
        ops::add(&projected, input)
    } else {
        Ok(projected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::Lcg;

    fn random(shape: &[usize], rng: &mut Lcg) -> Tensor {
        let len = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..len).map(|_| rng.next_symmetric(1.0)).collect()).unwrap()
    }

    fn random_bn(c: usize, rng: &mut Lcg) -> BatchNormParams {
        BatchNormParams {
            gamma: (0..c).map(|_| 1.0 + rng.next_symmetric(0.2)).collect(),
            beta: (0..c).map(|_| rng.next_symmetric(0.2)).collect(),
            mean: (0..c).map(|_| rng.next_symmetric(0.2)).collect(),
            variance: (0..c).map(|_| 1.0 + rng.next_symmetric(0.5)).collect(),
            epsilon: 1e-3,
        }
    }

    fn zero_bn(c: usize) -> BatchNormParams {
        BatchNormParams {
            gamma: vec![0.0; c],
            beta: vec![0.0; c],
            mean: vec![0.0; c],
            variance: vec![1.0; c],
            epsilon: 1e-3,
        }
    }

    fn zero_params(c_in: usize, hidden: usize, c_out: usize) -> BottleneckParams {
        BottleneckParams {
            expand: Some(ConvBn {
                weight: Tensor::zeros(&[hidden, c_in, 1, 1]).unwrap(),
                bn: zero_bn(hidden),
            }),
            depthwise: ConvBn {
                weight: Tensor::zeros(&[hidden, 1, 3, 3]).unwrap(),
                bn: zero_bn(hidden),
            },
            project: ConvBn {
                weight: Tensor::zeros(&[c_out, hidden, 1, 1]).unwrap(),
                bn: zero_bn(c_out),
            },
        }
    }

    #[test]
    fn zeroed_residual_block_is_identity() {
        let mut rng = Lcg::new(2);
        let x = random(&[1, 4, 6, 6], &mut rng);
        let y = bottleneck_block(&x, &zero_params(4, 24, 4), 1, true).unwrap();
        assert!(y.bit_eq(&x));
    }

    #[test]
    fn zeroed_plain_block_is_zero() {
        let mut rng = Lcg::new(2);
        let x = random(&[1, 4, 6, 6], &mut rng);
        let y = bottleneck_block(&x, &zero_params(4, 24, 8), 2, false).unwrap();
        assert_eq!(y.shape(), &[1, 8, 3, 3]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn residual_shape_mismatch_rejected() {
        let x = Tensor::zeros(&[1, 4, 6, 6]).unwrap();
        assert!(bottleneck_block(&x, &zero_params(4, 24, 8), 1, true).is_err());
        assert!(bottleneck_block(&x, &zero_params(4, 24, 4), 2, true).is_err());
    }

    #[test]
    fn matches_manual_operator_composition() {
        let mut rng = Lcg::new(17);
        let x = random(&[1, 4, 7, 7], &mut rng);
        let p = BottleneckParams {
            expand: Some(ConvBn { weight: random(&[24, 4, 1, 1], &mut rng), bn: random_bn(24, &mut rng) }),
            depthwise: ConvBn { weight: random(&[24, 1, 3, 3], &mut rng), bn: random_bn(24, &mut rng) },
            project: ConvBn { weight: random(&[4, 24, 1, 1], &mut rng), bn: random_bn(4, &mut rng) },
        };
        let e = p.expand.as_ref().unwrap();
        let h = ops::relu6(&ops::batch_norm(&ops::conv2d(&x, &e.weight, None, 1, 0).unwrap(), &e.bn).unwrap());
        let d = ops::conv2d(
            &h,
            &{
                // depthwise as a block-diagonal dense kernel
                let mut w = vec![0.0; 24 * 24 * 9];
                for c in 0..24 {
                    w[(c * 24 + c) * 9..(c * 24 + c + 1) * 9]
                        .copy_from_slice(&p.depthwise.weight.data()[c * 9..(c + 1) * 9]);
                }
                Tensor::new(vec![24, 24, 3, 3], w).unwrap()
            },
            None,
            1,
            1,
        )
        .unwrap();
        let d = ops::relu6(&ops::batch_norm(&d, &p.depthwise.bn).unwrap());
        let o = ops::batch_norm(&ops::conv2d(&d, &p.project.weight, None, 1, 0).unwrap(), &p.project.bn).unwrap();
        let want = ops::add(&o, &x).unwrap();
        let got = bottleneck_block(&x, &p, 1, true).unwrap();
        assert!(got.max_abs_diff(&want).unwrap() <= 1e-5);
    }
}
