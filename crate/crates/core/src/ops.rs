//! Forward operators.
//!
//! Every reduction accumulates in a fixed order (input channel, then kernel
//! row, then kernel column, bias last) so results are bit-reproducible.
//! Operators never modify their inputs.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn out_extent(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if stride == 0 || kernel == 0 || padded < kernel {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Output spatial extent of a convolution or pooling window along one axis.
pub fn conv_output_extent(input: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    out_extent(input, kernel, stride, padding).ok_or_else(|| {
        Error::shape(
            "window",
            format!("input extent {input} with padding {padding} is smaller than kernel {kernel} (stride {stride})"),
        )
    })
}

fn check_bias(op: &str, bias: Option<&[f32]>, channels: usize) -> Result<()> {
    match bias {
        Some(b) if b.len() != channels => Err(Error::shape(
            op,
            format!("bias has {} entries, expected {channels}", b.len()),
        )),
        _ => Ok(()),
    }
}

/// Accumulates one kernel plane's contribution into `out` for a single
/// input plane. Positions falling into zero padding contribute nothing.
#[allow(clippy::too_many_arguments)]
fn accumulate_plane(
    out: &mut [f32],
    plane: &[f32],
    kernel: &[f32],
    (ih, iw): (usize, usize),
    (kh, kw): (usize, usize),
    (oh, ow): (usize, usize),
    stride: usize,
    padding: usize,
) {
    for ky in 0..kh {
        for kx in 0..kw {
            let wv = kernel[ky * kw + kx];
            // ox range with 0 <= ox*stride + kx - padding < iw
            let ox_lo = padding.saturating_sub(kx).div_ceil(stride);
            let ox_hi = if iw + padding > kx {
                ((iw + padding - kx - 1) / stride + 1).min(ow)
            } else {
                0
            };
            if ox_lo >= ox_hi {
                continue;
            }
            for oy in 0..oh {
                let iy = (oy * stride + ky) as isize - padding as isize;
                if iy < 0 || iy as usize >= ih {
                    continue;
                }
                let row = &plane[iy as usize * iw..(iy as usize + 1) * iw];
                let orow = &mut out[oy * ow..(oy + 1) * ow];
                if stride == 1 {
                    let ix0 = ox_lo + kx - padding;
                    let n = ox_hi - ox_lo;
                    for (o, x) in orow[ox_lo..ox_hi].iter_mut().zip(&row[ix0..ix0 + n]) {
                        *o += wv * x;
                    }
                } else {
                    for ox in ox_lo..ox_hi {
                        orow[ox] += wv * row[ox * stride + kx - padding];
                    }
                }
            }
        }
    }
}

/// Dense 2-D convolution. `weight` is `[out_c, in_c, kh, kw]`.
pub fn conv2d(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&[f32]>,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let [n, c, ih, iw] = input.dims4()?;
    let [oc, wc, kh, kw] = weight.dims4().map_err(|e| e.in_layer("conv2d weight"))?;
    if wc != c {
        return Err(Error::shape(
            "conv2d",
            format!("input has {c} channels, weight expects {wc}"),
        ));
    }
    check_bias("conv2d", bias, oc)?;
    let oh = conv_output_extent(ih, kh, stride, padding).map_err(|e| e.in_layer("conv2d"))?;
    let ow = conv_output_extent(iw, kw, stride, padding).map_err(|e| e.in_layer("conv2d"))?;

    let in_plane = ih * iw;
    let out_plane = oh * ow;
    let ksize = kh * kw;
    let mut out = vec![0.0f32; n * oc * out_plane];
    let src = input.data();
    let wts = weight.data();
    for b in 0..n {
        for o in 0..oc {
            let dst = &mut out[(b * oc + o) * out_plane..(b * oc + o + 1) * out_plane];
            for i in 0..c {
                let plane = &src[(b * c + i) * in_plane..(b * c + i + 1) * in_plane];
                let kernel = &wts[(o * c + i) * ksize..(o * c + i + 1) * ksize];
                accumulate_plane(dst, plane, kernel, (ih, iw), (kh, kw), (oh, ow), stride, padding);
            }
            if let Some(bias) = bias {
                dst.iter_mut().for_each(|v| *v += bias[o]);
            }
        }
    }
    Tensor::new(vec![n, oc, oh, ow], out)
}

/// Per-channel convolution. `weight` is `[c, 1, kh, kw]`.
pub fn depthwise_conv2d(
    input: &Tensor,
    weight: &Tensor,
    bias: Option<&[f32]>,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let [n, c, ih, iw] = input.dims4()?;
    let [wc, one, kh, kw] = weight.dims4().map_err(|e| e.in_layer("depthwise weight"))?;
    if wc != c || one != 1 {
        return Err(Error::shape(
            "depthwise_conv2d",
            format!("input has {c} channels, weight shape is {:?}", weight.shape()),
        ));
    }
    check_bias("depthwise_conv2d", bias, c)?;
    let oh = conv_output_extent(ih, kh, stride, padding).map_err(|e| e.in_layer("depthwise_conv2d"))?;
    let ow = conv_output_extent(iw, kw, stride, padding).map_err(|e| e.in_layer("depthwise_conv2d"))?;

    let in_plane = ih * iw;
    let out_plane = oh * ow;
    let ksize = kh * kw;
    let mut out = vec![0.0f32; n * c * out_plane];
    let src = input.data();
    for b in 0..n {
        for ch in 0..c {
            let dst = &mut out[(b * c + ch) * out_plane..(b * c + ch + 1) * out_plane];
            let plane = &src[(b * c + ch) * in_plane..(b * c + ch + 1) * in_plane];
            let kernel = &weight.data()[ch * ksize..(ch + 1) * ksize];
            accumulate_plane(dst, plane, kernel, (ih, iw), (kh, kw), (oh, ow), stride, padding);
            if let Some(bias) = bias {
                dst.iter_mut().for_each(|v| *v += bias[ch]);
            }
        }
    }
    Tensor::new(vec![n, c, oh, ow], out)
}

/// 1x1 convolution: a per-pixel linear map across channels.
pub fn pointwise_conv2d(input: &Tensor, weight: &Tensor, bias: Option<&[f32]>) -> Result<Tensor> {
    let [_, _, kh, kw] = weight.dims4()?;
    if (kh, kw) != (1, 1) {
        return Err(Error::shape(
            "pointwise_conv2d",
            format!("kernel must be 1x1, got {kh}x{kw}"),
        ));
    }
    conv2d(input, weight, bias, 1, 0)
}

/// Inference-mode batch normalization parameters for `C` channels.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub mean: Vec<f32>,
    pub variance: Vec<f32>,
    pub epsilon: f32,
}

impl BatchNormParams {
    /// gamma = 1, beta = 0, mean = 0, variance = 1.
    pub fn identity(channels: usize, epsilon: f32) -> Self {
        BatchNormParams {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            mean: vec![0.0; channels],
            variance: vec![1.0; channels],
            epsilon,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

/// `gamma * (x - mean) / sqrt(variance + epsilon) + beta`, per channel.
pub fn batch_norm(input: &Tensor, params: &BatchNormParams) -> Result<Tensor> {
    let [n, c, h, w] = input.dims4()?;
    let p = params;
    if [p.gamma.len(), p.beta.len(), p.mean.len(), p.variance.len()]
        .iter()
        .any(|&l| l != c)
    {
        return Err(Error::shape(
            "batch_norm",
            format!("parameters do not all have {c} entries"),
        ));
    }
    if !(p.epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "batch norm epsilon must be non-negative, got {}",
            p.epsilon
        )));
    }
    if let Some(v) = p.variance.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "batch norm variance must be non-negative, got {v}"
        )));
    }
    let plane = h * w;
    let mut out = input.data().to_vec();
    for b in 0..n {
        for ch in 0..c {
            let denom = (p.variance[ch] + p.epsilon).sqrt();
            if denom == 0.0 {
                return Err(Error::InvalidArgument(
                    "batch norm variance + epsilon is zero".into(),
                ));
            }
            let (g, m, be) = (p.gamma[ch], p.mean[ch], p.beta[ch]);
            let off = (b * c + ch) * plane;
            for v in &mut out[off..off + plane] {
                *v = g * (*v - m) / denom + be;
            }
        }
    }
    Tensor::new(input.shape().to_vec(), out)
}

fn map(input: &Tensor, f: impl Fn(f32) -> f32) -> Tensor {
    Tensor::new(input.shape().to_vec(), input.data().iter().map(|&v| f(v)).collect())
        .expect("elementwise map keeps shape")
}

pub fn relu(input: &Tensor) -> Tensor {
    map(input, |v| v.max(0.0))
}

/// `min(max(x, 0), 6)`.
pub fn relu6(input: &Tensor) -> Tensor {
    map(input, |v| v.clamp(0.0, 6.0))
}

/// Per-channel leaky slope on negative inputs. `alpha` has one entry per
/// channel (axis 1), or a single shared entry.
pub fn prelu(input: &Tensor, alpha: &[f32]) -> Result<Tensor> {
    let channels = if input.rank() >= 2 { input.shape()[1] } else { 1 };
    if alpha.len() != channels && alpha.len() != 1 {
        return Err(Error::shape(
            "prelu",
            format!("alpha has {} entries, input has {channels} channels", alpha.len()),
        ));
    }
    let inner: usize = input.shape().iter().skip(2).product();
    let mut out = input.data().to_vec();
    for (i, v) in out.iter_mut().enumerate() {
        let ch = if alpha.len() == 1 { 0 } else { (i / inner) % channels };
        if *v <= 0.0 {
            *v *= alpha[ch];
        }
    }
    Tensor::new(input.shape().to_vec(), out)
}

/// Max pooling without padding; windows hanging off the edge are dropped.
pub fn max_pool2d(input: &Tensor, kernel: usize, stride: usize) -> Result<Tensor> {
    let [n, c, ih, iw] = input.dims4()?;
    let oh = conv_output_extent(ih, kernel, stride, 0).map_err(|e| e.in_layer("max_pool2d"))?;
    let ow = conv_output_extent(iw, kernel, stride, 0).map_err(|e| e.in_layer("max_pool2d"))?;
    let src = input.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    for plane in src.chunks_exact(ih * iw) {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f32::NEG_INFINITY;
                for ky in 0..kernel {
                    let row = (oy * stride + ky) * iw;
                    for kx in 0..kernel {
                        best = best.max(plane[row + ox * stride + kx]);
                    }
                }
                out.push(best);
            }
        }
    }
    Tensor::new(vec![n, c, oh, ow], out)
}

/// Mean over the full spatial extent of each channel, giving `[n, c, 1, 1]`.
pub fn global_avg_pool(input: &Tensor) -> Result<Tensor> {
    let [n, c, h, w] = input.dims4()?;
    let count = (h * w) as f32;
    let out = input
        .data()
        .chunks_exact(h * w)
        .map(|plane| plane.iter().sum::<f32>() / count)
        .collect();
    Tensor::new(vec![n, c, 1, 1], out)
}

/// Fully connected layer applied to each batch row (axis 0) of `input`,
/// flattening all remaining axes. `weight` is `[m, n]`. A rank-1 input is a
/// single row. The result keeps the input's rank with extents `[.., m, 1..]`.
pub fn dense(input: &Tensor, weight: &Tensor, bias: Option<&[f32]>) -> Result<Tensor> {
    let (rows, features) = if input.rank() == 1 {
        (1, input.len())
    } else {
        (input.shape()[0], input.len() / input.shape()[0])
    };
    let (m, k) = match *weight.shape() {
        [m, k] => (m, k),
        _ => {
            return Err(Error::shape(
                "dense",
                format!("weight must be rank 2, got {:?}", weight.shape()),
            ))
        }
    };
    if k != features {
        return Err(Error::shape(
            "dense",
            format!("input has {features} features per row, weight expects {k}"),
        ));
    }
    check_bias("dense", bias, m)?;
    let wts = weight.data();
    let mut out = Vec::with_capacity(rows * m);
    for row in input.data().chunks_exact(features) {
        for j in 0..m {
            let mut acc = 0.0f32;
            for (w, x) in wts[j * k..(j + 1) * k].iter().zip(row) {
                acc += w * x;
            }
            if let Some(b) = bias {
                acc += b[j];
            }
            out.push(acc);
        }
    }
    let shape = match input.rank() {
        1 => vec![m],
        r => {
            let mut s = vec![rows, m];
            s.resize(r, 1);
            s
        }
    };
    Tensor::new(shape, out)
}

/// Numerically stable softmax of a slice.
pub fn softmax_slice(values: &[f32]) -> Vec<f32> {
    let max = values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f32> = values.iter().map(|&v| (v - max).exp()).collect();
    let sum: f32 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Softmax along the class axis: the whole vector for rank 1, each row for
/// rank 2, and the channel axis at every pixel for rank 3 and 4.
pub fn softmax(input: &Tensor) -> Result<Tensor> {
    match input.rank() {
        1 => Ok(Tensor::vector(softmax_slice(input.data()))),
        2 => {
            let k = input.shape()[1];
            let data = input.data().chunks_exact(k).flat_map(softmax_slice).collect();
            Tensor::new(input.shape().to_vec(), data)
        }
        _ => {
            let shape = input.shape();
            let (n, c) = (shape[0], shape[1]);
            let inner: usize = shape[2..].iter().product();
            let src = input.data();
            let mut out = vec![0.0f32; src.len()];
            let mut column = vec![0.0f32; c];
            for b in 0..n {
                let base = b * c * inner;
                for p in 0..inner {
                    for (ch, slot) in column.iter_mut().enumerate() {
                        *slot = src[base + ch * inner + p];
                    }
                    for (ch, v) in softmax_slice(&column).into_iter().enumerate() {
                        out[base + ch * inner + p] = v;
                    }
                }
            }
            Tensor::new(shape.to_vec(), out)
        }
    }
}

/// Elementwise sum of equally shaped tensors.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            "add",
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Tensor::new(
        a.shape().to_vec(),
        a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::Lcg;

    fn random(shape: &[usize], rng: &mut Lcg) -> Tensor {
        let len = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..len).map(|_| rng.next_symmetric(1.0)).collect()).unwrap()
    }

    /// Six nested loops, zero padding read explicitly.
    fn naive_conv(input: &Tensor, weight: &Tensor, bias: &[f32], stride: usize, pad: usize) -> Tensor {
        let [n, c, ih, iw] = input.dims4().unwrap();
        let [oc, _, kh, kw] = weight.dims4().unwrap();
        let oh = (ih + 2 * pad - kh) / stride + 1;
        let ow = (iw + 2 * pad - kw) / stride + 1;
        let mut out = Vec::new();
        for b in 0..n {
            for o in 0..oc {
                for y in 0..oh {
                    for x in 0..ow {
                        let mut acc = 0.0f32;
                        for i in 0..c {
                            for ky in 0..kh {
                                for kx in 0..kw {
                                    let iy = (y * stride + ky) as isize - pad as isize;
                                    let ix = (x * stride + kx) as isize - pad as isize;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < ih && (ix as usize) < iw {
                                        acc += weight.at4(o, i, ky, kx) * input.at4(b, i, iy as usize, ix as usize);
                                    }
                                }
                            }
                        }
                        out.push(acc + bias[o]);
                    }
                }
            }
        }
        Tensor::new(vec![n, oc, oh, ow], out).unwrap()
    }

    #[test]
    fn conv_identity_kernel() {
        let mut rng = Lcg::new(1);
        let x = random(&[1, 1, 5, 7], &mut rng);
        let w = Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        assert!(conv2d(&x, &w, Some(&[0.0]), 1, 0).unwrap().bit_eq(&x));
    }

    #[test]
    fn conv_all_ones_on_twos() {
        let x = Tensor::full(&[1, 1, 3, 3], 2.0).unwrap();
        let w = Tensor::full(&[1, 1, 3, 3], 1.0).unwrap();
        let y = conv2d(&x, &w, Some(&[0.0]), 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[18.0]);
    }

    #[test]
    fn conv_matches_naive_oracle() {
        let mut rng = Lcg::new(7);
        let x = random(&[1, 3, 8, 8], &mut rng);
        let w = random(&[4, 3, 3, 3], &mut rng);
        let b: Vec<f32> = (0..4).map(|_| rng.next_symmetric(1.0)).collect();
        for (stride, pad) in [(1, 0), (1, 1), (2, 0), (2, 2)] {
            let got = conv2d(&x, &w, Some(&b), stride, pad).unwrap();
            let want = naive_conv(&x, &w, &b, stride, pad);
            assert!(got.max_abs_diff(&want).unwrap() <= 1e-5);
        }
    }

    #[test]
    fn conv_rejects_channel_mismatch_and_small_input() {
        let x = Tensor::zeros(&[1, 2, 4, 4]).unwrap();
        let w = Tensor::zeros(&[1, 3, 3, 3]).unwrap();
        assert!(matches!(conv2d(&x, &w, None, 1, 0), Err(Error::Shape { .. })));
        let w = Tensor::zeros(&[1, 2, 5, 5]).unwrap();
        assert!(conv2d(&x, &w, None, 1, 0).is_err());
        assert!(conv2d(&x, &w, None, 1, 1).is_ok());
    }

    #[test]
    fn depthwise_identity_and_channel_independence() {
        let mut rng = Lcg::new(3);
        let x = random(&[1, 3, 4, 4], &mut rng);
        let w = Tensor::full(&[3, 1, 1, 1], 1.0).unwrap();
        assert!(depthwise_conv2d(&x, &w, None, 1, 0).unwrap().bit_eq(&x));

        let mut data = random(&[1, 2, 5, 5], &mut rng).into_data();
        data[25..].iter_mut().for_each(|v| *v = 0.0);
        let x = Tensor::new(vec![1, 2, 5, 5], data).unwrap();
        let w = random(&[2, 1, 3, 3], &mut rng);
        let y = depthwise_conv2d(&x, &w, Some(&[0.5, -0.25]), 1, 1).unwrap();
        assert!(y.data()[25..].iter().all(|&v| v == -0.25));
    }

    #[test]
    fn depthwise_equals_block_diagonal_dense_conv() {
        let mut rng = Lcg::new(11);
        let x = random(&[2, 3, 7, 6], &mut rng);
        let dw = random(&[3, 1, 3, 3], &mut rng);
        let mut dense = vec![0.0; 3 * 3 * 9];
        for c in 0..3 {
            dense[(c * 3 + c) * 9..(c * 3 + c + 1) * 9].copy_from_slice(&dw.data()[c * 9..(c + 1) * 9]);
        }
        let dense = Tensor::new(vec![3, 3, 3, 3], dense).unwrap();
        let b = [0.1, 0.2, 0.3];
        let got = depthwise_conv2d(&x, &dw, Some(&b), 2, 1).unwrap();
        let want = conv2d(&x, &dense, Some(&b), 2, 1).unwrap();
        assert!(got.max_abs_diff(&want).unwrap() <= 1e-5);
    }

    #[test]
    fn pointwise_hand_product() {
        let x = Tensor::new(vec![1, 2, 1, 1], vec![1.0, 2.0]).unwrap();
        let w = Tensor::new(vec![2, 2, 1, 1], vec![1.0, 1.0, 1.0, -1.0]).unwrap();
        let y = pointwise_conv2d(&x, &w, Some(&[0.0, 0.0])).unwrap();
        assert_eq!(y.data(), &[3.0, -1.0]);
        let bad = Tensor::zeros(&[2, 2, 3, 3]).unwrap();
        assert!(pointwise_conv2d(&x, &bad, None).is_err());
    }

    #[test]
    fn batch_norm_cases() {
        let mut rng = Lcg::new(5);
        let x = random(&[1, 2, 3, 3], &mut rng);
        let ident = BatchNormParams::identity(2, 0.0);
        assert!(batch_norm(&x, &ident).unwrap().bit_eq(&x));

        let c = Tensor::full(&[1, 2, 2, 2], 3.5).unwrap();
        let p = BatchNormParams {
            gamma: vec![2.0, -1.0],
            beta: vec![0.25, 0.75],
            mean: vec![3.5, 3.5],
            variance: vec![4.0, 0.5],
            epsilon: 1e-3,
        };
        let y = batch_norm(&c, &p).unwrap();
        assert!(y.data()[..4].iter().all(|&v| v == 0.25));
        assert!(y.data()[4..].iter().all(|&v| v == 0.75));

        let bad = BatchNormParams { variance: vec![1.0, -0.1], ..p };
        assert!(matches!(batch_norm(&c, &bad), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn activations() {
        let x = Tensor::vector(vec![-2.0, 3.0, 7.0]);
        assert_eq!(relu6(&x).data(), &[0.0, 3.0, 6.0]);
        let zeros = Tensor::zeros(&[1, 2, 2, 2]).unwrap();
        assert!(relu6(&zeros).bit_eq(&zeros));

        let x = Tensor::new(vec![1, 2, 1, 2], vec![-4.0, 2.0, -1.0, 1.0]).unwrap();
        assert_eq!(prelu(&x, &[0.0, 0.0]).unwrap().data(), relu(&x).data());
        assert!(prelu(&x, &[1.0, 1.0]).unwrap().bit_eq(&x));
        assert_eq!(prelu(&x, &[0.25, 0.5]).unwrap().data(), &[-1.0, 2.0, -0.5, 1.0]);
    }

    #[test]
    fn pooling() {
        let x = Tensor::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(max_pool2d(&x, 2, 2).unwrap().data(), &[4.0]);
        let c = Tensor::full(&[2, 3, 4, 5], -1.5).unwrap();
        let g = global_avg_pool(&c).unwrap();
        assert_eq!(g.shape(), &[2, 3, 1, 1]);
        assert!(g.data().iter().all(|&v| v == -1.5));
    }

    #[test]
    fn dense_cases() {
        let x = Tensor::vector(vec![3.0, 1.0]);
        let w = Tensor::new(vec![2, 2], vec![1.0, 1.0, 1.0, -1.0]).unwrap();
        assert_eq!(dense(&x, &w, Some(&[0.0, 0.0])).unwrap().data(), &[4.0, 2.0]);
        let eye = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(dense(&x, &eye, None).unwrap().bit_eq(&x));
        let batched = Tensor::new(vec![2, 2, 1, 1], vec![3.0, 1.0, 0.0, 1.0]).unwrap();
        let y = dense(&batched, &w, None).unwrap();
        assert_eq!(y.shape(), &[2, 2, 1, 1]);
        assert_eq!(y.data(), &[4.0, 2.0, 1.0, -1.0]);
        assert!(dense(&Tensor::vector(vec![1.0; 3]), &w, None).is_err());
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax_slice(&[0.0, 0.0]), vec![0.5, 0.5]);
        for c in [-1e4f32, -3.0, 0.0, 12.5, 1e4] {
            for v in softmax_slice(&[c, c, c]) {
                assert!((v - 1.0 / 3.0).abs() < 1e-7);
            }
        }
        let p = softmax_slice(&[2f32.ln(), 0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-6 && (p[1] - 1.0 / 3.0).abs() < 1e-6);
        // overflow guard
        let p = softmax_slice(&[1000.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn softmax_over_channels_per_pixel() {
        let x = Tensor::new(vec![1, 2, 1, 2], vec![0.0, 2f32.ln(), 0.0, 0.0]).unwrap();
        let y = softmax(&x).unwrap();
        assert_eq!(y.at4(0, 0, 0, 0), 0.5);
        assert!((y.at4(0, 0, 0, 1) - 2.0 / 3.0).abs() < 1e-6);
        assert!((y.at4(0, 1, 0, 1) - 1.0 / 3.0).abs() < 1e-6);
    }
}
