// SPDX-License-Identifier: Apache-2.0

//! Dense, schedule-free reference semantics for every layer kind.

use serde::{Deserialize, Serialize};

use super::tflif::{tflif_forward, TflifParams};
use crate::error::{Error, Result};
use crate::pe::requantize_to_8bit;
use crate::tensor::{AccumTensor, ByteImage, SpikeTensor, Tensor, WeightMatrix};

fn conv_out_dim(input: usize, kernel: usize, stride: usize) -> Result<usize> {
    if kernel == 0 || stride == 0 || input < kernel || !(input - kernel).is_multiple_of(stride) {
        return Err(Error::Shape(format!(
            "input extent {input} does not tile with kernel {kernel}, stride {stride}"
        )));
    }
    Ok((input - kernel) / stride + 1)
}

fn check_conv_weights(w: &WeightMatrix, c_in: usize) -> Result<(usize, usize)> {
    let ws = w.shape();
    if ws.len() != 4 || ws[1] != c_in || ws[2] != ws[3] {
        return Err(Error::Shape(format!(
            "conv weights {ws:?} do not match {c_in} input channels"
        )));
    }
    Ok((ws[0], ws[2]))
}

/// Cross-correlation of spikes with signed 8-bit weights, per timestep, no bias.
pub fn ref_spiking_conv2d(
    sp: &SpikeTensor,
    w: &WeightMatrix,
    stride: usize,
) -> Result<AccumTensor> {
    let s = sp.shape();
    if s.len() != 4 {
        return Err(Error::Shape(format!(
            "conv input {s:?} is not [T, C, H, W]"
        )));
    }
    let (t_n, c_in, h, wd) = (s[0], s[1], s[2], s[3]);
    let (c_out, k) = check_conv_weights(w, c_in)?;
    let (ho, wo) = (conv_out_dim(h, k, stride)?, conv_out_dim(wd, k, stride)?);
    let mut out = AccumTensor::zeros(&[t_n, c_out, ho, wo]);
    let data = out.data_mut();
    let mut idx = 0;
    for t in 0..t_n {
        for co in 0..c_out {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = 0i32;
                    for ci in 0..c_in {
                        for ky in 0..k {
                            for kx in 0..k {
                                if sp.get(&[t, ci, oy * stride + ky, ox * stride + kx]) {
                                    acc += w.get(&[co, ci, ky, kx]) as i32;
                                }
                            }
                        }
                    }
                    data[idx] = acc;
                    idx += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Dense `u8 x i8` convolution of the input image, replicated over `timesteps`.
pub fn ref_conv2d_u8(
    img: &ByteImage,
    w: &WeightMatrix,
    stride: usize,
    timesteps: usize,
) -> Result<AccumTensor> {
    let s = img.shape();
    if s.len() != 3 {
        return Err(Error::Shape(format!("image {s:?} is not [C, H, W]")));
    }
    let (c_in, h, wd) = (s[0], s[1], s[2]);
    let (c_out, k) = check_conv_weights(w, c_in)?;
    let (ho, wo) = (conv_out_dim(h, k, stride)?, conv_out_dim(wd, k, stride)?);
    let plane = ho * wo * c_out;
    let mut single = vec![0i32; plane];
    let mut idx = 0;
    for co in 0..c_out {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = 0i32;
                for ci in 0..c_in {
                    for ky in 0..k {
                        for kx in 0..k {
                            acc += img.get(&[ci, oy * stride + ky, ox * stride + kx]) as i32
                                * w.get(&[co, ci, ky, kx]) as i32;
                        }
                    }
                }
                single[idx] = acc;
                idx += 1;
            }
        }
    }
    Ok(AccumTensor::from_fn(&[timesteps, c_out, ho, wo], |i| {
        single[i % plane]
    }))
}

/// `acc[t, n, o] = sum_i w[o, i] * sp[t, n, i]`.
pub fn ref_spiking_linear(sp: &SpikeTensor, w: &WeightMatrix) -> Result<AccumTensor> {
    let s = sp.shape();
    let ws = w.shape();
    if s.len() != 3 || ws.len() != 2 || ws[1] != s[2] {
        return Err(Error::Shape(format!(
            "linear input {s:?} does not match weights {ws:?}"
        )));
    }
    let (t_n, n, d_in, d_out) = (s[0], s[1], s[2], ws[0]);
    let mut out = AccumTensor::zeros(&[t_n, n, d_out]);
    let data = out.data_mut();
    for t in 0..t_n {
        for tok in 0..n {
            let row = (t * n + tok) * d_in;
            for o in 0..d_out {
                let mut acc = 0i32;
                for i in 0..d_in {
                    if sp.bit(row + i) {
                        acc += w.data()[o * d_in + i] as i32;
                    }
                }
                data[(t * n + tok) * d_out + o] = acc;
            }
        }
    }
    Ok(out)
}

/// Requantizes `acc` (leading axis T) and runs TFLIF on every neuron.
///
/// `channel_axis` selects which axis indexes the per-channel parameters.
pub fn apply_tflif(
    acc: &AccumTensor,
    requant_shift: u32,
    p: &TflifParams,
    channel_axis: usize,
) -> Result<SpikeTensor> {
    let shape = acc.shape();
    if shape.is_empty() || shape[0] != p.timesteps {
        return Err(Error::Shape(format!(
            "accumulators {shape:?} do not lead with {} timesteps",
            p.timesteps
        )));
    }
    if channel_axis == 0 || channel_axis >= shape.len() {
        return Err(Error::Argument(format!(
            "channel axis {channel_axis} invalid for {shape:?}"
        )));
    }
    if requant_shift > 31 {
        return Err(Error::Argument(format!(
            "requantization shift {requant_shift} > 31"
        )));
    }
    p.check_channels(shape[channel_axis])?;
    let t_n = shape[0];
    let slice = acc.len() / t_n;
    let inner: usize = shape[channel_axis + 1..].iter().product();
    let n_ch = shape[channel_axis];
    let mut bits = vec![0u8; acc.len()];
    let mut seq = vec![0i8; t_n];
    for e in 0..slice {
        for (t, v) in seq.iter_mut().enumerate() {
            *v = requantize_to_8bit(acc.data()[t * slice + e], requant_shift);
        }
        let out = tflif_forward(&seq, p, (e / inner) % n_ch);
        for t in 0..t_n {
            bits[t * slice + e] = out.spike(t) as u8;
        }
    }
    crate::tensor::pack_spikes(&bits, shape)
}

/// Spiking self-attention pre-activations: `raw = (q k^T) v` per timestep and head.
///
/// Inputs are `[T, heads, N, d_h]`; the result has the same shape.
pub fn ref_ssa_raw(q: &SpikeTensor, k: &SpikeTensor, v: &SpikeTensor) -> Result<AccumTensor> {
    let s = q.shape();
    if s.len() != 4 || k.shape() != s || v.shape() != s {
        return Err(Error::Shape(format!(
            "attention operands {:?}, {:?}, {:?} must share a [T, heads, N, d_h] shape",
            q.shape(),
            k.shape(),
            v.shape()
        )));
    }
    let (t_n, heads, n, dh) = (s[0], s[1], s[2], s[3]);
    if dh > i16::MAX as usize {
        return Err(Error::Width {
            value: dh as i64,
            bits: 16,
            context: "attention score".into(),
        });
    }
    if (n as u64) * (dh as u64) > i32::MAX as u64 {
        return Err(Error::Width {
            value: (n * dh) as i64,
            bits: 32,
            context: "attention output".into(),
        });
    }
    let mut out = AccumTensor::zeros(s);
    let data = out.data_mut();
    let mut scores = vec![0i32; n * n];
    for t in 0..t_n {
        for h in 0..heads {
            for i in 0..n {
                for j in 0..n {
                    scores[i * n + j] = (0..dh)
                        .filter(|&d| q.get(&[t, h, i, d]) && k.get(&[t, h, j, d]))
                        .count() as i32;
                }
            }
            for i in 0..n {
                for c in 0..dh {
                    let raw: i32 = (0..n)
                        .filter(|&j| v.get(&[t, h, j, c]))
                        .map(|j| scores[i * n + j])
                        .sum();
                    data[((t * heads + h) * n + i) * dh + c] = raw;
                }
            }
        }
    }
    Ok(out)
}

/// Spiking self-attention: `tflif(requantize((q k^T) v, scale_shift))`.
///
/// TFLIF channel index is `head * d_h + c`.
pub fn ref_ssa(
    q: &SpikeTensor,
    k: &SpikeTensor,
    v: &SpikeTensor,
    scale_shift: u32,
    p: &TflifParams,
) -> Result<SpikeTensor> {
    let raw = ref_ssa_raw(q, k, v)?;
    ssa_activation(&raw, scale_shift, p)
}

/// TFLIF over `[T, heads, N, d_h]` attention pre-activations.
pub fn ssa_activation(raw: &AccumTensor, scale_shift: u32, p: &TflifParams) -> Result<SpikeTensor> {
    let s = raw.shape().to_vec();
    if s.len() != 4 || s[0] != p.timesteps {
        return Err(Error::Shape(format!(
            "attention pre-activations {s:?} are not [T, heads, N, d_h]"
        )));
    }
    let (heads, n, dh) = (s[1], s[2], s[3]);
    p.check_channels(heads * dh)?;
    let t_n = s[0];
    let slice = raw.len() / t_n;
    let mut bits = vec![0u8; raw.len()];
    let mut seq = vec![0i8; t_n];
    for e in 0..slice {
        let h = e / (n * dh);
        let c = e % dh;
        for (t, v) in seq.iter_mut().enumerate() {
            *v = requantize_to_8bit(raw.data()[t * slice + e], scale_shift);
        }
        let out = tflif_forward(&seq, p, h * dh + c);
        for t in 0..t_n {
            bits[t * slice + e] = out.spike(t) as u8;
        }
    }
    crate::tensor::pack_spikes(&bits, &s)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualOp {
    /// `(NOT a) AND b`, with `a` the block output and `b` the shortcut.
    #[default]
    Iand,
    Or,
}

pub fn iand_residual(a: &SpikeTensor, b: &SpikeTensor, op: ResidualOp) -> Result<SpikeTensor> {
    match op {
        ResidualOp::Iand => a.zip_with(b, |x, y| !x & y),
        ResidualOp::Or => a.zip_with(b, |x, y| x | y),
    }
}

/// `[T, N, heads * d_h]` to `[T, heads, N, d_h]`.
pub fn split_heads(x: &SpikeTensor, heads: usize) -> Result<SpikeTensor> {
    let s = x.shape();
    if s.len() != 3 || heads == 0 || !s[2].is_multiple_of(heads) {
        return Err(Error::Shape(format!(
            "cannot split {s:?} into {heads} heads"
        )));
    }
    let (t_n, n, d) = (s[0], s[1], s[2]);
    let dh = d / heads;
    SpikeTensor::from_fn(&[t_n, heads, n, dh], |i| {
        let c = i % dh;
        let tok = (i / dh) % n;
        let h = (i / (dh * n)) % heads;
        let t = i / (dh * n * heads);
        x.bit((t * n + tok) * d + h * dh + c)
    })
}

/// `[T, heads, N, d_h]` to `[T, N, heads * d_h]`.
pub fn merge_heads(x: &SpikeTensor) -> Result<SpikeTensor> {
    let s = x.shape();
    if s.len() != 4 {
        return Err(Error::Shape(format!("{s:?} is not [T, heads, N, d_h]")));
    }
    let (t_n, heads, n, dh) = (s[0], s[1], s[2], s[3]);
    let d = heads * dh;
    SpikeTensor::from_fn(&[t_n, n, d], |i| {
        let col = i % d;
        let tok = (i / d) % n;
        let t = i / (d * n);
        x.get(&[t, col / dh, tok, col % dh])
    })
}

/// Conv feature map `[T, C, H, W]` to token sequence `[T, H*W, C]`.
pub fn to_tokens(x: &SpikeTensor) -> Result<SpikeTensor> {
    let s = x.shape();
    if s.len() != 4 {
        return Err(Error::Shape(format!("{s:?} is not [T, C, H, W]")));
    }
    let (t_n, c, h, w) = (s[0], s[1], s[2], s[3]);
    let n = h * w;
    SpikeTensor::from_fn(&[t_n, n, c], |i| {
        let ch = i % c;
        let tok = (i / c) % n;
        let t = i / (c * n);
        x.get(&[t, ch, tok / w, tok % w])
    })
}

/// Sum over the token axis of `[T, N, D]` accumulators.
pub fn sum_tokens(acc: &AccumTensor) -> Result<AccumTensor> {
    let s = acc.shape();
    if s.len() != 3 {
        return Err(Error::Shape(format!("{s:?} is not [T, N, D]")));
    }
    let (t_n, n, d) = (s[0], s[1], s[2]);
    Ok(Tensor::from_fn(&[t_n, d], |i| {
        let (t, o) = (i / d, i % d);
        (0..n).map(|tok| acc.data()[(t * n + tok) * d + o]).sum()
    }))
}
