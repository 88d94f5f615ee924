// SPDX-License-Identifier: Apache-2.0

//! Shared builders and independent oracles for the integration tests.
//!
//! The oracles here are written from the operation definitions with plain
//! nested loops over unpacked data, sharing no code with the library.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use snnaccel::dataflow::{execute, ExecInputs, ExecOutput, ExecReport, MappingPolicy, Schedule};
use snnaccel::golden::network::{Geometry, LayerKind, LayerSpec};
use snnaccel::golden::tflif::TflifParams;
use snnaccel::memory::{configure_banks, BankSizes, MemoryMap};
use snnaccel::pe::{PeModule, PeModuleConfig};
use snnaccel::tensor::{pack_spikes, ByteImage, SpikeTensor, WeightMatrix};

pub const T: usize = 4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_spikes(rng: &mut ChaCha8Rng, shape: &[usize], density: f64) -> SpikeTensor {
    let n: usize = shape.iter().product();
    let bits: Vec<u8> = (0..n).map(|_| rng.random_bool(density) as u8).collect();
    pack_spikes(&bits, shape).unwrap()
}

pub fn random_weights(rng: &mut ChaCha8Rng, shape: &[usize]) -> WeightMatrix {
    let n: usize = shape.iter().product();
    WeightMatrix::new(shape, (0..n).map(|_| rng.random::<i8>()).collect()).unwrap()
}

pub fn random_image(rng: &mut ChaCha8Rng, shape: &[usize]) -> ByteImage {
    let n: usize = shape.iter().product();
    ByteImage::new(shape, (0..n).map(|_| rng.random::<u8>()).collect()).unwrap()
}

pub fn tflif() -> TflifParams {
    TflifParams::uniform(-8, 8, T)
}

pub fn conv_layer(
    kind: LayerKind,
    c_in: usize,
    c_out: usize,
    h: usize,
    w: usize,
    kernel: usize,
    stride: usize,
) -> LayerSpec {
    LayerSpec {
        name: "conv".into(),
        kind,
        geometry: Geometry::Conv {
            c_in,
            c_out,
            h,
            w,
            kernel,
            stride,
        },
        inputs: vec!["x".into()],
        requant_shift: 4,
        tflif: Some(tflif()),
        residual_op: None,
    }
}

pub fn linear_layer(tokens: usize, d_in: usize, d_out: usize) -> LayerSpec {
    LayerSpec {
        name: "linear".into(),
        kind: LayerKind::SpikeLinear,
        geometry: Geometry::Linear {
            tokens,
            d_in,
            d_out,
        },
        inputs: vec!["x".into()],
        requant_shift: 4,
        tflif: Some(tflif()),
        residual_op: None,
    }
}

pub fn attention_layer(tokens: usize, heads: usize, head_dim: usize) -> LayerSpec {
    LayerSpec {
        name: "attn".into(),
        kind: LayerKind::SpikeAttention,
        geometry: Geometry::Attention {
            tokens,
            heads,
            head_dim,
        },
        inputs: vec!["q".into(), "k".into(), "v".into()],
        requant_shift: 1,
        tflif: Some(tflif()),
        residual_op: None,
    }
}

pub fn fresh() -> (PeModule, MemoryMap) {
    (
        PeModule::new(PeModuleConfig::default()).unwrap(),
        configure_banks(&BankSizes::default()).unwrap(),
    )
}

pub fn run_schedule(s: &Schedule, inputs: ExecInputs<'_>) -> (ExecOutput, ExecReport, MemoryMap) {
    let (mut pe, mut mem) = fresh();
    let (out, rep) = execute(s, &mut pe, &mut mem, inputs).unwrap();
    (out, rep, mem)
}

pub fn default_policy() -> MappingPolicy {
    MappingPolicy::default()
}

// ---------------------------------------------------------------------------
// Naive oracles over unpacked bits. Layouts: conv [T, C, H, W], linear
// [T, N, D], attention [T, heads, N, d_h]; all row-major.

pub fn naive_spiking_conv(
    bits: &[u8],
    s: [usize; 4],
    w: &[i8],
    c_out: usize,
    k: usize,
    stride: usize,
) -> Vec<i32> {
    let [t_n, c_in, h, wd] = s;
    let (ho, wo) = ((h - k) / stride + 1, (wd - k) / stride + 1);
    let mut out = vec![0i32; t_n * c_out * ho * wo];
    for t in 0..t_n {
        for co in 0..c_out {
            for y in 0..ho {
                for x in 0..wo {
                    let mut acc = 0i32;
                    for ci in 0..c_in {
                        for ky in 0..k {
                            for kx in 0..k {
                                let b = bits[((t * c_in + ci) * h + y * stride + ky) * wd
                                    + x * stride
                                    + kx];
                                acc += b as i32 * w[((co * c_in + ci) * k + ky) * k + kx] as i32;
                            }
                        }
                    }
                    out[((t * c_out + co) * ho + y) * wo + x] = acc;
                }
            }
        }
    }
    out
}

pub fn naive_u8_conv(
    img: &[u8],
    s: [usize; 3],
    w: &[i8],
    c_out: usize,
    k: usize,
    stride: usize,
    t_n: usize,
) -> Vec<i32> {
    let [c_in, h, wd] = s;
    let (ho, wo) = ((h - k) / stride + 1, (wd - k) / stride + 1);
    let mut plane = vec![0i32; c_out * ho * wo];
    for co in 0..c_out {
        for y in 0..ho {
            for x in 0..wo {
                let mut acc = 0i32;
                for ci in 0..c_in {
                    for ky in 0..k {
                        for kx in 0..k {
                            acc += img[(ci * h + y * stride + ky) * wd + x * stride + kx] as i32
                                * w[((co * c_in + ci) * k + ky) * k + kx] as i32;
                        }
                    }
                }
                plane[(co * ho + y) * wo + x] = acc;
            }
        }
    }
    (0..t_n).flat_map(|_| plane.iter().copied()).collect()
}

pub fn naive_linear(bits: &[u8], s: [usize; 3], w: &[i8], d_out: usize) -> Vec<i32> {
    let [t_n, n, d_in] = s;
    let mut out = vec![0i32; t_n * n * d_out];
    for t in 0..t_n {
        for tok in 0..n {
            for o in 0..d_out {
                out[(t * n + tok) * d_out + o] = (0..d_in)
                    .map(|i| bits[(t * n + tok) * d_in + i] as i32 * w[o * d_in + i] as i32)
                    .sum();
            }
        }
    }
    out
}

/// `(q k^T) v` per timestep and head, as three explicit matrix products.
pub fn naive_attention(q: &[u8], k: &[u8], v: &[u8], s: [usize; 4]) -> Vec<i32> {
    let [t_n, heads, n, dh] = s;
    let at = |x: &[u8], t: usize, h: usize, i: usize, d: usize| {
        x[((t * heads + h) * n + i) * dh + d] as i32
    };
    let mut out = vec![0i32; t_n * heads * n * dh];
    for t in 0..t_n {
        for h in 0..heads {
            let mut kt = vec![vec![0i32; n]; dh];
            for j in 0..n {
                for d in 0..dh {
                    kt[d][j] = at(k, t, h, j, d);
                }
            }
            let mut scores = vec![vec![0i32; n]; n];
            for i in 0..n {
                for j in 0..n {
                    scores[i][j] = (0..dh).map(|d| at(q, t, h, i, d) * kt[d][j]).sum();
                }
            }
            for i in 0..n {
                for c in 0..dh {
                    out[((t * heads + h) * n + i) * dh + c] =
                        (0..n).map(|j| scores[i][j] * at(v, t, h, j, c)).sum();
                }
            }
        }
    }
    out
}

/// Scalar TFLIF written straight from the recurrence, with floor division.
pub fn naive_tflif(
    acc: &[i8],
    mantissa: i64,
    bias: i64,
    theta: i64,
    decay: (i64, i64),
    hard: bool,
    carry: bool,
) -> (Vec<bool>, i64) {
    let mut u = 0i64;
    let mut spikes = Vec::new();
    for &x in acc {
        let prev = if carry {
            let p = u * decay.0;
            let q = decay.1;
            // floor toward negative infinity
            if (p % q != 0) && ((p < 0) != (q < 0)) {
                p / q - 1
            } else {
                p / q
            }
        } else {
            0
        };
        u = prev + mantissa * x as i64 + bias;
        let fire = u >= 0;
        if fire {
            u = if hard { 0 } else { u - theta };
        }
        spikes.push(fire);
    }
    (spikes, u)
}
