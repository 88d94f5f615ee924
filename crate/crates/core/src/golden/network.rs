// SPDX-License-Identifier: Apache-2.0

//! Network description, synthetic weights, and the end-to-end reference run.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ops::{
    apply_tflif, iand_residual, merge_heads, ref_conv2d_u8, ref_spiking_conv2d, ref_spiking_linear,
    ref_ssa_raw, split_heads, ssa_activation, sum_tokens, to_tokens, ResidualOp,
};
use super::tflif::{fold_bn_into_lif, BatchNorm, ChannelParams, ResetMode, TflifParams};
use crate::error::{Error, Result};
use crate::memory::BankSizes;
use crate::tensor::{AccumTensor, ByteImage, SpikeTensor, WeightMatrix};

/// Name under which the stem output is exposed as a `[T, N, D]` token sequence.
pub const TOKENS: &str = "tokens";
/// Name of the network input.
pub const IMAGE: &str = "image";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum LayerKind {
    Conv8bitInput,
    SpikeConv,
    SpikeLinear,
    SpikeAttention,
    Residual,
    Head,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Geometry {
    Conv {
        c_in: usize,
        c_out: usize,
        h: usize,
        w: usize,
        kernel: usize,
        stride: usize,
    },
    Linear {
        tokens: usize,
        d_in: usize,
        d_out: usize,
    },
    Attention {
        tokens: usize,
        heads: usize,
        head_dim: usize,
    },
    Elementwise {
        tokens: usize,
        dim: usize,
    },
}

impl Geometry {
    pub fn conv_out(&self) -> Option<(usize, usize)> {
        match *self {
            Geometry::Conv {
                h,
                w,
                kernel,
                stride,
                ..
            } => Some(((h - kernel) / stride + 1, (w - kernel) / stride + 1)),
            _ => None,
        }
    }

    /// Output shape (excluding the timestep axis).
    pub fn output_shape(&self) -> Vec<usize> {
        match *self {
            Geometry::Conv { c_out, .. } => {
                let (ho, wo) = self.conv_out().unwrap();
                vec![c_out, ho, wo]
            }
            Geometry::Linear { tokens, d_out, .. } => vec![tokens, d_out],
            Geometry::Attention {
                tokens,
                heads,
                head_dim,
            } => vec![tokens, heads * head_dim],
            Geometry::Elementwise { tokens, dim } => vec![tokens, dim],
        }
    }

    pub fn weight_shape(&self) -> Option<Vec<usize>> {
        match *self {
            Geometry::Conv {
                c_in,
                c_out,
                kernel,
                ..
            } => Some(vec![c_out, c_in, kernel, kernel]),
            Geometry::Linear { d_in, d_out, .. } => Some(vec![d_out, d_in]),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub geometry: Geometry,
    /// Producers, by layer name (or [`IMAGE`] / [`TOKENS`]).
    pub inputs: Vec<String>,
    /// Requantization shift before TFLIF; for attention this is the scale shift.
    pub requant_shift: u32,
    pub tflif: Option<TflifParams>,
    pub residual_op: Option<ResidualOp>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    pub name: String,
    pub timesteps: usize,
    /// `[C, H, W]` of the input image.
    pub input_shape: [usize; 3],
    pub embed_dim: usize,
    pub num_blocks: usize,
    pub num_heads: usize,
    pub mlp_hidden: usize,
    pub classes: usize,
    pub attn_scale_shift: u32,
    pub tokens: usize,
    pub layers: Vec<LayerSpec>,
    pub memory: Option<BankSizes>,
}

// ---------------------------------------------------------------------------
// JSON network files

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub name: String,
    pub timesteps: usize,
    pub input: InputConfig,
    pub stem: Vec<StemConv>,
    pub embed_dim: usize,
    pub num_blocks: usize,
    pub num_heads: usize,
    pub mlp_hidden: usize,
    pub classes: usize,
    pub attn_scale_shift: u32,
    pub requant: RequantConfig,
    #[serde(default)]
    pub residual_op: ResidualOp,
    pub tflif: TflifConfig,
    pub attention_tflif: TflifConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<BankSizes>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StemConv {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub requant_shift: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequantConfig {
    pub qkv: u32,
    pub proj: u32,
    pub mlp1: u32,
    pub mlp2: u32,
    pub head: u32,
}

fn half() -> (u32, u32) {
    (1, 2)
}

fn yes() -> bool {
    true
}

fn default_mantissa_bits() -> u32 {
    16
}

/// TFLIF parameters as written in a network file; scalars broadcast to every channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TflifConfig {
    Folded {
        mantissa: i32,
        shift: u32,
        bias: i32,
        theta: i32,
        #[serde(default = "half")]
        decay: (u32, u32),
        #[serde(default)]
        reset: ResetMode,
        #[serde(default = "yes")]
        carry_membrane: bool,
    },
    BatchNorm {
        gamma: f64,
        beta: f64,
        mean: f64,
        var: f64,
        eps: f64,
        theta: f64,
        #[serde(default = "default_mantissa_bits")]
        mantissa_bits: u32,
        #[serde(default = "half")]
        decay: (u32, u32),
        #[serde(default)]
        reset: ResetMode,
        #[serde(default = "yes")]
        carry_membrane: bool,
    },
}

impl TflifConfig {
    pub fn build(&self, timesteps: usize) -> Result<TflifParams> {
        match *self {
            TflifConfig::Folded {
                mantissa,
                shift,
                bias,
                theta,
                decay,
                reset,
                carry_membrane,
            } => TflifParams::new(
                vec![ChannelParams {
                    mantissa,
                    shift,
                    bias,
                    theta,
                }],
                decay,
                reset,
                carry_membrane,
                timesteps,
            ),
            TflifConfig::BatchNorm {
                gamma,
                beta,
                mean,
                var,
                eps,
                theta,
                mantissa_bits,
                decay,
                reset,
                carry_membrane,
            } => {
                let bn = BatchNorm {
                    gamma: vec![gamma],
                    beta: vec![beta],
                    mean: vec![mean],
                    var: vec![var],
                    eps,
                };
                let mut p = fold_bn_into_lif(&bn, theta, mantissa_bits, decay, reset, timesteps)?;
                p.carry_membrane = carry_membrane;
                Ok(p)
            }
        }
    }
}

fn spec_err(path: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        message: message.into(),
    }
}

impl NetworkSpec {
    /// Expands a network file into the ordered layer list and validates it.
    pub fn from_config(cfg: &NetworkConfig) -> Result<Self> {
        let t = cfg.timesteps;
        if t == 0 || t > 32 {
            return Err(spec_err("timesteps", format!("{t} outside 1..=32")));
        }
        if cfg.stem.is_empty() {
            return Err(spec_err("stem", "at least one convolution is required"));
        }
        if cfg.num_heads == 0 || !cfg.embed_dim.is_multiple_of(cfg.num_heads) {
            return Err(spec_err(
                "num_heads",
                format!(
                    "{} heads do not divide embed_dim {}",
                    cfg.num_heads, cfg.embed_dim
                ),
            ));
        }
        let tflif = cfg
            .tflif
            .build(t)
            .map_err(|e| spec_err("tflif", e.to_string()))?;
        let attn_tflif = cfg
            .attention_tflif
            .build(t)
            .map_err(|e| spec_err("attention_tflif", e.to_string()))?;

        let mut layers = Vec::new();
        let (mut c, mut h, mut w) = (cfg.input.channels, cfg.input.height, cfg.input.width);
        let mut prev = IMAGE.to_string();
        for (i, sc) in cfg.stem.iter().enumerate() {
            let path = format!("stem[{i}]");
            if sc.kernel == 0 || sc.stride == 0 || h < sc.kernel || w < sc.kernel {
                return Err(spec_err(
                    &path,
                    format!("kernel {} does not fit {h}x{w}", sc.kernel),
                ));
            }
            if (h - sc.kernel) % sc.stride != 0 || (w - sc.kernel) % sc.stride != 0 {
                return Err(spec_err(
                    &path,
                    format!(
                        "{h}x{w} does not tile with kernel {} stride {}",
                        sc.kernel, sc.stride
                    ),
                ));
            }
            let geometry = Geometry::Conv {
                c_in: c,
                c_out: sc.out_channels,
                h,
                w,
                kernel: sc.kernel,
                stride: sc.stride,
            };
            let (ho, wo) = geometry.conv_out().unwrap();
            let name = format!("stem{i}");
            layers.push(LayerSpec {
                name: name.clone(),
                kind: if i == 0 {
                    LayerKind::Conv8bitInput
                } else {
                    LayerKind::SpikeConv
                },
                geometry,
                inputs: vec![prev],
                requant_shift: sc.requant_shift,
                tflif: Some(tflif.clone()),
                residual_op: None,
            });
            prev = name;
            (c, h, w) = (sc.out_channels, ho, wo);
        }
        if c != cfg.embed_dim {
            return Err(spec_err(
                "embed_dim",
                format!("stem produces {c} channels, embed_dim is {}", cfg.embed_dim),
            ));
        }
        let n = h * w;
        let d = cfg.embed_dim;
        let heads = cfg.num_heads;
        let linear = |name: String, input: &str, d_in: usize, d_out: usize, shift: u32| LayerSpec {
            name,
            kind: LayerKind::SpikeLinear,
            geometry: Geometry::Linear {
                tokens: n,
                d_in,
                d_out,
            },
            inputs: vec![input.to_string()],
            requant_shift: shift,
            tflif: Some(tflif.clone()),
            residual_op: None,
        };
        let residual = |name: String, a: &str, b: &str| LayerSpec {
            name,
            kind: LayerKind::Residual,
            geometry: Geometry::Elementwise { tokens: n, dim: d },
            inputs: vec![a.to_string(), b.to_string()],
            requant_shift: 0,
            tflif: None,
            residual_op: Some(cfg.residual_op),
        };
        let mut x = TOKENS.to_string();
        for b in 0..cfg.num_blocks {
            let p = |s: &str| format!("block{b}.{s}");
            let rq = &cfg.requant;
            layers.push(linear(p("q"), &x, d, d, rq.qkv));
            layers.push(linear(p("k"), &x, d, d, rq.qkv));
            layers.push(linear(p("v"), &x, d, d, rq.qkv));
            layers.push(LayerSpec {
                name: p("attn"),
                kind: LayerKind::SpikeAttention,
                geometry: Geometry::Attention {
                    tokens: n,
                    heads,
                    head_dim: d / heads,
                },
                inputs: vec![p("q"), p("k"), p("v")],
                requant_shift: cfg.attn_scale_shift,
                tflif: Some(attn_tflif.clone()),
                residual_op: None,
            });
            layers.push(linear(p("proj"), &p("attn"), d, d, rq.proj));
            layers.push(residual(p("res1"), &p("proj"), &x));
            layers.push(linear(p("mlp1"), &p("res1"), d, cfg.mlp_hidden, rq.mlp1));
            layers.push(linear(p("mlp2"), &p("mlp1"), cfg.mlp_hidden, d, rq.mlp2));
            layers.push(residual(p("res2"), &p("mlp2"), &p("res1")));
            x = p("res2");
        }
        layers.push(LayerSpec {
            name: "head".into(),
            kind: LayerKind::Head,
            geometry: Geometry::Linear {
                tokens: n,
                d_in: d,
                d_out: cfg.classes,
            },
            inputs: vec![x],
            requant_shift: cfg.requant.head,
            tflif: None,
            residual_op: None,
        });
        let spec = NetworkSpec {
            name: cfg.name.clone(),
            timesteps: t,
            input_shape: [cfg.input.channels, cfg.input.height, cfg.input.width],
            embed_dim: d,
            num_blocks: cfg.num_blocks,
            num_heads: heads,
            mlp_hidden: cfg.mlp_hidden,
            classes: cfg.classes,
            attn_scale_shift: cfg.attn_scale_shift,
            tokens: n,
            layers,
            memory: cfg.memory,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks layer ordering and that every layer's producers have matching shapes.
    pub fn validate(&self) -> Result<()> {
        let mut shapes: HashMap<&str, Vec<usize>> = HashMap::new();
        shapes.insert(IMAGE, self.input_shape.to_vec());
        let mut stem_done = false;
        for (i, l) in self.layers.iter().enumerate() {
            let fail = |msg: String| Error::Shape(msg).in_layer(i, &l.name);
            if (i == 0) != (l.kind == LayerKind::Conv8bitInput) {
                return Err(fail("only the first layer takes the 8-bit image".into()));
            }
            let conv = matches!(l.kind, LayerKind::Conv8bitInput | LayerKind::SpikeConv);
            if conv && stem_done {
                return Err(fail("convolutions must precede the encoder".into()));
            }
            if !conv && !stem_done {
                stem_done = true;
                if l.kind != LayerKind::SpikeLinear {
                    return Err(fail("the first encoder layer must be linear".into()));
                }
                let out = self.layers[i - 1].geometry.output_shape();
                shapes.insert(TOKENS, vec![out[1] * out[2], out[0]]);
            }
            let inputs: Vec<&Vec<usize>> = l
                .inputs
                .iter()
                .map(|n| {
                    shapes
                        .get(n.as_str())
                        .ok_or_else(|| fail(format!("unknown producer {n}")))
                })
                .collect::<Result<_>>()?;
            let expect_inputs = match l.kind {
                LayerKind::SpikeAttention => 3,
                LayerKind::Residual => 2,
                _ => 1,
            };
            if inputs.len() != expect_inputs {
                return Err(fail(format!(
                    "{} inputs, expected {expect_inputs}",
                    inputs.len()
                )));
            }
            let want: Vec<usize> = match l.geometry {
                Geometry::Conv { c_in, h, w, .. } => vec![c_in, h, w],
                Geometry::Linear { tokens, d_in, .. } => vec![tokens, d_in],
                Geometry::Attention {
                    tokens,
                    heads,
                    head_dim,
                } => vec![tokens, heads * head_dim],
                Geometry::Elementwise { tokens, dim } => vec![tokens, dim],
            };
            for s in &inputs {
                if **s != want {
                    return Err(fail(format!("producer shape {s:?}, expected {want:?}")));
                }
            }
            if l.kind != LayerKind::Head && l.kind != LayerKind::Residual && l.tflif.is_none() {
                return Err(fail("spiking layer without TFLIF parameters".into()));
            }
            if let Some(p) = &l.tflif {
                if p.timesteps != self.timesteps {
                    return Err(fail(format!(
                        "TFLIF runs {} timesteps, network {}",
                        p.timesteps, self.timesteps
                    )));
                }
            }
            shapes.insert(&l.name, l.geometry.output_shape());
        }
        match self.layers.last() {
            Some(l) if l.kind == LayerKind::Head => Ok(()),
            _ => Err(Error::Shape(
                "network must end with a classification head".into(),
            )),
        }
    }

    /// Per-layer output shapes including the timestep axis, computed without data.
    pub fn shape_trace(&self) -> Vec<(String, Vec<usize>)> {
        self.layers
            .iter()
            .map(|l| {
                let mut s = vec![self.timesteps];
                if l.kind == LayerKind::Head {
                    s.push(self.classes);
                } else {
                    s.extend(l.geometry.output_shape());
                }
                (l.name.clone(), s)
            })
            .collect()
    }

    pub fn layer(&self, name: &str) -> Option<(usize, &LayerSpec)> {
        self.layers.iter().enumerate().find(|(_, l)| l.name == name)
    }
}

// ---------------------------------------------------------------------------
// Weights

/// Synthetic signed 8-bit weights, one matrix per weighted layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkWeights {
    per_layer: Vec<Option<WeightMatrix>>,
}

impl NetworkWeights {
    /// Seeded uniform int8 weights. Layer `i` draws from its own stream, so
    /// weights do not shift when other layers change.
    pub fn synthetic(spec: &NetworkSpec, seed: u64) -> Self {
        let per_layer = spec
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                l.geometry.weight_shape().map(|shape| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(i as u64 + 1);
                    WeightMatrix::from_fn(&shape, |_| rng.random::<i8>())
                })
            })
            .collect();
        Self { per_layer }
    }

    pub fn from_layers(per_layer: Vec<Option<WeightMatrix>>) -> Self {
        Self { per_layer }
    }

    pub fn get(&self, layer: usize) -> Option<&WeightMatrix> {
        self.per_layer.get(layer).and_then(Option::as_ref)
    }
}

/// Seeded synthetic `u8` image.
pub fn synthetic_image(shape: [usize; 3], seed: u64) -> ByteImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    ByteImage::from_fn(&shape, |_| rng.random::<u8>())
}

// ---------------------------------------------------------------------------
// Reference run

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerRecord {
    pub name: String,
    pub kind: LayerKind,
    /// Pre-requantization accumulators (attention: `[T, heads, N, d_h]`).
    pub accum: Option<AccumTensor>,
    pub spikes: Option<SpikeTensor>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkTrace {
    pub records: Vec<LayerRecord>,
    pub tokens: SpikeTensor,
    /// `[T, classes]`, summed over tokens.
    pub logits: AccumTensor,
}

impl NetworkTrace {
    pub fn predicted_class(&self) -> usize {
        class_from_logits(&self.logits)
    }

    /// Looks up a spike tensor by producer name, including [`TOKENS`].
    pub fn spikes(&self, name: &str) -> Option<&SpikeTensor> {
        if name == TOKENS {
            return Some(&self.tokens);
        }
        self.records
            .iter()
            .find(|r| r.name == name)
            .and_then(|r| r.spikes.as_ref())
    }

    pub fn record(&self, name: &str) -> Option<&LayerRecord> {
        self.records.iter().find(|r| r.name == name)
    }
}

/// Argmax over timestep-summed `[T, classes]` logits; ties go to the lowest class index.
pub fn class_from_logits(logits: &AccumTensor) -> usize {
    let s = logits.shape();
    let (t_n, classes) = (s[0], s[1]);
    let totals: Vec<i64> = (0..classes)
        .map(|c| (0..t_n).map(|t| logits.get(&[t, c]) as i64).sum())
        .collect();
    let best = totals.iter().copied().max().unwrap_or(0);
    totals.iter().position(|&v| v == best).unwrap_or(0)
}

fn weights_for<'a>(
    weights: &'a NetworkWeights,
    i: usize,
    l: &LayerSpec,
) -> Result<&'a WeightMatrix> {
    let w = weights
        .get(i)
        .ok_or_else(|| Error::Shape("missing weights".into()).in_layer(i, &l.name))?;
    match l.geometry.weight_shape() {
        Some(s) if s == w.shape() => Ok(w),
        s => Err(
            Error::Shape(format!("weights {:?}, expected {:?}", w.shape(), s)).in_layer(i, &l.name),
        ),
    }
}

/// Runs every layer densely and records all intermediates.
pub fn run_network_reference(
    spec: &NetworkSpec,
    weights: &NetworkWeights,
    img: &ByteImage,
) -> Result<NetworkTrace> {
    if img.shape() != spec.input_shape {
        return Err(Error::Shape(format!(
            "image {:?}, network expects {:?}",
            img.shape(),
            spec.input_shape
        )));
    }
    let mut values: HashMap<String, SpikeTensor> = HashMap::new();
    let mut records = Vec::with_capacity(spec.layers.len());
    let mut tokens = None;
    let mut logits = None;
    for (i, l) in spec.layers.iter().enumerate() {
        let wrap = |e: Error| e.in_layer(i, &l.name);
        if tokens.is_none() && !matches!(l.kind, LayerKind::Conv8bitInput | LayerKind::SpikeConv) {
            let tok = to_tokens(&values[&spec.layers[i - 1].name]).map_err(wrap)?;
            values.insert(TOKENS.to_string(), tok.clone());
            tokens = Some(tok);
        }
        let input = |k: usize| -> Result<&SpikeTensor> {
            values.get(&l.inputs[k]).ok_or_else(|| {
                Error::Shape(format!("producer {} not evaluated", l.inputs[k])).in_layer(i, &l.name)
            })
        };
        let (accum, spikes) = match l.kind {
            LayerKind::Conv8bitInput => {
                let Geometry::Conv { stride, .. } = l.geometry else {
                    unreachable!()
                };
                let w = weights_for(weights, i, l)?;
                let acc = ref_conv2d_u8(img, w, stride, spec.timesteps).map_err(wrap)?;
                let sp = apply_tflif(&acc, l.requant_shift, l.tflif.as_ref().unwrap(), 1)
                    .map_err(wrap)?;
                (Some(acc), Some(sp))
            }
            LayerKind::SpikeConv => {
                let Geometry::Conv { stride, .. } = l.geometry else {
                    unreachable!()
                };
                let w = weights_for(weights, i, l)?;
                let acc = ref_spiking_conv2d(input(0)?, w, stride).map_err(wrap)?;
                let sp = apply_tflif(&acc, l.requant_shift, l.tflif.as_ref().unwrap(), 1)
                    .map_err(wrap)?;
                (Some(acc), Some(sp))
            }
            LayerKind::SpikeLinear => {
                let w = weights_for(weights, i, l)?;
                let acc = ref_spiking_linear(input(0)?, w).map_err(wrap)?;
                let sp = apply_tflif(&acc, l.requant_shift, l.tflif.as_ref().unwrap(), 2)
                    .map_err(wrap)?;
                (Some(acc), Some(sp))
            }
            LayerKind::SpikeAttention => {
                let Geometry::Attention { heads, .. } = l.geometry else {
                    unreachable!()
                };
                let q = split_heads(input(0)?, heads).map_err(wrap)?;
                let k = split_heads(input(1)?, heads).map_err(wrap)?;
                let v = split_heads(input(2)?, heads).map_err(wrap)?;
                let raw = ref_ssa_raw(&q, &k, &v).map_err(wrap)?;
                let sp = ssa_activation(&raw, l.requant_shift, l.tflif.as_ref().unwrap())
                    .map_err(wrap)?;
                (Some(raw), Some(merge_heads(&sp).map_err(wrap)?))
            }
            LayerKind::Residual => {
                let sp = iand_residual(input(0)?, input(1)?, l.residual_op.unwrap_or_default())
                    .map_err(wrap)?;
                (None, Some(sp))
            }
            LayerKind::Head => {
                let w = weights_for(weights, i, l)?;
                let acc = ref_spiking_linear(input(0)?, w).map_err(wrap)?;
                logits = Some(sum_tokens(&acc).map_err(wrap)?);
                (Some(acc), None)
            }
        };
        if let Some(sp) = &spikes {
            values.insert(l.name.clone(), sp.clone());
        }
        records.push(LayerRecord {
            name: l.name.clone(),
            kind: l.kind,
            accum,
            spikes,
        });
    }
    Ok(NetworkTrace {
        records,
        tokens: tokens.ok_or_else(|| Error::Shape("network has no encoder".into()))?,
        logits: logits.ok_or_else(|| Error::Shape("network has no head".into()))?,
    })
}
