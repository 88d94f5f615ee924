// SPDX-License-Identifier: Apache-2.0

//! Temporally fused LIF with batch-norm folded into the bias.
//!
//! The membrane is held in fixed point at resolution `2^-shift`. Folding
//! rewrites `BN(x) >= theta` as `mantissa * x + bias >= 0`, so the firing
//! threshold after folding is exactly zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    #[default]
    HardReset,
    SubtractThreshold,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Fixed-point scale: effective multiplier is `mantissa / 2^shift`.
    pub mantissa: i32,
    pub shift: u32,
    /// BN bias minus LIF threshold, at resolution `2^-shift`.
    pub bias: i32,
    /// LIF threshold at resolution `2^-shift`; only used by subtract reset.
    pub theta: i32,
}

impl ChannelParams {
    pub fn scale(&self) -> f64 {
        self.mantissa as f64 / (1u64 << self.shift) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TflifParams {
    /// One entry per channel, or a single entry broadcast to every channel.
    channels: Vec<ChannelParams>,
    pub decay_num: u32,
    pub decay_den: u32,
    pub reset: ResetMode,
    /// Carry membrane state across the fused timesteps. When false each
    /// timestep starts from a zero membrane.
    pub carry_membrane: bool,
    pub timesteps: usize,
}

impl TflifParams {
    pub fn new(
        channels: Vec<ChannelParams>,
        decay: (u32, u32),
        reset: ResetMode,
        carry_membrane: bool,
        timesteps: usize,
    ) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Argument("TFLIF needs at least one channel".into()));
        }
        let (num, den) = decay;
        if den == 0 || num > den {
            return Err(Error::Argument(format!("decay {num}/{den} outside [0, 1]")));
        }
        if let Some(c) = channels.iter().find(|c| c.shift > 31) {
            return Err(Error::Argument(format!("shift {} outside 0..=31", c.shift)));
        }
        if timesteps == 0 {
            return Err(Error::Argument("TFLIF needs at least one timestep".into()));
        }
        Ok(Self {
            channels,
            decay_num: num,
            decay_den: den,
            reset,
            carry_membrane,
            timesteps,
        })
    }

    /// Single-channel parameters with unit scale, the common synthetic case.
    pub fn uniform(bias: i32, theta: i32, timesteps: usize) -> Self {
        Self::new(
            vec![ChannelParams {
                mantissa: 1,
                shift: 0,
                bias,
                theta,
            }],
            (1, 2),
            ResetMode::HardReset,
            true,
            timesteps,
        )
        .expect("uniform parameters are valid")
    }

    pub fn channel(&self, c: usize) -> &ChannelParams {
        if self.channels.len() == 1 {
            &self.channels[0]
        } else {
            &self.channels[c]
        }
    }

    pub fn channels(&self) -> &[ChannelParams] {
        &self.channels
    }

    /// Checks the parameters cover `n` channels (or broadcast).
    pub fn check_channels(&self, n: usize) -> Result<()> {
        if self.channels.len() != 1 && self.channels.len() != n {
            return Err(Error::Shape(format!(
                "TFLIF has {} channel entries for {} channels",
                self.channels.len(),
                n
            )));
        }
        Ok(())
    }

    fn decay(&self, u: i64) -> i64 {
        (u * self.decay_num as i64).div_euclid(self.decay_den as i64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TflifOutput {
    /// Spike for timestep `t` is bit `t`.
    pub spikes: u32,
    /// Membrane after the last timestep (post-reset).
    pub membrane: i64,
}

impl TflifOutput {
    pub fn spike(&self, t: usize) -> bool {
        (self.spikes >> t) & 1 == 1
    }
}

/// Runs one neuron over its `T` requantized inputs.
///
/// `u_t = floor(u_{t-1} * decay) + mantissa * acc_t + bias`, spike when
/// `u_t >= 0`. Hard reset zeroes the membrane after a spike; subtract reset
/// removes `theta`.
pub fn tflif_forward(acc: &[i8], p: &TflifParams, channel: usize) -> TflifOutput {
    debug_assert_eq!(acc.len(), p.timesteps);
    debug_assert!(acc.len() <= 32);
    let c = p.channel(channel);
    let mut u = 0i64;
    let mut spikes = 0u32;
    for (t, &x) in acc.iter().enumerate() {
        let carried = if p.carry_membrane { p.decay(u) } else { 0 };
        u = carried + c.mantissa as i64 * x as i64 + c.bias as i64;
        if u >= 0 {
            spikes |= 1 << t;
            u = match p.reset {
                ResetMode::HardReset => 0,
                ResetMode::SubtractThreshold => u - c.theta as i64,
            };
        }
    }
    TflifOutput {
        spikes,
        membrane: u,
    }
}

/// Per-channel batch-norm statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub eps: f64,
}

impl BatchNorm {
    pub fn apply(&self, c: usize, x: f64) -> f64 {
        self.gamma[c] * (x - self.mean[c]) / (self.var[c] + self.eps).sqrt() + self.beta[c]
    }
}

/// Folds BN and the LIF threshold into fixed-point TFLIF parameters.
///
/// Per channel the largest shift in `0..=31` is chosen such that the
/// mantissa fits `mantissa_bits` signed bits and bias/threshold fit `i32`.
pub fn fold_bn_into_lif(
    bn: &BatchNorm,
    theta: f64,
    mantissa_bits: u32,
    decay: (u32, u32),
    reset: ResetMode,
    timesteps: usize,
) -> Result<TflifParams> {
    if mantissa_bits == 0 || mantissa_bits > 16 {
        return Err(Error::Precision(format!(
            "mantissa of {mantissa_bits} bits outside 1..=16"
        )));
    }
    let n = bn.gamma.len();
    if [bn.beta.len(), bn.mean.len(), bn.var.len()]
        .iter()
        .any(|&l| l != n)
        || n == 0
    {
        return Err(Error::Shape("batch-norm vectors differ in length".into()));
    }
    let m_max = ((1i64 << (mantissa_bits - 1)) - 1) as f64;
    let i32_max = i32::MAX as f64;
    let mut channels = Vec::with_capacity(n);
    for c in 0..n {
        let denom = bn.var[c] + bn.eps;
        if denom <= 0.0 || !denom.is_finite() {
            return Err(Error::Fold(format!("channel {c}: var + eps = {denom}")));
        }
        let a = bn.gamma[c] / denom.sqrt();
        let offset = bn.beta[c] - a * bn.mean[c] - theta;
        let fits = |s: u32| {
            let k = (1u64 << s) as f64;
            (a * k).round().abs() <= m_max
                && (offset * k).round().abs() <= i32_max
                && (theta * k).round().abs() <= i32_max
        };
        let shift = (0..=31u32).rev().find(|&s| fits(s)).ok_or_else(|| {
            Error::Precision(format!("channel {c}: scale {a} or bias {offset} overflows"))
        })?;
        let k = (1u64 << shift) as f64;
        channels.push(ChannelParams {
            mantissa: (a * k).round() as i32,
            shift,
            bias: (offset * k).round() as i32,
            theta: (theta * k).round() as i32,
        });
    }
    TflifParams::new(channels, decay, reset, true, timesteps)
}
