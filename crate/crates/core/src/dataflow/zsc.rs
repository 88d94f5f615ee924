// SPDX-License-Identifier: Apache-2.0

//! Spike-input convolution with a 2x2 kernel and stride 2.
//!
//! A group of `zsc_group` consecutive units holds one input channel's kernel,
//! one weight per unit, so 512 units cover 128 input channels at once. The
//! eight lanes of every unit carry `tokens_per_unit` output pixels times
//! `timesteps`. Summing the lanes across all 512 units yields eight partial
//! outputs per cycle; when the input channels span several blocks the
//! partials stay in the split register until the last block, so no
//! intermediate map is ever written to SRAM.

use super::{
    ceil_div, Activation, ItemOp, ItemTraffic, LayerPlan, MappingPolicy, Schedule, ScheduledLayer,
    WorkItem,
};
use crate::error::{Error, Result};
use crate::golden::network::{Geometry, LayerKind, LayerSpec};
use crate::memory::BankId;
use crate::pe::{AdderTreeMode, LaneRole, PeModuleConfig, UnitInput};
use crate::tensor::{AccumTensor, SpikeTensor, WeightMatrix};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZscLayer {
    pub c_in: usize,
    pub c_out: usize,
    pub h: usize,
    pub w: usize,
    pub kernel: usize,
}

struct Derived {
    ho: usize,
    wo: usize,
    hw: usize,
    channels_per_block: usize,
    in_blocks: usize,
    pairs: usize,
}

impl ZscLayer {
    pub fn from_spec(layer: &LayerSpec) -> Result<Self> {
        if layer.kind != LayerKind::SpikeConv {
            return Err(Error::Scheduling(format!(
                "{} is not a spike-input convolution",
                layer.name
            )));
        }
        let Geometry::Conv {
            c_in,
            c_out,
            h,
            w,
            kernel,
            stride,
        } = layer.geometry
        else {
            return Err(Error::Scheduling(format!(
                "{} has no convolution geometry",
                layer.name
            )));
        };
        if kernel != 2 || stride != 2 {
            return Err(Error::UnsupportedLayer(format!(
                "{}: zero-skip convolution needs a 2x2 kernel with stride 2, got {kernel}x{kernel} stride {stride}",
                layer.name
            )));
        }
        Ok(Self {
            c_in,
            c_out,
            h,
            w,
            kernel,
        })
    }

    fn derive(&self, policy: &MappingPolicy, pe: &PeModuleConfig) -> Result<Derived> {
        let k2 = self.kernel * self.kernel;
        if policy.zsc_group != k2 {
            return Err(Error::Policy(format!(
                "ZSC group of {} units cannot hold a {}x{} kernel",
                policy.zsc_group, self.kernel, self.kernel
            )));
        }
        let ho = self.h / self.kernel;
        let wo = self.w / self.kernel;
        let channels_per_block = pe.num_units / policy.zsc_group;
        Ok(Derived {
            ho,
            wo,
            hw: ho * wo,
            channels_per_block,
            in_blocks: ceil_div(self.c_in, channels_per_block),
            pairs: ceil_div(ho * wo, policy.tokens_per_unit),
        })
    }

    pub fn plan(&self, policy: &MappingPolicy, pe: &PeModuleConfig) -> Result<LayerPlan> {
        let d = self.derive(policy, pe)?;
        let t = policy.timesteps as u64;
        let cycles = (self.c_out * d.in_blocks * d.pairs) as u64;
        let k2 = (self.kernel * self.kernel) as u64;
        let split = d.in_blocks > 1;
        Ok(LayerPlan {
            cycles,
            active_lanes: self.c_out as u64 * d.hw as u64 * t * k2 * self.c_in as u64,
            weight_loads: if split { cycles } else { self.c_out as u64 },
            split_buffer_bits: if split { pe.partial_buffer_bits() } else { 0 },
            bank_peaks: vec![(
                BankId::SW,
                (self.c_in.min(d.channels_per_block) as u64) * k2 * 8,
            )],
            output_write_bits: self.c_out as u64 * d.hw as u64 * t,
            comparisons: vec![(
                "zsc_intermediate_sram_bits".into(),
                0,
                d.hw as u64 * t * pe.accumulator_width as u64,
            )],
            ..Default::default()
        })
    }

    pub(crate) fn items(
        &self,
        policy: &MappingPolicy,
        pe: &PeModuleConfig,
    ) -> Result<Vec<WorkItem>> {
        let d = self.derive(policy, pe)?;
        let adder = AdderTreeMode::SumAcrossUnits {
            group: pe.num_units,
        };
        let mut items = Vec::with_capacity(self.c_out * d.pairs * d.in_blocks);
        for co in 0..self.c_out {
            for pair in 0..d.pairs {
                for blk in 0..d.in_blocks {
                    items.push(WorkItem {
                        op: ItemOp::Zsc {
                            out_channel: co as u32,
                            pair: pair as u32,
                            in_block: blk as u32,
                        },
                        adder,
                        last_chunk: blk + 1 == d.in_blocks,
                    });
                }
            }
        }
        Ok(items)
    }

    fn active_units(&self, d: &Derived, policy: &MappingPolicy, blk: usize) -> usize {
        self.c_in
            .saturating_sub(blk * d.channels_per_block)
            .min(d.channels_per_block)
            * policy.zsc_group
    }

    fn valid_pixels(&self, d: &Derived, policy: &MappingPolicy, pair: usize) -> usize {
        d.hw.saturating_sub(pair * policy.tokens_per_unit)
            .min(policy.tokens_per_unit)
    }

    pub(crate) fn item_active_lanes(
        &self,
        item: &WorkItem,
        policy: &MappingPolicy,
        pe: &PeModuleConfig,
    ) -> u64 {
        let ItemOp::Zsc { pair, in_block, .. } = item.op else {
            return 0;
        };
        let Ok(d) = self.derive(policy, pe) else {
            return 0;
        };
        (self.active_units(&d, policy, in_block as usize)
            * self.valid_pixels(&d, policy, pair as usize)
            * policy.timesteps) as u64
    }

    pub(crate) fn item_traffic(
        &self,
        item: &WorkItem,
        policy: &MappingPolicy,
        pe: &PeModuleConfig,
        reload: bool,
    ) -> ItemTraffic {
        let ItemOp::Zsc { pair, in_block, .. } = item.op else {
            return ItemTraffic::default();
        };
        let Ok(d) = self.derive(policy, pe) else {
            return ItemTraffic::default();
        };
        let units = self.active_units(&d, policy, in_block as usize) as u64;
        let pixels = (self.valid_pixels(&d, policy, pair as usize) * policy.timesteps) as u64;
        ItemTraffic {
            weights: reload.then_some((BankId::SW, units * 8)),
            inputs: Some((BankId::LI, units * pixels)),
            outputs: item.last_chunk.then_some((BankId::OUT, pixels)),
        }
    }
}

/// Schedules a spike-input 2x2/s2 convolution.
pub fn schedule_zsc(
    layer: &LayerSpec,
    policy: &MappingPolicy,
    pe: &PeModuleConfig,
) -> Result<Schedule> {
    let bound = ZscLayer::from_spec(layer)?;
    Schedule::build(
        ScheduledLayer::Zsc(bound),
        policy,
        pe,
        layer.tflif.as_ref().map(|t| Activation {
            requant_shift: layer.requant_shift,
            tflif: t.clone(),
        }),
    )
}

pub(crate) struct ZscKernel<'a> {
    layer: &'a ZscLayer,
    policy: MappingPolicy,
    d: Derived,
    acc_bits: u32,
    x: &'a SpikeTensor,
    w: &'a WeightMatrix,
    partial: Vec<i64>,
    out: AccumTensor,
}

impl<'a> ZscKernel<'a> {
    pub(crate) fn new(
        layer: &'a ZscLayer,
        policy: &MappingPolicy,
        pe: &PeModuleConfig,
        x: &'a SpikeTensor,
        w: &'a WeightMatrix,
    ) -> Result<Self> {
        let d = layer.derive(policy, pe)?;
        let t = policy.timesteps;
        if x.shape() != [t, layer.c_in, layer.h, layer.w] {
            return Err(Error::Shape(format!(
                "ZSC input {:?}, expected {:?}",
                x.shape(),
                [t, layer.c_in, layer.h, layer.w]
            )));
        }
        if w.shape() != [layer.c_out, layer.c_in, layer.kernel, layer.kernel] {
            return Err(Error::Shape(format!(
                "ZSC weights {:?} do not match the layer",
                w.shape()
            )));
        }
        let out = AccumTensor::zeros(&[t, layer.c_out, d.ho, d.wo]);
        Ok(Self {
            layer,
            policy: *policy,
            partial: vec![0; pe.pes_per_unit],
            acc_bits: pe.accumulator_width,
            d,
            x,
            w,
            out,
        })
    }
}

impl super::exec::Kernel for ZscKernel<'_> {
    fn expand(&mut self, item: &WorkItem, units: &mut [UnitInput]) -> Result<()> {
        let ItemOp::Zsc {
            out_channel,
            pair,
            in_block,
        } = item.op
        else {
            return Err(Error::Scheduling("non-ZSC item in a ZSC schedule".into()));
        };
        let (co, blk) = (out_channel as usize, in_block as usize);
        let k = self.layer.kernel;
        let tpu = self.policy.tokens_per_unit;
        let t_n = self.policy.timesteps;
        let n_units = self.layer.active_units(&self.d, &self.policy, blk);
        for (u, unit) in units.iter_mut().enumerate().take(n_units) {
            let ci = blk * self.d.channels_per_block + u / self.policy.zsc_group;
            let (ky, kx) = (
                (u % self.policy.zsc_group) / k,
                (u % self.policy.zsc_group) % k,
            );
            unit.weight = self.w.get(&[co, ci, ky, kx]);
            for slot in 0..tpu {
                let p = pair as usize * tpu + slot;
                if p >= self.d.hw {
                    continue;
                }
                let (oy, ox) = (p / self.d.wo, p % self.d.wo);
                for t in 0..t_n {
                    let lane = slot * t_n + t;
                    unit.roles[lane] = LaneRole::Step {
                        slot: slot as u8,
                        t: t as u8,
                    };
                    if self.x.get(&[t, ci, oy * k + ky, ox * k + kx]) {
                        unit.spikes |= 1 << lane;
                    }
                }
            }
        }
        Ok(())
    }

    fn retire(&mut self, item: &WorkItem, reduced: &[i32]) -> Result<()> {
        let ItemOp::Zsc {
            out_channel, pair, ..
        } = item.op
        else {
            unreachable!()
        };
        for (p, r) in self.partial.iter_mut().zip(reduced) {
            *p = super::fit_partial(*p + *r as i64, self.acc_bits, "ZSC split partial")?;
        }
        if item.last_chunk {
            let tpu = self.policy.tokens_per_unit;
            let t_n = self.policy.timesteps;
            let (ho, wo) = (self.d.ho, self.d.wo);
            for slot in 0..tpu {
                let p = pair as usize * tpu + slot;
                if p >= self.d.hw {
                    continue;
                }
                for t in 0..t_n {
                    let idx =
                        ((t * self.layer.c_out + out_channel as usize) * ho + p / wo) * wo + p % wo;
                    self.out.data_mut()[idx] = self.partial[slot * t_n + t] as i32;
                }
            }
            self.partial.iter_mut().for_each(|p| *p = 0);
        }
        Ok(())
    }

    fn finish(self: Box<Self>) -> AccumTensor {
        self.out
    }
}
