// SPDX-License-Identifier: Apache-2.0

//! Linear layers with one weight column held stationary across the units.
//!
//! Unit `u` holds `W[o, chunk * 512 + u]`; its lanes take two tokens times
//! four timesteps of the matching input feature. Summing each lane across
//! the array gives eight outputs of column `o` per cycle. Columns longer
//! than the array are split into chunks whose partial sums wait in the
//! 192-bit split register, never in SRAM.

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
pub struct WsslLayer {
    pub tokens: usize,
    pub d_in: usize,
    pub d_out: usize,
}

impl WsslLayer {
    pub fn from_spec(layer: &LayerSpec) -> Result<Self> {
        if !matches!(layer.kind, LayerKind::SpikeLinear | LayerKind::Head) {
            return Err(Error::Scheduling(format!(
                "{} is not a linear layer",
                layer.name
            )));
        }
        let Geometry::Linear {
            tokens,
            d_in,
            d_out,
        } = layer.geometry
        else {
            return Err(Error::Scheduling(format!(
                "{} has no linear geometry",
                layer.name
            )));
        };
        Ok(Self {
            tokens,
            d_in,
            d_out,
        })
    }

    pub fn chunks(&self, pe: &PeModuleConfig) -> usize {
        ceil_div(self.d_in, pe.num_units)
    }

    fn pairs(&self, policy: &MappingPolicy) -> usize {
        ceil_div(self.tokens, policy.tokens_per_unit)
    }

    pub fn plan(&self, policy: &MappingPolicy, pe: &PeModuleConfig) -> Result<LayerPlan> {
        let chunks = self.chunks(pe);
        let cycles = (chunks * self.d_out * self.pairs(policy)) as u64;
        let t = policy.timesteps as u64;
        let split = chunks > 1;
        let mut comparisons = Vec::new();
        if split {
            comparisons.push((
                "wssl_partial_sum_bits".to_string(),
                pe.partial_buffer_bits(),
                self.tokens as u64 * t * pe.accumulator_width as u64,
            ));
        }
        Ok(LayerPlan {
            cycles,
            active_lanes: (self.d_out * self.tokens * self.d_in) as u64 * t,
            weight_loads: if split { cycles } else { self.d_out as u64 },
            split_buffer_bits: if split { pe.partial_buffer_bits() } else { 0 },
            bank_peaks: vec![(BankId::LW, self.d_in.min(pe.num_units) as u64 * 8)],
            output_write_bits: (self.d_out * self.tokens) as u64 * t,
            comparisons,
            ..Default::default()
        })
    }

    pub(crate) fn items(
        &self,
        policy: &MappingPolicy,
        pe: &PeModuleConfig,
    ) -> Result<Vec<WorkItem>> {
        let chunks = self.chunks(pe);
        let pairs = self.pairs(policy);
        let adder = AdderTreeMode::SumAcrossUnits {
            group: pe.num_units,
        };
        let mut items = Vec::with_capacity(chunks * self.d_out * pairs);
        for o in 0..self.d_out {
            for pair in 0..pairs {
                for chunk in 0..chunks {
                    items.push(WorkItem {
                        op: ItemOp::Wssl {
                            out_col: o as u32,
                            pair: pair as u32,
                            chunk: chunk as u32,
                        },
                        adder,
                        last_chunk: chunk + 1 == chunks,
                    });
                }
            }
        }
        Ok(items)
    }

    fn active_units(&self, pe: &PeModuleConfig, chunk: usize) -> usize {
        self.d_in
            .saturating_sub(chunk * pe.num_units)
            .min(pe.num_units)
    }

    fn valid_tokens(&self, policy: &MappingPolicy, pair: usize) -> usize {
        self.tokens
            .saturating_sub(pair * policy.tokens_per_unit)
            .min(policy.tokens_per_unit)
    }

    pub(crate) fn item_active_lanes(
        &self,
        item: &WorkItem,
        policy: &MappingPolicy,
        pe: &PeModuleConfig,
    ) -> u64 {
        let ItemOp::Wssl { pair, chunk, .. } = item.op else {
            return 0;
        };
        (self.active_units(pe, chunk as usize)
            * self.valid_tokens(policy, pair as usize)
            * policy.timesteps) as u64
    }

    pub(crate) fn item_traffic(
        &self,
        item: &WorkItem,
        policy: &MappingPolicy,
        pe: &PeModuleConfig,
        reload: bool,
    ) -> ItemTraffic {
        let ItemOp::Wssl { pair, chunk, .. } = item.op else {
            return ItemTraffic::default();
        };
        let units = self.active_units(pe, chunk as usize) as u64;
        let lanes = (self.valid_tokens(policy, pair as usize) * policy.timesteps) as u64;
        ItemTraffic {
            weights: reload.then_some((BankId::LW, units * 8)),
            inputs: Some((BankId::LI, units * lanes)),
            outputs: item.last_chunk.then_some((BankId::OUT, lanes)),
        }
    }
}

/// Schedules a linear layer (including the classification head).
pub fn schedule_wssl(
    layer: &LayerSpec,
    policy: &MappingPolicy,
    pe: &PeModuleConfig,
) -> Result<Schedule> {
    let bound = WsslLayer::from_spec(layer)?;
    Schedule::build(
        ScheduledLayer::Wssl(bound),
        policy,
        pe,
        layer.tflif.as_ref().map(|t| Activation {
            requant_shift: layer.requant_shift,
            tflif: t.clone(),
        }),
    )
}

pub(crate) struct WsslKernel<'a> {
    layer: &'a WsslLayer,
    policy: MappingPolicy,
    units: usize,
    acc_bits: u32,
    x: &'a SpikeTensor,
    w: &'a WeightMatrix,
    partial: Vec<i64>,
    out: AccumTensor,
}

impl<'a> WsslKernel<'a> {
    pub(crate) fn new(
        layer: &'a WsslLayer,
        policy: &MappingPolicy,
        pe: &PeModuleConfig,
        x: &'a SpikeTensor,
        w: &'a WeightMatrix,
    ) -> Result<Self> {
        let t = policy.timesteps;
        if x.shape() != [t, layer.tokens, layer.d_in] {
            return Err(Error::Shape(format!(
                "WSSL input {:?}, expected {:?}",
                x.shape(),
                [t, layer.tokens, layer.d_in]
            )));
        }
        if w.shape() != [layer.d_out, layer.d_in] {
            return Err(Error::Shape(format!(
                "WSSL weights {:?} do not match the layer",
                w.shape()
            )));
        }
        Ok(Self {
            layer,
            policy: *policy,
            units: pe.num_units,
            acc_bits: pe.accumulator_width,
            x,
            w,
            partial: vec![0; pe.pes_per_unit],
            out: AccumTensor::zeros(&[t, layer.tokens, layer.d_out]),
        })
    }
}

impl super::exec::Kernel for WsslKernel<'_> {
    fn expand(&mut self, item: &WorkItem, units: &mut [UnitInput]) -> Result<()> {
        let ItemOp::Wssl {
            out_col,
            pair,
            chunk,
        } = item.op
        else {
            return Err(Error::Scheduling("non-WSSL item in a WSSL schedule".into()));
        };
        let l = self.layer;
        let tpu = self.policy.tokens_per_unit;
        let t_n = self.policy.timesteps;
        let base = chunk as usize * self.units;
        let n_units = l.d_in.saturating_sub(base).min(self.units);
        let wrow = &self.w.data()[out_col as usize * l.d_in..];
        for (u, unit) in units.iter_mut().enumerate().take(n_units) {
            let i = base + u;
            unit.weight = wrow[i];
            for slot in 0..tpu {
                let n = pair as usize * tpu + slot;
                if n >= l.tokens {
                    break;
                }
                for t in 0..t_n {
                    let lane = slot * t_n + t;
                    unit.roles[lane] = LaneRole::Step {
                        slot: slot as u8,
                        t: t as u8,
                    };
                    if self.x.bit((t * l.tokens + n) * l.d_in + i) {
                        unit.spikes |= 1 << lane;
                    }
                }
            }
        }
        Ok(())
    }

    fn retire(&mut self, item: &WorkItem, reduced: &[i32]) -> Result<()> {
        let ItemOp::Wssl { out_col, pair, .. } = item.op else {
            unreachable!()
        };
        for (p, r) in self.partial.iter_mut().zip(reduced) {
            *p = super::fit_partial(*p + *r as i64, self.acc_bits, "WSSL split partial")?;
        }
        if item.last_chunk {
            let l = self.layer;
            let tpu = self.policy.tokens_per_unit;
            let t_n = self.policy.timesteps;
            for slot in 0..tpu {
                let n = pair as usize * tpu + slot;
                if n >= l.tokens {
                    break;
                }
                for t in 0..t_n {
                    self.out.data_mut()[(t * l.tokens + n) * l.d_out + out_col as usize] =
                        self.partial[slot * t_n + t] as i32;
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
