// SPDX-License-Identifier: Apache-2.0

//! First-layer convolution on 8-bit pixels.
//!
//! Every unit holds one weight of the receptive field (`C_in * k * k` units
//! per output pixel) and its eight lanes take the eight bitplanes of the
//! matching input byte. The adder tree shifts lane `b` left by `b` and sums a
//! whole receptive field, so each group of units produces one exact
//! `u8 x i8` dot product. As many output pixels as fit are packed side by
//! side; the remaining units idle. The input is static across timesteps, so
//! the result is computed once and replicated over T.

use super::{
    ceil_div, Activation, ItemOp, ItemTraffic, LayerPlan, MappingPolicy, Schedule, ScheduledLayer,
    WorkItem,
};
use crate::error::{Error, Result};
use crate::golden::network::{Geometry, LayerKind, LayerSpec};
use crate::memory::BankId;
use crate::pe::{AdderTreeMode, LaneRole, PeModuleConfig, UnitInput};
use crate::tensor::{AccumTensor, ByteImage, WeightMatrix};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SsscLayer {
    pub c_in: usize,
    pub c_out: usize,
    pub h: usize,
    pub w: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl SsscLayer {
    pub fn from_spec(layer: &LayerSpec) -> Result<Self> {
        if layer.kind != LayerKind::Conv8bitInput {
            return Err(Error::Scheduling(format!(
                "{}: bitplane convolution only applies to the 8-bit input layer",
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
        Ok(Self {
            c_in,
            c_out,
            h,
            w,
            kernel,
            stride,
        })
    }

    fn out_dims(&self) -> (usize, usize) {
        (
            (self.h - self.kernel) / self.stride + 1,
            (self.w - self.kernel) / self.stride + 1,
        )
    }

    /// Units per receptive field.
    pub fn field_units(&self) -> usize {
        self.c_in * self.kernel * self.kernel
    }

    /// Output pixels computed per cycle.
    pub fn pixels_per_cycle(&self, pe: &PeModuleConfig) -> Result<usize> {
        if pe.pes_per_unit != 8 {
            return Err(Error::Policy(format!(
                "bitplane lanes need 8 PEs per unit, got {}",
                pe.pes_per_unit
            )));
        }
        let r = self.field_units();
        if r == 0 || r > pe.num_units {
            return Err(Error::UnsupportedLayer(format!(
                "receptive field of {r} weights does not fit {} units",
                pe.num_units
            )));
        }
        Ok(pe.num_units / r)
    }

    pub fn plan(&self, policy: &MappingPolicy, pe: &PeModuleConfig) -> Result<LayerPlan> {
        let p = self.pixels_per_cycle(pe)?;
        let (ho, wo) = self.out_dims();
        let hw = ho * wo;
        let r = self.field_units() as u64;
        Ok(LayerPlan {
            cycles: (self.c_out * ceil_div(hw, p)) as u64,
            active_lanes: self.c_out as u64 * hw as u64 * r * 8,
            weight_loads: self.c_out as u64,
            bank_peaks: vec![(BankId::SW, r * 8)],
            output_write_bits: (self.c_out * hw * policy.timesteps) as u64,
            ..Default::default()
        })
    }

    pub(crate) fn items(
        &self,
        _policy: &MappingPolicy,
        pe: &PeModuleConfig,
    ) -> Result<Vec<WorkItem>> {
        let p = self.pixels_per_cycle(pe)?;
        let (ho, wo) = self.out_dims();
        let blocks = ceil_div(ho * wo, p);
        let adder = AdderTreeMode::ShiftSumWithinUnit {
            group: self.field_units(),
        };
        let mut items = Vec::with_capacity(self.c_out * blocks);
        for co in 0..self.c_out {
            for blk in 0..blocks {
                items.push(WorkItem {
                    op: ItemOp::Sssc {
                        out_channel: co as u32,
                        pixel_block: blk as u32,
                    },
                    adder,
                    last_chunk: true,
                });
            }
        }
        Ok(items)
    }

    fn valid_pixels(&self, pe: &PeModuleConfig, blk: usize) -> usize {
        let (ho, wo) = self.out_dims();
        let p = self.pixels_per_cycle(pe).unwrap_or(0);
        (ho * wo).saturating_sub(blk * p).min(p)
    }

    pub(crate) fn item_active_lanes(
        &self,
        item: &WorkItem,
        _policy: &MappingPolicy,
        pe: &PeModuleConfig,
    ) -> u64 {
        let ItemOp::Sssc { pixel_block, .. } = item.op else {
            return 0;
        };
        (self.valid_pixels(pe, pixel_block as usize) * self.field_units() * 8) as u64
    }

    pub(crate) fn item_traffic(
        &self,
        item: &WorkItem,
        policy: &MappingPolicy,
        pe: &PeModuleConfig,
        reload: bool,
    ) -> ItemTraffic {
        let ItemOp::Sssc { pixel_block, .. } = item.op else {
            return ItemTraffic::default();
        };
        let valid = self.valid_pixels(pe, pixel_block as usize) as u64;
        let r = self.field_units() as u64;
        ItemTraffic {
            weights: reload.then_some((BankId::SW, r * 8)),
            inputs: Some((BankId::LI, valid * r * 8)),
            outputs: Some((BankId::OUT, valid * policy.timesteps as u64)),
        }
    }
}

/// Schedules the 8-bit-input convolution.
pub fn schedule_sssc(
    layer: &LayerSpec,
    policy: &MappingPolicy,
    pe: &PeModuleConfig,
) -> Result<Schedule> {
    let bound = SsscLayer::from_spec(layer)?;
    Schedule::build(
        ScheduledLayer::Sssc(bound),
        policy,
        pe,
        layer.tflif.as_ref().map(|t| Activation {
            requant_shift: layer.requant_shift,
            tflif: t.clone(),
        }),
    )
}

pub(crate) struct SsscKernel<'a> {
    layer: &'a SsscLayer,
    timesteps: usize,
    per_cycle: usize,
    img: &'a ByteImage,
    w: &'a WeightMatrix,
    out: AccumTensor,
}

impl<'a> SsscKernel<'a> {
    pub(crate) fn new(
        layer: &'a SsscLayer,
        policy: &MappingPolicy,
        pe: &PeModuleConfig,
        img: &'a ByteImage,
        w: &'a WeightMatrix,
    ) -> Result<Self> {
        if img.shape() != [layer.c_in, layer.h, layer.w] {
            return Err(Error::Shape(format!(
                "SSSC image {:?}, expected {:?}",
                img.shape(),
                [layer.c_in, layer.h, layer.w]
            )));
        }
        if w.shape() != [layer.c_out, layer.c_in, layer.kernel, layer.kernel] {
            return Err(Error::Shape(format!(
                "SSSC weights {:?} do not match the layer",
                w.shape()
            )));
        }
        let (ho, wo) = layer.out_dims();
        Ok(Self {
            layer,
            timesteps: policy.timesteps,
            per_cycle: layer.pixels_per_cycle(pe)?,
            img,
            w,
            out: AccumTensor::zeros(&[policy.timesteps, layer.c_out, ho, wo]),
        })
    }
}

impl super::exec::Kernel for SsscKernel<'_> {
    fn expand(&mut self, item: &WorkItem, units: &mut [UnitInput]) -> Result<()> {
        let ItemOp::Sssc {
            out_channel,
            pixel_block,
        } = item.op
        else {
            return Err(Error::Scheduling(
                "non-SSSC item in an SSSC schedule".into(),
            ));
        };
        let l = self.layer;
        let (_, wo) = l.out_dims();
        let k = l.kernel;
        let r = l.field_units();
        let planes: [LaneRole; 8] = std::array::from_fn(|b| LaneRole::Bitplane(b as u8));
        let (ho, _) = l.out_dims();
        for slot in 0..self.per_cycle {
            let p = pixel_block as usize * self.per_cycle + slot;
            if p >= ho * wo {
                break;
            }
            let (oy, ox) = (p / wo, p % wo);
            for f in 0..r {
                let (ci, ky, kx) = (f / (k * k), (f % (k * k)) / k, f % k);
                let unit = &mut units[slot * r + f];
                unit.weight = self.w.get(&[out_channel as usize, ci, ky, kx]);
                unit.spikes = self.img.get(&[ci, oy * l.stride + ky, ox * l.stride + kx]);
                unit.roles = planes;
            }
        }
        Ok(())
    }

    fn retire(&mut self, item: &WorkItem, reduced: &[i32]) -> Result<()> {
        let ItemOp::Sssc {
            out_channel,
            pixel_block,
        } = item.op
        else {
            unreachable!()
        };
        let (ho, wo) = self.layer.out_dims();
        let plane = ho * wo;
        for (slot, &v) in reduced.iter().enumerate().take(self.per_cycle) {
            let p = pixel_block as usize * self.per_cycle + slot;
            if p >= plane {
                break;
            }
            for t in 0..self.timesteps {
                self.out.data_mut()[(t * self.layer.c_out + out_channel as usize) * plane + p] = v;
            }
        }
        Ok(())
    }

    fn finish(self: Box<Self>) -> AccumTensor {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(c_in: usize, kernel: usize) -> SsscLayer {
        SsscLayer {
            c_in,
            c_out: 1,
            h: kernel,
            w: kernel,
            kernel,
            stride: kernel,
        }
    }

    #[test]
    fn receptive_field_sets_pixels_per_cycle() {
        let pe = PeModuleConfig::default();
        assert_eq!(layer(3, 2).pixels_per_cycle(&pe).unwrap(), 42);
        assert_eq!(layer(1, 1).pixels_per_cycle(&pe).unwrap(), 512);
    }

    #[test]
    fn oversized_receptive_field_is_rejected() {
        assert!(layer(3, 14)
            .pixels_per_cycle(&PeModuleConfig::default())
            .is_err());
    }

    #[test]
    fn needs_eight_bitplane_lanes() {
        let pe = PeModuleConfig {
            pes_per_unit: 4,
            ..PeModuleConfig::default()
        };
        assert!(layer(3, 2).pixels_per_cycle(&pe).is_err());
    }
}
