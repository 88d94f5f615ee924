// SPDX-License-Identifier: Apache-2.0

//! Spiking self-attention in two phases per timestep and head.
//!
//! Score phase: units are grouped by key. Each group of `next_pow2(d_h)`
//! units holds one key row as 0/1 weights and the lanes carry eight query
//! rows, so a group sums to `S[q, k]` for eight queries at once. Scores are
//! at most `d_h`, which fits the 8-bit weight path exactly; they are kept in
//! the LW bank for the second phase.
//!
//! Value phase: units are grouped by score row. A group holds `S[i, :]` as
//! weights and the lanes carry one tile of V columns, giving
//! `(S V)[i, tile]` per group. Only the current V tile (`v_tile * N` bits)
//! is resident in SI.

use super::{
    ceil_div, Activation, BufferTag, ItemOp, ItemTraffic, LayerPlan, MappingPolicy, Schedule,
    ScheduledLayer, WorkItem,
};
use crate::error::{Error, Result};
use crate::golden::network::{Geometry, LayerKind, LayerSpec};
use crate::memory::BankId;
use crate::pe::{requantize_to_8bit, AdderTreeMode, LaneRole, PeModuleConfig, UnitInput};
use crate::tensor::{AccumTensor, SpikeTensor};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StdpLayer {
    pub tokens: usize,
    pub heads: usize,
    pub head_dim: usize,
}

#[derive(Clone, Copy, Debug)]
struct Derived {
    /// Units per key in the score phase.
    gs: usize,
    keys_per_cycle: usize,
    queries_per_cycle: usize,
    query_blocks: usize,
    key_blocks: usize,
    /// Units per score row in the value phase.
    gv: usize,
    rows_per_cycle: usize,
    row_blocks: usize,
    chunks: usize,
    tiles: usize,
}

impl Derived {
    fn score_items(&self) -> usize {
        self.query_blocks * self.key_blocks
    }

    fn value_items(&self) -> usize {
        self.tiles * self.row_blocks * self.chunks
    }
}

impl StdpLayer {
    pub fn from_spec(layer: &LayerSpec) -> Result<Self> {
        if layer.kind != LayerKind::SpikeAttention {
            return Err(Error::Scheduling(format!(
                "{} is not an attention layer",
                layer.name
            )));
        }
        let Geometry::Attention {
            tokens,
            heads,
            head_dim,
        } = layer.geometry
        else {
            return Err(Error::Scheduling(format!(
                "{} has no attention geometry",
                layer.name
            )));
        };
        Ok(Self {
            tokens,
            heads,
            head_dim,
        })
    }

    fn derive(&self, policy: &MappingPolicy, pe: &PeModuleConfig) -> Result<Derived> {
        let n = self.tokens;
        let dh = self.head_dim;
        if dh == 0 || n == 0 {
            return Err(Error::Policy(
                "attention needs at least one token and one head dimension".into(),
            ));
        }
        if dh > i8::MAX as usize {
            return Err(Error::Policy(format!(
                "head dimension {dh} lets scores exceed the 8-bit weight path"
            )));
        }
        let gs = dh.next_power_of_two();
        if gs > pe.num_units || !pe.num_units.is_multiple_of(gs) {
            return Err(Error::Policy(format!(
                "a key row of {dh} features does not fit {} units",
                pe.num_units
            )));
        }
        let gv = n.next_power_of_two().min(pe.num_units);
        if !pe.num_units.is_multiple_of(gv) {
            return Err(Error::Policy(format!(
                "score rows of {gv} units do not tile {} units",
                pe.num_units
            )));
        }
        let keys_per_cycle = pe.num_units / gs;
        let rows_per_cycle = pe.num_units / gv;
        Ok(Derived {
            gs,
            keys_per_cycle,
            queries_per_cycle: pe.pes_per_unit,
            query_blocks: ceil_div(n, pe.pes_per_unit),
            key_blocks: ceil_div(n, keys_per_cycle),
            gv,
            rows_per_cycle,
            row_blocks: ceil_div(n, rows_per_cycle),
            chunks: ceil_div(n, gv),
            tiles: ceil_div(dh, policy.v_tile),
        })
    }

    fn v_tile_bits(&self, policy: &MappingPolicy) -> u64 {
        (policy.v_tile.min(self.head_dim) * self.tokens) as u64
    }

    pub fn plan(&self, policy: &MappingPolicy, pe: &PeModuleConfig) -> Result<LayerPlan> {
        let d = self.derive(policy, pe)?;
        let pairs = (policy.timesteps * self.heads) as u64;
        let (n, dh) = (self.tokens as u64, self.head_dim as u64);
        let score_loads = if d.key_blocks > 1 { d.score_items() } else { 1 };
        let value_loads = if d.row_blocks * d.chunks > 1 {
            d.value_items()
        } else {
            1
        };
        Ok(LayerPlan {
            cycles: pairs * (d.score_items() + d.value_items()) as u64,
            active_lanes: pairs * 2 * n * n * dh,
            weight_loads: pairs * (score_loads + value_loads) as u64,
            split_buffer_bits: if d.chunks > 1 {
                (d.rows_per_cycle * pe.pes_per_unit) as u64 * pe.accumulator_width as u64
            } else {
                0
            },
            bank_peaks: vec![
                (BankId::LW, n * n * 8),
                (BankId::SI, self.v_tile_bits(policy)),
            ],
            output_write_bits: pairs * n * dh,
            comparisons: vec![(
                "stdp_v_buffer_bits".into(),
                self.v_tile_bits(policy),
                n * dh,
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
        let pairs = policy.timesteps * self.heads;
        let mut items = Vec::with_capacity(pairs * (d.score_items() + d.value_items()));
        let score = AdderTreeMode::SumAcrossUnits { group: d.gs };
        let value = AdderTreeMode::SumAcrossUnits { group: d.gv };
        for t in 0..policy.timesteps {
            for h in 0..self.heads {
                let (t, head) = (t as u16, h as u16);
                for qb in 0..d.query_blocks {
                    for kb in 0..d.key_blocks {
                        items.push(WorkItem {
                            op: ItemOp::StdpScore {
                                t,
                                head,
                                query_block: qb as u32,
                                key_block: kb as u32,
                            },
                            adder: score,
                            last_chunk: true,
                        });
                    }
                }
                for tile in 0..d.tiles {
                    for rb in 0..d.row_blocks {
                        for chunk in 0..d.chunks {
                            items.push(WorkItem {
                                op: ItemOp::StdpValue {
                                    t,
                                    head,
                                    tile: tile as u32,
                                    row_block: rb as u32,
                                    chunk: chunk as u32,
                                },
                                adder: value,
                                last_chunk: chunk + 1 == d.chunks,
                            });
                        }
                    }
                }
            }
        }
        Ok(items)
    }

    fn span(total: usize, block: usize, size: usize) -> usize {
        total.saturating_sub(block * size).min(size)
    }

    /// `(rows or queries, inner extent, lanes)` valid for an item.
    fn extents(
        &self,
        item: &WorkItem,
        policy: &MappingPolicy,
        d: &Derived,
    ) -> (usize, usize, usize) {
        let n = self.tokens;
        match item.op {
            ItemOp::StdpScore {
                query_block,
                key_block,
                ..
            } => (
                Self::span(n, key_block as usize, d.keys_per_cycle),
                self.head_dim,
                Self::span(n, query_block as usize, d.queries_per_cycle),
            ),
            ItemOp::StdpValue {
                tile,
                row_block,
                chunk,
                ..
            } => (
                Self::span(n, row_block as usize, d.rows_per_cycle),
                Self::span(n, chunk as usize, d.gv),
                Self::span(self.head_dim, tile as usize, policy.v_tile),
            ),
            _ => (0, 0, 0),
        }
    }

    pub(crate) fn item_active_lanes(
        &self,
        item: &WorkItem,
        policy: &MappingPolicy,
        pe: &PeModuleConfig,
    ) -> u64 {
        let Ok(d) = self.derive(policy, pe) else {
            return 0;
        };
        let (a, b, c) = self.extents(item, policy, &d);
        (a * b * c) as u64
    }

    pub(crate) fn item_traffic(
        &self,
        item: &WorkItem,
        policy: &MappingPolicy,
        pe: &PeModuleConfig,
        reload: bool,
    ) -> ItemTraffic {
        let Ok(d) = self.derive(policy, pe) else {
            return ItemTraffic::default();
        };
        let (a, b, c) = self.extents(item, policy, &d);
        let (a, b, c) = (a as u64, b as u64, c as u64);
        match item.op {
            ItemOp::StdpScore { .. } => ItemTraffic {
                weights: reload.then_some((BankId::LI, a * b)),
                inputs: Some((BankId::LI, c * b)),
                outputs: Some((BankId::LW, a * c * 8)),
            },
            _ => ItemTraffic {
                weights: reload.then_some((BankId::LW, a * b * 8)),
                inputs: Some((BankId::SI, b * c)),
                outputs: item.last_chunk.then_some((BankId::OUT, a * c)),
            },
        }
    }

    /// Buffers that must be resident while `item` runs.
    pub(crate) fn item_buffers(
        &self,
        item: &WorkItem,
        policy: &MappingPolicy,
    ) -> Vec<(BufferTag, BankId, u64)> {
        let n = self.tokens as u64;
        match item.op {
            ItemOp::StdpScore { t, head, .. } => {
                vec![((1, t as u32, head as u32, 0), BankId::LW, n * n * 8)]
            }
            ItemOp::StdpValue { t, head, tile, .. } => {
                let cols = Self::span(self.head_dim, tile as usize, policy.v_tile) as u64;
                vec![
                    ((1, t as u32, head as u32, 0), BankId::LW, n * n * 8),
                    ((2, t as u32, head as u32, tile), BankId::SI, cols * n),
                ]
            }
            _ => Vec::new(),
        }
    }
}

/// Schedules a spiking self-attention layer.
pub fn schedule_stdp(
    layer: &LayerSpec,
    policy: &MappingPolicy,
    pe: &PeModuleConfig,
) -> Result<Schedule> {
    let bound = StdpLayer::from_spec(layer)?;
    Schedule::build(
        ScheduledLayer::Stdp(bound),
        policy,
        pe,
        layer.tflif.as_ref().map(|t| Activation {
            requant_shift: layer.requant_shift,
            tflif: t.clone(),
        }),
    )
}

pub(crate) struct StdpKernel<'a> {
    layer: &'a StdpLayer,
    policy: MappingPolicy,
    d: Derived,
    acc_bits: u32,
    lanes: usize,
    q: &'a SpikeTensor,
    k: &'a SpikeTensor,
    v: &'a SpikeTensor,
    scores: Vec<i8>,
    partial: Vec<i64>,
    raw: AccumTensor,
}

impl<'a> StdpKernel<'a> {
    pub(crate) fn new(
        layer: &'a StdpLayer,
        policy: &MappingPolicy,
        pe: &PeModuleConfig,
        q: &'a SpikeTensor,
        k: &'a SpikeTensor,
        v: &'a SpikeTensor,
    ) -> Result<Self> {
        let shape = [policy.timesteps, layer.heads, layer.tokens, layer.head_dim];
        for (name, x) in [("Q", q), ("K", k), ("V", v)] {
            if x.shape() != shape {
                return Err(Error::Shape(format!(
                    "STDP {name} {:?}, expected {shape:?}",
                    x.shape()
                )));
            }
        }
        let d = layer.derive(policy, pe)?;
        Ok(Self {
            layer,
            policy: *policy,
            d,
            acc_bits: pe.accumulator_width,
            lanes: pe.pes_per_unit,
            q,
            k,
            v,
            scores: vec![0; layer.tokens * layer.tokens],
            partial: vec![0; d.rows_per_cycle * pe.pes_per_unit],
            raw: AccumTensor::zeros(&shape),
        })
    }

    fn offset(&self, t: u16, h: u16, row: usize, col: usize) -> usize {
        ((t as usize * self.layer.heads + h as usize) * self.layer.tokens + row)
            * self.layer.head_dim
            + col
    }
}

impl super::exec::Kernel for StdpKernel<'_> {
    fn expand(&mut self, item: &WorkItem, units: &mut [UnitInput]) -> Result<()> {
        let n = self.layer.tokens;
        let dh = self.layer.head_dim;
        let d = self.d;
        match item.op {
            ItemOp::StdpScore {
                t,
                head,
                query_block,
                key_block,
            } => {
                for j in 0..d.keys_per_cycle {
                    let key = key_block as usize * d.keys_per_cycle + j;
                    if key >= n {
                        break;
                    }
                    for f in 0..dh {
                        let unit = &mut units[j * d.gs + f];
                        unit.weight = self.k.bit(self.offset(t, head, key, f)) as i8;
                        for lane in 0..d.queries_per_cycle {
                            let qi = query_block as usize * d.queries_per_cycle + lane;
                            if qi >= n {
                                break;
                            }
                            unit.roles[lane] = LaneRole::Query(lane as u8);
                            if self.q.bit(self.offset(t, head, qi, f)) {
                                unit.spikes |= 1 << lane;
                            }
                        }
                    }
                }
            }
            ItemOp::StdpValue {
                t,
                head,
                tile,
                row_block,
                chunk,
            } => {
                for r in 0..d.rows_per_cycle {
                    let i = row_block as usize * d.rows_per_cycle + r;
                    if i >= n {
                        break;
                    }
                    for jj in 0..d.gv {
                        let j = chunk as usize * d.gv + jj;
                        if j >= n {
                            break;
                        }
                        let unit = &mut units[r * d.gv + jj];
                        unit.weight = self.scores[i * n + j];
                        for lane in 0..self.policy.v_tile {
                            let col = tile as usize * self.policy.v_tile + lane;
                            if col >= dh {
                                break;
                            }
                            unit.roles[lane] = LaneRole::Column(lane as u8);
                            if self.v.bit(self.offset(t, head, j, col)) {
                                unit.spikes |= 1 << lane;
                            }
                        }
                    }
                }
            }
            _ => {
                return Err(Error::Scheduling(
                    "non-STDP item in an STDP schedule".into(),
                ))
            }
        }
        Ok(())
    }

    fn retire(&mut self, item: &WorkItem, reduced: &[i32]) -> Result<()> {
        let n = self.layer.tokens;
        let dh = self.layer.head_dim;
        let d = self.d;
        let lanes = self.lanes;
        match item.op {
            ItemOp::StdpScore {
                query_block,
                key_block,
                ..
            } => {
                for j in 0..d.keys_per_cycle {
                    let key = key_block as usize * d.keys_per_cycle + j;
                    if key >= n {
                        break;
                    }
                    for lane in 0..d.queries_per_cycle {
                        let qi = query_block as usize * d.queries_per_cycle + lane;
                        if qi >= n {
                            break;
                        }
                        self.scores[qi * n + key] =
                            requantize_to_8bit(reduced[j * lanes + lane], 0);
                    }
                }
            }
            ItemOp::StdpValue {
                t,
                head,
                tile,
                row_block,
                ..
            } => {
                for (p, r) in self.partial.iter_mut().zip(reduced) {
                    *p = super::fit_partial(*p + *r as i64, self.acc_bits, "STDP split partial")?;
                }
                if item.last_chunk {
                    for r in 0..d.rows_per_cycle {
                        let i = row_block as usize * d.rows_per_cycle + r;
                        if i >= n {
                            break;
                        }
                        for lane in 0..self.policy.v_tile {
                            let col = tile as usize * self.policy.v_tile + lane;
                            if col >= dh {
                                break;
                            }
                            let at = self.offset(t, head, i, col);
                            self.raw.data_mut()[at] = self.partial[r * lanes + lane] as i32;
                        }
                    }
                    self.partial.iter_mut().for_each(|p| *p = 0);
                }
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    fn finish(self: Box<Self>) -> AccumTensor {
        self.raw
    }
}
