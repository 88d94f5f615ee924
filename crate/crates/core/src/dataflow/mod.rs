// SPDX-License-Identifier: Apache-2.0

//! The four dataflows that map network layers onto the PE module.
//!
//! A [`Schedule`] is an ordered list of [`WorkItem`]s, one per PE-module
//! cycle. Items are compact descriptors; the concrete per-unit weights and
//! spike lanes are produced when the item is executed, from the layer
//! geometry and the data bound at that point. Every scheduler also exposes a
//! closed-form [`LayerPlan`] so that full-size networks can be costed without
//! materializing items.
//!
//! | phase | layer                    | lanes per unit            |
//! |-------|--------------------------|---------------------------|
//! | ZSC   | spike-input 2x2/s2 conv  | 2 pixels x 4 timesteps    |
//! | SSSC  | 8-bit-input conv         | 8 bitplanes of one pixel  |
//! | WSSL  | linear                   | 2 tokens x 4 timesteps    |
//! | STDP  | spiking self-attention   | 8 queries / 8 V columns   |

pub mod exec;
pub mod sssc;
pub mod stdp;
pub mod wssl;
pub mod zsc;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use exec::{execute, ExecInputs, ExecOutput, ExecReport};
pub use sssc::{schedule_sssc, SsscLayer};
pub use stdp::{schedule_stdp, StdpLayer};
pub use wssl::{schedule_wssl, WsslLayer};
pub use zsc::{schedule_zsc, ZscLayer};

use crate::error::{Error, Result};
use crate::golden::network::{LayerKind, LayerSpec};
use crate::golden::tflif::TflifParams;
use crate::memory::{AccessKind, BankId};
use crate::pe::{AdderTreeMode, PeModuleConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "ZSC")]
    Zsc,
    #[serde(rename = "SSSC")]
    Sssc,
    #[serde(rename = "WSSL")]
    Wssl,
    #[serde(rename = "STDP")]
    Stdp,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Zsc, Phase::Sssc, Phase::Wssl, Phase::Stdp];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Zsc => "ZSC",
            Phase::Sssc => "SSSC",
            Phase::Wssl => "WSSL",
            Phase::Stdp => "STDP",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How layers are laid onto the 512 x 8 array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingPolicy {
    /// Pixels (ZSC) or tokens (WSSL) sharing one unit's lanes.
    pub tokens_per_unit: usize,
    /// Timesteps sharing one unit's lanes; must equal the network's T.
    pub timesteps: usize,
    /// Units holding one input channel's kernel in ZSC.
    pub zsc_group: usize,
    /// V columns held per unit in the STDP value phase.
    pub v_tile: usize,
    /// Extra cycles charged whenever an item changes the stationary weights.
    /// Zero models fully overlapped weight loads.
    pub weight_load_cycles: u64,
}

impl Default for MappingPolicy {
    fn default() -> Self {
        Self {
            tokens_per_unit: 2,
            timesteps: 4,
            zsc_group: 4,
            v_tile: 8,
            weight_load_cycles: 0,
        }
    }
}

impl MappingPolicy {
    pub fn validate(&self, pe: &PeModuleConfig) -> Result<()> {
        if self.tokens_per_unit == 0 || self.timesteps == 0 {
            return Err(Error::Policy(
                "lane split needs at least one token and one timestep".into(),
            ));
        }
        if self.tokens_per_unit * self.timesteps > pe.pes_per_unit {
            return Err(Error::Policy(format!(
                "{} tokens x {} timesteps exceed {} PEs per unit",
                self.tokens_per_unit, self.timesteps, pe.pes_per_unit
            )));
        }
        if self.v_tile == 0 || self.v_tile > pe.pes_per_unit {
            return Err(Error::Policy(format!(
                "V tile of {} columns does not fit {} lanes",
                self.v_tile, pe.pes_per_unit
            )));
        }
        if self.zsc_group == 0 || !pe.num_units.is_multiple_of(self.zsc_group) {
            return Err(Error::Policy(format!(
                "ZSC group of {} units does not divide {} units",
                self.zsc_group, pe.num_units
            )));
        }
        Ok(())
    }

    pub(crate) fn check_timesteps(&self, t: usize) -> Result<()> {
        if t != self.timesteps {
            return Err(Error::Policy(format!(
                "policy packs {} timesteps per unit but the layer runs {t}",
                self.timesteps
            )));
        }
        Ok(())
    }
}

/// One PE-module cycle of a schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WorkItem {
    pub op: ItemOp,
    pub adder: AdderTreeMode,
    /// Final contribution to its destination; partial sums are released after it.
    pub last_chunk: bool,
}

impl WorkItem {
    pub fn phase(&self) -> Phase {
        match self.op {
            ItemOp::Zsc { .. } => Phase::Zsc,
            ItemOp::Sssc { .. } => Phase::Sssc,
            ItemOp::Wssl { .. } => Phase::Wssl,
            ItemOp::StdpScore { .. } | ItemOp::StdpValue { .. } => Phase::Stdp,
        }
    }
}

/// Coordinates of a cycle's work within its layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ItemOp {
    /// Output channel, output pixel pair, block of input channels.
    Zsc {
        out_channel: u32,
        pair: u32,
        in_block: u32,
    },
    /// Output channel, block of output pixels.
    Sssc { out_channel: u32, pixel_block: u32 },
    /// Output column, token pair, 512-row chunk of the weight column.
    Wssl { out_col: u32, pair: u32, chunk: u32 },
    /// Score phase: K rows stationary, Q rows on lanes.
    StdpScore {
        t: u16,
        head: u16,
        query_block: u32,
        key_block: u32,
    },
    /// Value phase: score rows stationary, one V column tile on lanes.
    StdpValue {
        t: u16,
        head: u16,
        tile: u32,
        row_block: u32,
        chunk: u32,
    },
}

impl ItemOp {
    /// Identifies the stationary weight set, to detect reloads.
    pub fn weight_key(&self) -> (u8, u32, u32, u32) {
        match *self {
            ItemOp::Zsc {
                out_channel,
                in_block,
                ..
            } => (0, out_channel, in_block, 0),
            ItemOp::Sssc { out_channel, .. } => (1, out_channel, 0, 0),
            ItemOp::Wssl { out_col, chunk, .. } => (2, out_col, chunk, 0),
            ItemOp::StdpScore {
                t, head, key_block, ..
            } => (3, t as u32 * 65536 + head as u32, key_block, 0),
            ItemOp::StdpValue {
                t,
                head,
                row_block,
                chunk,
                ..
            } => (4, t as u32 * 65536 + head as u32, row_block, chunk),
        }
    }
}

impl fmt::Display for ItemOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ItemOp::Zsc {
                out_channel,
                pair,
                in_block,
            } => {
                write!(f, "co={out_channel} pair={pair} cin_block={in_block}")
            }
            ItemOp::Sssc {
                out_channel,
                pixel_block,
            } => write!(f, "co={out_channel} pixel_block={pixel_block}"),
            ItemOp::Wssl {
                out_col,
                pair,
                chunk,
            } => write!(f, "col={out_col} pair={pair} chunk={chunk}"),
            ItemOp::StdpScore {
                t,
                head,
                query_block,
                key_block,
            } => write!(
                f,
                "score t={t} head={head} qblock={query_block} kblock={key_block}"
            ),
            ItemOp::StdpValue {
                t,
                head,
                tile,
                row_block,
                chunk,
            } => write!(
                f,
                "value t={t} head={head} tile={tile} rblock={row_block} chunk={chunk}"
            ),
        }
    }
}

/// Bank traffic of one item: reads of weights and inputs, writes of outputs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ItemTraffic {
    pub weights: Option<(BankId, u64)>,
    pub inputs: Option<(BankId, u64)>,
    pub outputs: Option<(BankId, u64)>,
}

impl ItemTraffic {
    pub fn accesses(&self) -> impl Iterator<Item = (BankId, AccessKind, u64)> {
        let reads = [self.weights, self.inputs]
            .into_iter()
            .flatten()
            .map(|(b, n)| (b, AccessKind::Read, n));
        reads.chain(self.outputs.map(|(b, n)| (b, AccessKind::Write, n)))
    }
}

/// Identifies a resident buffer across consecutive items.
pub type BufferTag = (u8, u32, u32, u32);

/// Closed-form costing of one layer under a dataflow.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LayerPlan {
    pub cycles: u64,
    pub active_lanes: u64,
    pub idle_lanes: u64,
    /// Number of items that change the stationary weights.
    pub weight_loads: u64,
    pub load_stall_cycles: u64,
    pub split_buffer_bits: u64,
    /// Peak simultaneous allocation per bank.
    pub bank_peaks: Vec<(BankId, u64)>,
    pub output_write_bits: u64,
    /// `(name, proposed_bits, naive_bits)` buffer comparisons.
    pub comparisons: Vec<(String, u64, u64)>,
}

impl LayerPlan {
    pub fn utilization(&self) -> f64 {
        let total = self.active_lanes + self.idle_lanes;
        if total == 0 {
            0.0
        } else {
            self.active_lanes as f64 / total as f64
        }
    }
}

/// Requantization and TFLIF applied to a layer's accumulators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Activation {
    pub requant_shift: u32,
    pub tflif: TflifParams,
}

/// Layer geometry bound to its dataflow.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScheduledLayer {
    Zsc(ZscLayer),
    Sssc(SsscLayer),
    Wssl(WsslLayer),
    Stdp(StdpLayer),
}

impl ScheduledLayer {
    pub fn phase(&self) -> Phase {
        match self {
            ScheduledLayer::Zsc(_) => Phase::Zsc,
            ScheduledLayer::Sssc(_) => Phase::Sssc,
            ScheduledLayer::Wssl(_) => Phase::Wssl,
            ScheduledLayer::Stdp(_) => Phase::Stdp,
        }
    }

    pub fn plan(&self, policy: &MappingPolicy, pe: &PeModuleConfig) -> Result<LayerPlan> {
        let mut plan = match self {
            ScheduledLayer::Zsc(l) => l.plan(policy, pe)?,
            ScheduledLayer::Sssc(l) => l.plan(policy, pe)?,
            ScheduledLayer::Wssl(l) => l.plan(policy, pe)?,
            ScheduledLayer::Stdp(l) => l.plan(policy, pe)?,
        };
        plan.idle_lanes = plan.cycles * pe.total_pes() as u64 - plan.active_lanes;
        plan.load_stall_cycles = plan.weight_loads * policy.weight_load_cycles;
        Ok(plan)
    }

    fn items(&self, policy: &MappingPolicy, pe: &PeModuleConfig) -> Result<Vec<WorkItem>> {
        match self {
            ScheduledLayer::Zsc(l) => l.items(policy, pe),
            ScheduledLayer::Sssc(l) => l.items(policy, pe),
            ScheduledLayer::Wssl(l) => l.items(policy, pe),
            ScheduledLayer::Stdp(l) => l.items(policy, pe),
        }
    }

    /// SRAM traffic of one item; `reload` marks a change of stationary weights.
    pub fn item_traffic(
        &self,
        item: &WorkItem,
        policy: &MappingPolicy,
        pe: &PeModuleConfig,
        reload: bool,
    ) -> ItemTraffic {
        match self {
            ScheduledLayer::Zsc(l) => l.item_traffic(item, policy, pe, reload),
            ScheduledLayer::Sssc(l) => l.item_traffic(item, policy, pe, reload),
            ScheduledLayer::Wssl(l) => l.item_traffic(item, policy, pe, reload),
            ScheduledLayer::Stdp(l) => l.item_traffic(item, policy, pe, reload),
        }
    }

    /// Buffers that must be resident while `item` runs, keyed by tag.
    pub fn item_buffers(
        &self,
        item: &WorkItem,
        policy: &MappingPolicy,
        plan: &LayerPlan,
    ) -> Vec<(BufferTag, BankId, u64)> {
        match self {
            ScheduledLayer::Stdp(l) => l.item_buffers(item, policy),
            // weight working set, resident for the whole layer
            _ => plan
                .bank_peaks
                .iter()
                .map(|&(bank, bits)| ((0, 0, 0, 0), bank, bits))
                .collect(),
        }
    }

    /// Active lanes of one item, computed from geometry alone.
    pub fn item_active_lanes(
        &self,
        item: &WorkItem,
        policy: &MappingPolicy,
        pe: &PeModuleConfig,
    ) -> u64 {
        match self {
            ScheduledLayer::Zsc(l) => l.item_active_lanes(item, policy, pe),
            ScheduledLayer::Sssc(l) => l.item_active_lanes(item, policy, pe),
            ScheduledLayer::Wssl(l) => l.item_active_lanes(item, policy, pe),
            ScheduledLayer::Stdp(l) => l.item_active_lanes(item, policy, pe),
        }
    }
}

/// A layer's cycle-by-cycle program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub phase: Phase,
    pub layer: ScheduledLayer,
    pub policy: MappingPolicy,
    pub pe: PeModuleConfig,
    pub activation: Option<Activation>,
    pub items: Vec<WorkItem>,
    pub predicted_cycles: u64,
    pub plan: LayerPlan,
}

impl Schedule {
    pub(crate) fn build(
        layer: ScheduledLayer,
        policy: &MappingPolicy,
        pe: &PeModuleConfig,
        activation: Option<Activation>,
    ) -> Result<Self> {
        pe.validate()?;
        policy.validate(pe)?;
        if let Some(a) = &activation {
            policy.check_timesteps(a.tflif.timesteps)?;
        }
        let plan = layer.plan(policy, pe)?;
        let items = layer.items(policy, pe)?;
        Ok(Self {
            phase: layer.phase(),
            layer,
            policy: *policy,
            pe: *pe,
            activation,
            predicted_cycles: plan.cycles,
            items,
            plan,
        })
    }

    /// Line-delimited dump: phase, cycle index, active lanes, destination.
    pub fn dump(&self, mut w: impl Write) -> Result<()> {
        for (i, item) in self.items.iter().enumerate() {
            writeln!(
                w,
                "phase={} cycle={} active_lanes={} dest={}{}",
                item.phase(),
                i,
                self.layer.item_active_lanes(item, &self.policy, &self.pe),
                item.op,
                if item.last_chunk { " last" } else { "" }
            )?;
        }
        Ok(())
    }
}

/// Picks the dataflow for a layer. Residual layers have no PE work.
pub fn schedule_layer(
    layer: &LayerSpec,
    policy: &MappingPolicy,
    pe: &PeModuleConfig,
) -> Result<Option<Schedule>> {
    Ok(Some(match layer.kind {
        LayerKind::Conv8bitInput => schedule_sssc(layer, policy, pe)?,
        LayerKind::SpikeConv => schedule_zsc(layer, policy, pe)?,
        LayerKind::SpikeLinear | LayerKind::Head => schedule_wssl(layer, policy, pe)?,
        LayerKind::SpikeAttention => schedule_stdp(layer, policy, pe)?,
        LayerKind::Residual => return Ok(None),
    }))
}

/// Closed-form plan for a layer without materializing its items.
pub fn plan_layer(
    layer: &LayerSpec,
    policy: &MappingPolicy,
    pe: &PeModuleConfig,
) -> Result<Option<(Phase, LayerPlan)>> {
    pe.validate()?;
    policy.validate(pe)?;
    let bound = match layer.kind {
        LayerKind::Conv8bitInput => ScheduledLayer::Sssc(SsscLayer::from_spec(layer)?),
        LayerKind::SpikeConv => ScheduledLayer::Zsc(ZscLayer::from_spec(layer)?),
        LayerKind::SpikeLinear | LayerKind::Head => {
            ScheduledLayer::Wssl(WsslLayer::from_spec(layer)?)
        }
        LayerKind::SpikeAttention => ScheduledLayer::Stdp(StdpLayer::from_spec(layer)?),
        LayerKind::Residual => return Ok(None),
    };
    Ok(Some((bound.phase(), bound.plan(policy, pe)?)))
}

/// Checks a split-register partial sum against the accumulator width.
pub(crate) fn fit_partial(value: i64, bits: u32, context: &str) -> Result<i64> {
    let bound = 1i64 << (bits - 1);
    if value < -bound || value >= bound {
        return Err(Error::Width {
            value,
            bits,
            context: context.to_string(),
        });
    }
    Ok(value)
}

/// `ceil(a / b)` for cycle arithmetic.
pub(crate) fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}
