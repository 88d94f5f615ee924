// SPDX-License-Identifier: Apache-2.0

//! Runs a [`Schedule`] on the PE module and the memory model.

use std::collections::HashMap;

use serde::Serialize;

use super::{BufferTag, Phase, Schedule, ScheduledLayer, WorkItem};
use crate::error::{Error, Result};
use crate::golden::ops::{apply_tflif, ssa_activation};
use crate::memory::{Allocation, MemoryMap};
use crate::pe::{PeModule, UnitInput};
use crate::tensor::{AccumTensor, ByteImage, SpikeTensor, WeightMatrix};

/// Data bound to a schedule at execution time.
#[derive(Clone, Copy, Debug)]
pub enum ExecInputs<'a> {
    /// Spike input `[T, C, H, W]` or `[T, N, D]` with its weights.
    Spikes {
        x: &'a SpikeTensor,
        w: &'a WeightMatrix,
    },
    /// The 8-bit input image `[C, H, W]` with first-layer weights.
    Image {
        img: &'a ByteImage,
        w: &'a WeightMatrix,
    },
    /// Per-head operands, each `[T, heads, N, d_h]`.
    Attention {
        q: &'a SpikeTensor,
        k: &'a SpikeTensor,
        v: &'a SpikeTensor,
    },
    /// Walk the schedule for counters and memory traffic only.
    CountersOnly,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExecOutput {
    /// Pre-requantization accumulators, in the layout of the reference op.
    pub accum: Option<AccumTensor>,
    /// Output spikes when the layer has an activation.
    pub spikes: Option<SpikeTensor>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExecReport {
    pub phase: Phase,
    pub cycles: u64,
    pub load_stall_cycles: u64,
    pub weight_loads: u64,
    pub active_lanes: u64,
    pub idle_lanes: u64,
    /// Lanes whose spike was 1; only known when data is bound.
    pub firing_lanes: Option<u64>,
}

impl ExecReport {
    pub fn empty(phase: Phase) -> Self {
        Self {
            phase,
            cycles: 0,
            load_stall_cycles: 0,
            weight_loads: 0,
            active_lanes: 0,
            idle_lanes: 0,
            firing_lanes: None,
        }
    }

    pub fn total_cycles(&self) -> u64 {
        self.cycles + self.load_stall_cycles
    }
}

/// Per-dataflow data path: fills unit inputs and routes reduced sums.
pub(crate) trait Kernel {
    fn expand(&mut self, item: &WorkItem, units: &mut [UnitInput]) -> Result<()>;
    fn retire(&mut self, item: &WorkItem, reduced: &[i32]) -> Result<()>;
    fn finish(self: Box<Self>) -> AccumTensor;
}

fn bind<'a>(s: &'a Schedule, inputs: ExecInputs<'a>) -> Result<Option<Box<dyn Kernel + 'a>>> {
    let (p, pe) = (&s.policy, &s.pe);
    let t_in = match inputs {
        ExecInputs::Spikes { x, .. } => Some(x.timesteps()),
        ExecInputs::Attention { q, .. } => Some(q.timesteps()),
        _ => None,
    };
    if let Some(t) = t_in {
        p.check_timesteps(t)?;
    }
    let kernel: Box<dyn Kernel + 'a> = match (&s.layer, inputs) {
        (_, ExecInputs::CountersOnly) => return Ok(None),
        (ScheduledLayer::Zsc(l), ExecInputs::Spikes { x, w }) => {
            Box::new(super::zsc::ZscKernel::new(l, p, pe, x, w)?)
        }
        (ScheduledLayer::Wssl(l), ExecInputs::Spikes { x, w }) => {
            Box::new(super::wssl::WsslKernel::new(l, p, pe, x, w)?)
        }
        (ScheduledLayer::Sssc(l), ExecInputs::Image { img, w }) => {
            Box::new(super::sssc::SsscKernel::new(l, p, pe, img, w)?)
        }
        (ScheduledLayer::Stdp(l), ExecInputs::Attention { q, k, v }) => {
            Box::new(super::stdp::StdpKernel::new(l, p, pe, q, k, v)?)
        }
        (layer, _) => {
            return Err(Error::Argument(format!(
                "inputs do not match a {} schedule",
                layer.phase()
            )))
        }
    };
    Ok(Some(kernel))
}

/// Executes every item of `schedule` in order.
///
/// With data bound, each item is expanded into unit inputs, run through the
/// PE module and retired into the output accumulators; the layer activation
/// is then applied. With [`ExecInputs::CountersOnly`] the same items are
/// walked using geometry alone. Memory traffic, resident buffers and the
/// split register are tracked identically in both modes.
pub fn execute(
    schedule: &Schedule,
    pe: &mut PeModule,
    mem: &mut MemoryMap,
    inputs: ExecInputs<'_>,
) -> Result<(ExecOutput, ExecReport)> {
    if *pe.config() != schedule.pe {
        return Err(Error::Argument(
            "PE module configuration differs from the schedule's".into(),
        ));
    }
    let mut kernel = bind(schedule, inputs)?;
    let policy = &schedule.policy;
    let cfg = schedule.pe;
    for (name, proposed, naive) in &schedule.plan.comparisons {
        mem.record_comparison(name, *proposed, *naive);
    }

    let mut report = ExecReport::empty(schedule.phase);
    let mut resident: HashMap<BufferTag, Allocation> = HashMap::new();
    let mut units = vec![UnitInput::default(); cfg.num_units];
    let mut prev_key = None;
    let start = pe.counters();

    for item in &schedule.items {
        let wanted = schedule.layer.item_buffers(item, policy, &schedule.plan);
        resident.retain(|tag, a| {
            let keep = wanted.iter().any(|(t, _, _)| t == tag);
            if !keep {
                mem.free(*a);
            }
            keep
        });
        for (tag, bank, bits) in wanted {
            if let std::collections::hash_map::Entry::Vacant(e) = resident.entry(tag) {
                let a = mem.allocate(bank, bits)?;
                if tag.0 == 2 {
                    // a V tile is staged into SI when it becomes resident
                    mem.access(bank, crate::memory::AccessKind::Write, bits);
                }
                e.insert(a);
            }
        }

        let key = item.op.weight_key();
        let reload = prev_key != Some(key);
        prev_key = Some(key);
        if reload {
            report.weight_loads += 1;
        }
        for (bank, kind, bits) in schedule
            .layer
            .item_traffic(item, policy, &cfg, reload)
            .accesses()
        {
            mem.access(bank, kind, bits);
        }

        if item.last_chunk {
            mem.split_buffer_mut().release();
        } else {
            mem.split_buffer_mut()
                .hold(schedule.plan.split_buffer_bits)?;
        }

        match kernel.as_mut() {
            Some(k) => {
                units.fill(UnitInput::default());
                k.expand(item, &mut units)?;
                let reduced = pe.cycle(&units, item.adder)?;
                k.retire(item, &reduced)?;
            }
            None => {
                let active = schedule.layer.item_active_lanes(item, policy, &cfg);
                report.active_lanes += active;
                report.idle_lanes += cfg.total_pes() as u64 - active;
            }
        }
        report.cycles += 1;
    }
    for (_, a) in resident.drain() {
        mem.free(a);
    }
    mem.split_buffer_mut().release();
    report.load_stall_cycles = report.weight_loads * policy.weight_load_cycles;

    let Some(kernel) = kernel else {
        return Ok((ExecOutput::default(), report));
    };
    let end = pe.counters();
    report.active_lanes = end.active_lanes - start.active_lanes;
    report.idle_lanes = end.idle_lanes - start.idle_lanes;
    report.firing_lanes = Some(end.firing_lanes - start.firing_lanes);

    let accum = kernel.finish();
    let spikes = match &schedule.activation {
        None => None,
        Some(a) => Some(match schedule.phase {
            Phase::Stdp => ssa_activation(&accum, a.requant_shift, &a.tflif)?,
            Phase::Wssl => apply_tflif(&accum, a.requant_shift, &a.tflif, 2)?,
            Phase::Zsc | Phase::Sssc => apply_tflif(&accum, a.requant_shift, &a.tflif, 1)?,
        }),
    };
    Ok((
        ExecOutput {
            accum: Some(accum),
            spikes,
        },
        report,
    ))
}
