// SPDX-License-Identifier: Apache-2.0

//! End-to-end runs over a whole network.
//!
//! [`run`] supports three modes. `functional` executes every layer with data
//! through the scheduled PE model, feeding each layer the simulator's own
//! outputs, and compares accumulators and spikes with the golden model.
//! `cycle` walks every scheduled item without data, which gives exact memory
//! traffic. `shape-only` uses the closed-form plans and scales to the full
//! model in milliseconds.

pub mod metrics;
pub mod report;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use log::{debug, info};

pub use metrics::{
    compare_distribution, efficiency_metrics, DistributionComparison, EfficiencyMetrics,
    PhaseDistribution,
};
pub use report::{CycleReport, Fps, LayerEntry, PhaseEntry, RunMode, Verdict};

use report::{gsops, lane_share, phase_entries, PhaseTotals, TIMING_BASIS};

use crate::dataflow::{execute, plan_layer, schedule_layer, ExecInputs, MappingPolicy, Phase};
use crate::error::{Error, Result};
use crate::golden::network::{
    class_from_logits, run_network_reference, Geometry, LayerKind, LayerSpec, NetworkConfig,
    NetworkSpec, NetworkTrace, NetworkWeights, TOKENS,
};
use crate::golden::ops::{iand_residual, merge_heads, split_heads, sum_tokens, to_tokens};
use crate::memory::{configure_banks, footprint_report, MemoryMap};
use crate::pe::{PeModule, PeModuleConfig};
use crate::tensor::{AccumTensor, ByteImage, SpikeTensor};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: RunMode,
    pub seed: u64,
    pub clock_mhz: u64,
    /// Only used for efficiency arithmetic.
    pub area_mm2: Option<f64>,
    pub power_mw: Option<f64>,
    pub spec_path: Option<PathBuf>,
    pub image_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
    pub policy: MappingPolicy,
    pub pe: PeModuleConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: RunMode::ShapeOnly,
            seed: 0,
            clock_mhz: 500,
            area_mm2: None,
            power_mw: None,
            spec_path: None,
            image_path: None,
            report_path: None,
            policy: MappingPolicy::default(),
            pe: PeModuleConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn new(mode: RunMode, seed: u64) -> Self {
        Self {
            mode,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self, image: Option<&ByteImage>) -> Result<()> {
        if self.clock_mhz == 0 {
            return Err(Error::Argument("clock must be positive".into()));
        }
        if self.mode == RunMode::Functional && image.is_none() {
            return Err(Error::Argument(
                "functional mode needs an input image".into(),
            ));
        }
        self.pe.validate()?;
        self.policy.validate(&self.pe)
    }
}

/// Reads and validates a JSON network file, reporting the offending field path on schema errors.
pub fn load_network_spec(path: impl AsRef<Path>) -> Result<NetworkSpec> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_network_spec(&text)
}

pub fn parse_network_spec(text: &str) -> Result<NetworkSpec> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: NetworkConfig =
        serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    NetworkSpec::from_config(&cfg)
}

struct Accumulated {
    phases: [PhaseTotals; 4],
    stalls: u64,
    firing: Option<u64>,
    layers: Vec<LayerEntry>,
}

impl Accumulated {
    fn new(data: bool) -> Self {
        Self {
            phases: Default::default(),
            stalls: 0,
            firing: data.then_some(0),
            layers: Vec::new(),
        }
    }

    fn add(&mut self, phase: Phase, cycles: u64, active: u64, idle: u64) {
        let t = &mut self.phases[Phase::ALL.iter().position(|&p| p == phase).unwrap()];
        t.cycles += cycles;
        t.active += active;
        t.idle += idle;
    }
}

/// Runs `spec` in the configured mode and builds the report.
///
/// Weights are synthetic, drawn from `cfg.seed`. A functional run stops at
/// the first layer that differs from the golden model; the report then
/// carries a `FAIL` verdict naming it.
pub fn run(spec: &NetworkSpec, cfg: &RunConfig, image: Option<&ByteImage>) -> Result<CycleReport> {
    cfg.validate(image)?;
    let mut mem = configure_banks(&spec.memory.unwrap_or_default())?;
    info!(
        "{} mode run of {} ({} layers)",
        cfg.mode.name(),
        spec.name,
        spec.layers.len()
    );
    let (acc, predicted_class, verdict) = match cfg.mode {
        RunMode::ShapeOnly => (shape_only(spec, cfg, &mut mem)?, None, Verdict::NotChecked),
        RunMode::Cycle => (walk(spec, cfg, &mut mem)?, None, Verdict::NotChecked),
        RunMode::Functional => {
            let (acc, class) = functional(spec, cfg, &mut mem, image.unwrap())?;
            let failed = acc.layers.iter().any(|l| l.verdict == Verdict::Fail);
            (
                acc,
                class,
                if failed { Verdict::Fail } else { Verdict::Pass },
            )
        }
    };

    let total: u64 = acc.phases.iter().map(|p| p.cycles).sum();
    let active: u64 = acc.phases.iter().map(|p| p.active).sum();
    let idle: u64 = acc.phases.iter().map(|p| p.idle).sum();
    let peak = efficiency_metrics(cfg.pe.total_pes() as u64, cfg.clock_mhz, None, None).peak_gsops;
    Ok(CycleReport {
        network: spec.name.clone(),
        mode: cfg.mode,
        seed: cfg.seed,
        clock_mhz: cfg.clock_mhz,
        timing_basis: TIMING_BASIS.to_string(),
        phases: phase_entries(&acc.phases),
        total_cycles: total,
        load_stall_cycles: acc.stalls,
        utilization: lane_share(active, idle),
        sops: active * metrics::SOPS_PER_LANE,
        effective_sops: acc.firing.map(|f| f * metrics::SOPS_PER_LANE),
        peak_gsops: peak,
        throughput_gsops: gsops(active, total, cfg.clock_mhz),
        effective_gsops: acc.firing.map(|f| gsops(f, total, cfg.clock_mhz)),
        fps: Fps::new(cfg.clock_mhz * 1_000_000, total),
        layers: acc.layers,
        memory: footprint_report(&mem),
        predicted_class,
        verdict,
    })
}

fn shape_only(spec: &NetworkSpec, cfg: &RunConfig, mem: &mut MemoryMap) -> Result<Accumulated> {
    let mut acc = Accumulated::new(false);
    for (i, l) in spec.layers.iter().enumerate() {
        let Some((phase, plan)) =
            plan_layer(l, &cfg.policy, &cfg.pe).map_err(|e| e.in_layer(i, &l.name))?
        else {
            acc.layers.push(residual_entry(l, Verdict::NotChecked));
            continue;
        };
        let held: Vec<_> = plan
            .bank_peaks
            .iter()
            .map(|&(bank, bits)| mem.allocate(bank, bits))
            .collect::<Result<_>>()
            .map_err(|e| e.in_layer(i, &l.name))?;
        held.into_iter().for_each(|a| mem.free(a));
        mem.split_buffer_mut().hold(plan.split_buffer_bits)?;
        mem.split_buffer_mut().release();
        for (name, proposed, naive) in &plan.comparisons {
            mem.record_comparison(name, *proposed, *naive);
        }
        acc.add(phase, plan.cycles, plan.active_lanes, plan.idle_lanes);
        acc.stalls += plan.load_stall_cycles;
        acc.layers.push(LayerEntry {
            name: l.name.clone(),
            phase: Some(phase),
            cycles: plan.cycles,
            predicted_cycles: plan.cycles,
            active_lanes: plan.active_lanes,
            verdict: Verdict::NotChecked,
            detail: None,
        });
    }
    Ok(acc)
}

fn walk(spec: &NetworkSpec, cfg: &RunConfig, mem: &mut MemoryMap) -> Result<Accumulated> {
    let mut acc = Accumulated::new(false);
    let mut pe = PeModule::new(cfg.pe)?;
    for (i, l) in spec.layers.iter().enumerate() {
        let wrap = |e: Error| e.in_layer(i, &l.name);
        let Some(sched) = schedule_layer(l, &cfg.policy, &cfg.pe).map_err(wrap)? else {
            acc.layers.push(residual_entry(l, Verdict::NotChecked));
            continue;
        };
        let (_, rep) = execute(&sched, &mut pe, mem, ExecInputs::CountersOnly).map_err(wrap)?;
        check_cycles(rep.cycles, sched.predicted_cycles).map_err(wrap)?;
        acc.add(sched.phase, rep.cycles, rep.active_lanes, rep.idle_lanes);
        acc.stalls += rep.load_stall_cycles;
        acc.layers.push(LayerEntry {
            name: l.name.clone(),
            phase: Some(sched.phase),
            cycles: rep.cycles,
            predicted_cycles: sched.predicted_cycles,
            active_lanes: rep.active_lanes,
            verdict: Verdict::NotChecked,
            detail: None,
        });
        debug!("{}: {} cycles", l.name, rep.cycles);
    }
    Ok(acc)
}

fn check_cycles(executed: u64, predicted: u64) -> Result<()> {
    if executed != predicted {
        return Err(Error::Scheduling(format!(
            "executed {executed} cycles, closed form predicts {predicted}"
        )));
    }
    Ok(())
}

fn residual_entry(l: &LayerSpec, verdict: Verdict) -> LayerEntry {
    LayerEntry {
        name: l.name.clone(),
        phase: None,
        cycles: 0,
        predicted_cycles: 0,
        active_lanes: 0,
        verdict,
        detail: None,
    }
}

fn first_difference<T: PartialEq + std::fmt::Debug>(
    what: &str,
    got: &[T],
    want: &[T],
) -> Option<String> {
    if got.len() != want.len() {
        return Some(format!(
            "{what}: {} elements, expected {}",
            got.len(),
            want.len()
        ));
    }
    got.iter().zip(want).position(|(a, b)| a != b).map(|i| {
        format!(
            "{what} differ at flat index {i}: got {:?}, expected {:?}",
            got[i], want[i]
        )
    })
}

fn compare_layer(
    trace: &NetworkTrace,
    name: &str,
    accum: Option<&AccumTensor>,
    spikes: Option<&SpikeTensor>,
) -> Option<String> {
    let Some(gold) = trace.record(name) else {
        return Some("no golden record".into());
    };
    if let (Some(a), Some(g)) = (accum, gold.accum.as_ref()) {
        if a.shape() != g.shape() {
            return Some(format!(
                "accumulator shape {:?}, expected {:?}",
                a.shape(),
                g.shape()
            ));
        }
        if let Some(d) = first_difference("accumulators", a.data(), g.data()) {
            return Some(d);
        }
    }
    if let (Some(s), Some(g)) = (spikes, gold.spikes.as_ref()) {
        if s.shape() != g.shape() {
            return Some(format!(
                "spike shape {:?}, expected {:?}",
                s.shape(),
                g.shape()
            ));
        }
        if let Some(d) = first_difference("spikes", s.words(), g.words()) {
            return Some(d);
        }
    }
    None
}

fn functional(
    spec: &NetworkSpec,
    cfg: &RunConfig,
    mem: &mut MemoryMap,
    image: &ByteImage,
) -> Result<(Accumulated, Option<usize>)> {
    let weights = NetworkWeights::synthetic(spec, cfg.seed);
    let golden = run_network_reference(spec, &weights, image)?;
    let mut acc = Accumulated::new(true);
    let mut pe = PeModule::new(cfg.pe)?;
    let mut values: HashMap<String, SpikeTensor> = HashMap::new();
    let mut logits = None;
    for (i, l) in spec.layers.iter().enumerate() {
        let wrap = |e: Error| e.in_layer(i, &l.name);
        if !values.contains_key(TOKENS)
            && !matches!(l.kind, LayerKind::Conv8bitInput | LayerKind::SpikeConv)
        {
            let tok = to_tokens(&values[&spec.layers[i - 1].name]).map_err(wrap)?;
            values.insert(TOKENS.to_string(), tok);
        }
        let input = |k: usize| -> Result<&SpikeTensor> {
            values.get(&l.inputs[k]).ok_or_else(|| {
                Error::Shape(format!("producer {} not evaluated", l.inputs[k])).in_layer(i, &l.name)
            })
        };
        let mut entry = residual_entry(l, Verdict::Pass);
        let (accum, spikes) = match l.kind {
            LayerKind::Residual => {
                let sp = iand_residual(input(0)?, input(1)?, l.residual_op.unwrap_or_default())
                    .map_err(wrap)?;
                (None, Some(sp))
            }
            _ => {
                let sched = schedule_layer(l, &cfg.policy, &cfg.pe)
                    .map_err(wrap)?
                    .unwrap();
                let w = weights.get(i);
                let missing = || Error::Shape("missing weights".into()).in_layer(i, &l.name);
                let heads = match l.geometry {
                    Geometry::Attention { heads, .. } => heads,
                    _ => 0,
                };
                let split;
                let inputs = match l.kind {
                    LayerKind::Conv8bitInput => ExecInputs::Image {
                        img: image,
                        w: w.ok_or_else(missing)?,
                    },
                    LayerKind::SpikeAttention => {
                        split = (
                            split_heads(input(0)?, heads).map_err(wrap)?,
                            split_heads(input(1)?, heads).map_err(wrap)?,
                            split_heads(input(2)?, heads).map_err(wrap)?,
                        );
                        ExecInputs::Attention {
                            q: &split.0,
                            k: &split.1,
                            v: &split.2,
                        }
                    }
                    _ => ExecInputs::Spikes {
                        x: input(0)?,
                        w: w.ok_or_else(missing)?,
                    },
                };
                let (out, rep) = execute(&sched, &mut pe, mem, inputs).map_err(wrap)?;
                check_cycles(rep.cycles, sched.predicted_cycles).map_err(wrap)?;
                acc.add(sched.phase, rep.cycles, rep.active_lanes, rep.idle_lanes);
                acc.stalls += rep.load_stall_cycles;
                if let (Some(total), Some(f)) = (acc.firing.as_mut(), rep.firing_lanes) {
                    *total += f;
                }
                entry.phase = Some(sched.phase);
                entry.cycles = rep.cycles;
                entry.predicted_cycles = sched.predicted_cycles;
                entry.active_lanes = rep.active_lanes;
                let spikes = match (l.kind, out.spikes) {
                    (LayerKind::SpikeAttention, Some(s)) => Some(merge_heads(&s).map_err(wrap)?),
                    (_, s) => s,
                };
                if l.kind == LayerKind::Head {
                    logits = Some(sum_tokens(out.accum.as_ref().unwrap()).map_err(wrap)?);
                }
                (out.accum, spikes)
            }
        };
        if let Some(detail) = compare_layer(&golden, &l.name, accum.as_ref(), spikes.as_ref()) {
            entry.verdict = Verdict::Fail;
            entry.detail = Some(detail);
            acc.layers.push(entry);
            return Ok((acc, None));
        }
        if let Some(sp) = spikes {
            values.insert(l.name.clone(), sp);
        }
        acc.layers.push(entry);
    }
    if let Some(lg) = &logits {
        if lg != &golden.logits {
            acc.layers.push(LayerEntry {
                name: "logits".into(),
                phase: None,
                cycles: 0,
                predicted_cycles: 0,
                active_lanes: 0,
                verdict: Verdict::Fail,
                detail: Some("token-summed logits differ".into()),
            });
            return Ok((acc, None));
        }
    }
    Ok((acc, logits.as_ref().map(class_from_logits)))
}
