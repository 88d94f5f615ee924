// SPDX-License-Identifier: Apache-2.0

//! Behavioral model of the PE module: 512 units of 8 mux-based PEs, the adder
//! tree behind them, and requantization of accumulators to 8 bits.
//!
//! Every PE sees one shared signed 8-bit weight and one spike bit, so the only
//! "multiply" in the fabric is a select: [`pe_mux_multiply`].

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeModuleConfig {
    pub num_units: usize,
    pub pes_per_unit: usize,
    /// Width of adder-tree partial sums. 24 bits = the 192-bit split buffer over 8 lanes.
    pub accumulator_width: u32,
    pub requant_width: u32,
}

impl Default for PeModuleConfig {
    fn default() -> Self {
        Self {
            num_units: 512,
            pes_per_unit: 8,
            accumulator_width: 24,
            requant_width: 8,
        }
    }
}

impl PeModuleConfig {
    pub fn total_pes(&self) -> usize {
        self.num_units * self.pes_per_unit
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_units == 0 || self.pes_per_unit == 0 {
            return Err(Error::Argument(
                "PE module needs at least one unit and one PE".into(),
            ));
        }
        if self.pes_per_unit > MAX_LANES {
            return Err(Error::Argument(format!(
                "at most {MAX_LANES} PEs per unit are modeled, got {}",
                self.pes_per_unit
            )));
        }
        if self.accumulator_width == 0 || self.accumulator_width > 32 {
            return Err(Error::Argument(format!(
                "accumulator width {} outside 1..=32",
                self.accumulator_width
            )));
        }
        if self.requant_width != 8 {
            return Err(Error::Argument(format!(
                "requantization width {} unsupported, TFLIF consumes 8-bit values",
                self.requant_width
            )));
        }
        Ok(())
    }

    /// Bits held by one unit's worth of partial sums (8 lanes x 24 bits by default).
    pub fn partial_buffer_bits(&self) -> u64 {
        self.pes_per_unit as u64 * self.accumulator_width as u64
    }
}

pub const MAX_LANES: usize = 8;

/// The PE multiply: a 2:1 mux between the weight and zero.
#[inline]
pub fn pe_mux_multiply(w: i8, s: bool) -> i8 {
    if s {
        w
    } else {
        0
    }
}

/// What a PE lane is computing, used for routing and for trace dumps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum LaneRole {
    #[default]
    Idle,
    /// One of `slot` pixels/tokens at timestep `t`.
    Step { slot: u8, t: u8 },
    /// Bit `b` of an 8-bit input.
    Bitplane(u8),
    /// Query row within the current block (score phase).
    Query(u8),
    /// Output column within the current V tile.
    Column(u8),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UnitInput {
    pub weight: i8,
    /// Spike for lane `i` is bit `i`.
    pub spikes: u8,
    pub roles: [LaneRole; MAX_LANES],
}

impl UnitInput {
    pub fn active_mask(&self) -> u8 {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r != LaneRole::Idle)
            .fold(0u8, |m, (i, _)| m | (1 << i))
    }

    pub fn is_idle(&self) -> bool {
        self.roles.iter().all(|r| *r == LaneRole::Idle)
    }
}

/// One cycle of a unit: every lane selects the shared weight or zero.
pub fn unit_cycle(input: &UnitInput) -> [i8; MAX_LANES] {
    std::array::from_fn(|i| pe_mux_multiply(input.weight, (input.spikes >> i) & 1 == 1))
}

/// Shifts each lane product by its bitplane index and sums.
///
/// With lanes carrying the bitplanes of one unsigned byte `x` and a shared
/// weight `w`, the result is exactly `w * x`.
pub fn shift_sum_within_unit(lane_products: &[i8], bitplanes: &[u8]) -> Result<i32> {
    if lane_products.len() != bitplanes.len() {
        return Err(Error::Mapping(format!(
            "{} lane products for {} bitplane tags",
            lane_products.len(),
            bitplanes.len()
        )));
    }
    let mut seen = 0u8;
    let mut sum = 0i32;
    for (&p, &b) in lane_products.iter().zip(bitplanes) {
        if b > 7 {
            return Err(Error::Mapping(format!("bitplane tag {b} outside 0..=7")));
        }
        if seen & (1 << b) != 0 {
            return Err(Error::Mapping(format!("duplicate bitplane tag {b}")));
        }
        seen |= 1 << b;
        sum += (p as i32) << b;
    }
    Ok(sum)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum AdderTreeMode {
    /// Sum each lane over consecutive groups of `group` units; lanes stay separate.
    SumAcrossUnits {
        group: usize,
    },
    /// Shift-sum each unit's bitplane lanes, then sum consecutive groups of `group` units.
    /// Units past the last full group are left unused.
    ShiftSumWithinUnit {
        group: usize,
    },
    PassThrough,
}

impl AdderTreeMode {
    pub fn validate(&self, cfg: &PeModuleConfig) -> Result<()> {
        match *self {
            AdderTreeMode::SumAcrossUnits { group } => {
                if group == 0 || !cfg.num_units.is_multiple_of(group) {
                    return Err(Error::Mapping(format!(
                        "group size {group} does not divide {} units",
                        cfg.num_units
                    )));
                }
            }
            AdderTreeMode::ShiftSumWithinUnit { group } => {
                if group == 0 || group > cfg.num_units {
                    return Err(Error::Mapping(format!(
                        "shift-sum group of {group} units does not fit {} units",
                        cfg.num_units
                    )));
                }
            }
            AdderTreeMode::PassThrough => {}
        }
        Ok(())
    }

    /// Number of reduced values produced per group (or per unit for pass-through).
    pub fn outputs_per_group(&self, cfg: &PeModuleConfig) -> usize {
        match self {
            AdderTreeMode::ShiftSumWithinUnit { .. } => 1,
            _ => cfg.pes_per_unit,
        }
    }
}

fn check_width(value: i64, bits: u32, context: impl FnOnce() -> String) -> Result<i32> {
    let lo = -(1i64 << (bits - 1));
    let hi = (1i64 << (bits - 1)) - 1;
    if value < lo || value > hi {
        return Err(Error::Width {
            value,
            bits,
            context: context(),
        });
    }
    Ok(value as i32)
}

/// Reduces per-unit lane products according to `mode`.
///
/// `SumAcrossUnits` returns `groups * pes_per_unit` sums laid out group-major.
/// `ShiftSumWithinUnit` returns one sum per full group; lane roles of every
/// active unit must be a permutation of bitplanes.
/// `PassThrough` widens the products unchanged, unit-major.
pub fn adder_tree_reduce(
    units: &[UnitInput],
    products: &[[i8; MAX_LANES]],
    mode: AdderTreeMode,
    cfg: &PeModuleConfig,
) -> Result<Vec<i32>> {
    mode.validate(cfg)?;
    if units.len() != cfg.num_units || products.len() != cfg.num_units {
        return Err(Error::Mapping(format!(
            "adder tree expects {} units, got {} inputs and {} product rows",
            cfg.num_units,
            units.len(),
            products.len()
        )));
    }
    let lanes = cfg.pes_per_unit;
    let width = cfg.accumulator_width;
    match mode {
        AdderTreeMode::SumAcrossUnits { group } => {
            let mut out = Vec::with_capacity(cfg.num_units / group * lanes);
            for (g, chunk) in products.chunks(group).enumerate() {
                for lane in 0..lanes {
                    let s: i64 = chunk.iter().map(|p| p[lane] as i64).sum();
                    out.push(check_width(s, width, || format!("group {g} lane {lane}"))?);
                }
            }
            Ok(out)
        }
        AdderTreeMode::ShiftSumWithinUnit { group } => {
            let groups = cfg.num_units / group;
            let mut out = Vec::with_capacity(groups);
            for g in 0..groups {
                let mut s = 0i64;
                for u in g * group..(g + 1) * group {
                    if units[u].is_idle() {
                        continue;
                    }
                    let planes: Vec<u8> = units[u].roles[..lanes]
                        .iter()
                        .map(|r| match r {
                            LaneRole::Bitplane(b) => Ok(*b),
                            other => Err(Error::Mapping(format!(
                                "unit {u} lane role {other:?} in shift-sum mode"
                            ))),
                        })
                        .collect::<Result<_>>()?;
                    s += shift_sum_within_unit(&products[u][..lanes], &planes)? as i64;
                }
                out.push(check_width(s, width, || format!("shift-sum group {g}"))?);
            }
            Ok(out)
        }
        AdderTreeMode::PassThrough => Ok(products
            .iter()
            .flat_map(|p| p[..lanes].iter().map(|&v| v as i32))
            .collect()),
    }
}

/// Saturating arithmetic right shift into `[-128, 127]`. Rounds toward negative infinity.
pub fn requantize_to_8bit(acc: i32, shift: u32) -> i8 {
    debug_assert!(shift <= 31);
    (acc >> shift.min(31)).clamp(i8::MIN as i32, i8::MAX as i32) as i8
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct PeCounters {
    pub cycles: u64,
    /// Lanes with work assigned.
    pub active_lanes: u64,
    /// Lanes explicitly idle (no work).
    pub idle_lanes: u64,
    /// Active lanes whose spike input was 1.
    pub firing_lanes: u64,
}

/// A single simulated PE module instance.
pub struct PeModule {
    cfg: PeModuleConfig,
    counters: PeCounters,
    trace: Option<Box<dyn Write + Send>>,
}

impl std::fmt::Debug for PeModule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeModule")
            .field("cfg", &self.cfg)
            .field("counters", &self.counters)
            .field("tracing", &self.trace.is_some())
            .finish()
    }
}

impl PeModule {
    pub fn new(cfg: PeModuleConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            counters: PeCounters::default(),
            trace: None,
        })
    }

    /// Enables the per-cycle arithmetic trace.
    pub fn with_trace(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.trace = Some(sink);
        self
    }

    pub fn config(&self) -> &PeModuleConfig {
        &self.cfg
    }

    pub fn counters(&self) -> PeCounters {
        self.counters
    }

    /// Runs one cycle of the whole array and reduces it through the adder tree.
    pub fn cycle(&mut self, units: &[UnitInput], mode: AdderTreeMode) -> Result<Vec<i32>> {
        let lane_mask = if self.cfg.pes_per_unit == MAX_LANES {
            u8::MAX
        } else {
            (1u8 << self.cfg.pes_per_unit) - 1
        };
        let mut products = Vec::with_capacity(units.len());
        for u in units {
            let active = u.active_mask();
            if active & !lane_mask != 0 {
                return Err(Error::Mapping(format!(
                    "lane mask {active:#010b} exceeds {} PEs per unit",
                    self.cfg.pes_per_unit
                )));
            }
            // idle lanes must not leak a spike into the sum
            let gated = UnitInput {
                spikes: u.spikes & active,
                ..*u
            };
            products.push(unit_cycle(&gated));
            self.counters.active_lanes += active.count_ones() as u64;
            self.counters.idle_lanes += (self.cfg.pes_per_unit as u32 - active.count_ones()) as u64;
            self.counters.firing_lanes += gated.spikes.count_ones() as u64;
        }
        let out = adder_tree_reduce(units, &products, mode, &self.cfg)?;
        if let Some(sink) = self.trace.as_mut() {
            let cycle = self.counters.cycles;
            for (i, (u, p)) in units.iter().zip(&products).enumerate() {
                if u.is_idle() {
                    continue;
                }
                let lanes: Vec<String> = p[..self.cfg.pes_per_unit]
                    .iter()
                    .map(i8::to_string)
                    .collect();
                writeln!(
                    sink,
                    "cycle={cycle} unit={i} w={} spikes={:08b} products={}",
                    u.weight,
                    u.spikes & u.active_mask(),
                    lanes.join(",")
                )?;
            }
        }
        self.counters.cycles += 1;
        Ok(out)
    }
}
