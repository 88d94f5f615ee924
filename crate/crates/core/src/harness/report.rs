// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::metrics::SOPS_PER_LANE;
use crate::dataflow::Phase;
use crate::error::Result;
use crate::memory::FootprintReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    /// Execute with data and check every layer against the golden model.
    Functional,
    /// Walk every scheduled item without data.
    Cycle,
    /// Closed-form counts only.
    ShapeOnly,
}

impl RunMode {
    pub fn name(self) -> &'static str {
        match self {
            RunMode::Functional => "functional",
            RunMode::Cycle => "cycle",
            RunMode::ShapeOnly => "shape-only",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    NotChecked,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseEntry {
    pub phase: Phase,
    pub cycles: u64,
    pub percent: f64,
    pub active_lanes: u64,
    pub idle_lanes: u64,
    pub utilization: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LayerEntry {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
    pub cycles: u64,
    pub predicted_cycles: u64,
    pub active_lanes: u64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Frames per second as an exact fraction of clock rate over cycles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Fps {
    pub numerator: u64,
    pub denominator: u64,
    pub value: f64,
}

impl Fps {
    pub fn new(clock_hz: u64, cycles: u64) -> Option<Self> {
        (cycles > 0).then(|| {
            let r = Ratio::new(clock_hz, cycles);
            Self {
                numerator: *r.numer(),
                denominator: *r.denom(),
                value: *r.numer() as f64 / *r.denom() as f64,
            }
        })
    }

    pub fn ratio(&self) -> Ratio<u64> {
        Ratio::new(self.numerator, self.denominator)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleReport {
    pub network: String,
    pub mode: RunMode,
    pub seed: u64,
    pub clock_mhz: u64,
    /// States what the cycle totals and fps include.
    pub timing_basis: String,
    pub phases: Vec<PhaseEntry>,
    pub total_cycles: u64,
    pub load_stall_cycles: u64,
    pub utilization: f64,
    pub sops: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effective_sops: Option<u64>,
    pub peak_gsops: f64,
    pub throughput_gsops: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effective_gsops: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fps: Option<Fps>,
    pub layers: Vec<LayerEntry>,
    pub memory: FootprintReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_class: Option<usize>,
    pub verdict: Verdict,
}

pub(crate) const TIMING_BASIS: &str =
    "pure compute: total_cycles and fps exclude weight-load stalls, which are listed separately";

#[derive(Default)]
pub(crate) struct PhaseTotals {
    pub cycles: u64,
    pub active: u64,
    pub idle: u64,
}

pub(crate) fn phase_entries(totals: &[PhaseTotals; 4]) -> Vec<PhaseEntry> {
    let total: u64 = totals.iter().map(|t| t.cycles).sum();
    Phase::ALL
        .iter()
        .zip(totals)
        .map(|(&phase, t)| PhaseEntry {
            phase,
            cycles: t.cycles,
            percent: if total == 0 {
                0.0
            } else {
                t.cycles as f64 * 100.0 / total as f64
            },
            active_lanes: t.active,
            idle_lanes: t.idle,
            utilization: lane_share(t.active, t.idle),
        })
        .collect()
}

pub(crate) fn lane_share(active: u64, idle: u64) -> f64 {
    if active + idle == 0 {
        0.0
    } else {
        active as f64 / (active + idle) as f64
    }
}

/// SOPs per second at `clock_mhz`, in GSOPS.
pub(crate) fn gsops(lanes: u64, cycles: u64, clock_mhz: u64) -> f64 {
    if cycles == 0 {
        0.0
    } else {
        (lanes * SOPS_PER_LANE) as f64 * clock_mhz as f64 / cycles as f64 / 1000.0
    }
}

impl CycleReport {
    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(
            serde_json::to_string_pretty(self).map_err(|e| crate::Error::Report(e.to_string()))?
                + "\n",
        )
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "network {} ({} mode, seed {})",
            self.network,
            self.mode.name(),
            self.seed
        );
        let _ = writeln!(
            s,
            "{:<6} {:>12} {:>8} {:>12}",
            "phase", "cycles", "share", "utilization"
        );
        for p in &self.phases {
            let _ = writeln!(
                s,
                "{:<6} {:>12} {:>7.2}% {:>11.2}%",
                p.phase.name(),
                p.cycles,
                p.percent,
                p.utilization * 100.0
            );
        }
        let _ = writeln!(s, "{:<6} {:>12}", "total", self.total_cycles);
        if self.load_stall_cycles > 0 {
            let _ = writeln!(
                s,
                "weight-load stalls (not in total): {}",
                self.load_stall_cycles
            );
        }
        let _ = writeln!(
            s,
            "throughput {:.1} GSOPS of {:.0} peak, lane utilization {:.2}%",
            self.throughput_gsops,
            self.peak_gsops,
            self.utilization * 100.0
        );
        if let Some(fps) = &self.fps {
            let _ = writeln!(
                s,
                "fps at {} MHz: {:.2} (pure compute)",
                self.clock_mhz, fps.value
            );
        }
        let failed: Vec<&LayerEntry> = self
            .layers
            .iter()
            .filter(|l| l.verdict == Verdict::Fail)
            .collect();
        let checked = self
            .layers
            .iter()
            .filter(|l| l.verdict == Verdict::Pass)
            .count();
        match self.verdict {
            Verdict::Pass => {
                let _ = writeln!(s, "equivalence: PASS ({checked} layers bit-exact)");
            }
            Verdict::Fail => {
                for l in failed {
                    let _ = writeln!(
                        s,
                        "equivalence: FAIL in {}: {}",
                        l.name,
                        l.detail.as_deref().unwrap_or("")
                    );
                }
            }
            Verdict::NotChecked => {
                let _ = writeln!(s, "equivalence: not checked in this mode");
            }
        }
        let m = &self.memory;
        let _ = writeln!(
            s,
            "SRAM {} of {} bits configured (margin {})",
            m.configured_bits, m.budget_bits, m.budget_margin_bits
        );
        for b in &m.banks {
            let _ = writeln!(
                s,
                "  {:<3} high-water {:>8} / {:>8} bits, {} reads, {} writes",
                b.bank.to_string(),
                b.high_water_bits,
                b.capacity_bits,
                b.reads,
                b.writes
            );
        }
        let _ = writeln!(
            s,
            "  split buffer high-water {} / {} bits",
            m.split_buffer_high_water_bits, m.split_buffer_capacity_bits
        );
        for c in &m.comparisons {
            let _ = writeln!(
                s,
                "  {}: {} bits vs {} naive (ratio {:.3})",
                c.name, c.proposed_bits, c.naive_bits, c.ratio
            );
        }
        s
    }
}
