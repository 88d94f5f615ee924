// SPDX-License-Identifier: Apache-2.0

//! Throughput arithmetic and computation-time distribution checks.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use super::report::CycleReport;
use crate::dataflow::Phase;
use crate::error::{Error, Result};

/// Synaptic operations per active PE-cycle: one select plus one accumulate.
pub const SOPS_PER_LANE: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EfficiencyMetrics {
    pub peak_gsops: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tsops_per_mm2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tsops_per_w: Option<f64>,
}

/// Peak throughput of `pe_count` PEs at `clock_mhz`, and optional area and energy efficiency.
pub fn efficiency_metrics(
    pe_count: u64,
    clock_mhz: u64,
    area_mm2: Option<f64>,
    power_mw: Option<f64>,
) -> EfficiencyMetrics {
    let peak_gsops = (pe_count * SOPS_PER_LANE * clock_mhz) as f64 / 1000.0;
    EfficiencyMetrics {
        peak_gsops,
        tsops_per_mm2: area_mm2.map(|a| peak_gsops / 1000.0 / a),
        tsops_per_w: power_mw.map(|p| peak_gsops / p),
    }
}

/// Share of total cycles per phase, in percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhaseDistribution {
    pub zsc: f64,
    pub sssc: f64,
    pub wssl: f64,
    pub stdp: f64,
}

impl PhaseDistribution {
    /// Reference computation-time distribution of the full model (`table2`).
    pub const TABLE2: PhaseDistribution = PhaseDistribution {
        zsc: 0.19,
        sssc: 4.13,
        wssl: 80.79,
        stdp: 14.88,
    };

    pub fn named(name: &str) -> Result<Self> {
        match name {
            "table2" => Ok(Self::TABLE2),
            other => Err(Error::Argument(format!(
                "unknown reference distribution `{other}`"
            ))),
        }
    }

    pub fn get(&self, phase: Phase) -> f64 {
        match phase {
            Phase::Zsc => self.zsc,
            Phase::Sssc => self.sssc,
            Phase::Wssl => self.wssl,
            Phase::Stdp => self.stdp,
        }
    }

    pub fn from_report(report: &CycleReport) -> Self {
        let pct = |p: Phase| {
            report
                .phases
                .iter()
                .find(|e| e.phase == p)
                .map_or(0.0, |e| e.percent)
        };
        Self {
            zsc: pct(Phase::Zsc),
            sssc: pct(Phase::Sssc),
            wssl: pct(Phase::Wssl),
            stdp: pct(Phase::Stdp),
        }
    }

    /// Reads the `phases` array of a saved JSON report.
    pub fn from_report_json(report: &Value) -> Result<Self> {
        let phases = report
            .get("phases")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Report("report has no `phases` array".into()))?;
        let pct = |p: Phase| -> Result<f64> {
            phases
                .iter()
                .find(|e| e.get("phase").and_then(Value::as_str) == Some(p.name()))
                .and_then(|e| e.get("percent"))
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::Report(format!("report is missing phase {p}")))
        };
        Ok(Self {
            zsc: pct(Phase::Zsc)?,
            sssc: pct(Phase::Sssc)?,
            wssl: pct(Phase::Wssl)?,
            stdp: pct(Phase::Stdp)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributionRow {
    pub phase: Phase,
    pub simulated: f64,
    pub reference: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistributionComparison {
    pub rows: Vec<DistributionRow>,
    /// WSSL > STDP > SSSC > ZSC.
    pub pass_order: bool,
    /// WSSL above 60 percent.
    pub wssl_majority: bool,
    /// Every phase within 5 percentage points.
    pub pass_tight: bool,
}

/// Maximum per-phase deviation for the tight verdict, in percentage points.
pub const TIGHT_TOLERANCE_PP: f64 = 5.0;

impl DistributionComparison {
    pub fn mandatory_pass(&self) -> bool {
        self.pass_order && self.wssl_majority
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<6} {:>10} {:>10} {:>9}",
            "phase", "simulated", "reference", "delta"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<6} {:>9.2}% {:>9.2}% {:>+8.2}",
                r.phase.name(),
                r.simulated,
                r.reference,
                r.delta
            );
        }
        let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
        let _ = writeln!(
            s,
            "PASS-ORDER (WSSL > STDP > SSSC > ZSC): {}",
            verdict(self.pass_order)
        );
        let _ = writeln!(s, "WSSL share > 60%: {}", verdict(self.wssl_majority));
        let _ = writeln!(
            s,
            "PASS-TIGHT (all within 5 pp): {}",
            verdict(self.pass_tight)
        );
        s
    }
}

pub fn compare_distribution(
    simulated: &PhaseDistribution,
    reference: &PhaseDistribution,
) -> DistributionComparison {
    let rows: Vec<DistributionRow> = Phase::ALL
        .iter()
        .map(|&phase| {
            let (s, r) = (simulated.get(phase), reference.get(phase));
            DistributionRow {
                phase,
                simulated: s,
                reference: r,
                delta: s - r,
            }
        })
        .collect();
    let d = simulated;
    DistributionComparison {
        pass_order: d.wssl > d.stdp && d.stdp > d.sssc && d.sssc > d.zsc,
        wssl_majority: d.wssl > 60.0,
        pass_tight: rows.iter().all(|r| r.delta.abs() <= TIGHT_TOLERANCE_PP),
        rows,
    }
}
