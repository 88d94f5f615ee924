// SPDX-License-Identifier: Apache-2.0

//! Capacity and access counting for the on-chip SRAM banks and the split buffer.
//!
//! Addresses are abstract allocation handles; bank conflicts are not modeled.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const KIB_BITS: u64 = 1024 * 8;
/// Total on-chip SRAM budget: 107 KB.
pub const DEFAULT_BUDGET_BITS: u64 = 107 * KIB_BITS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BankId {
    /// Large weight SRAM.
    LW,
    /// Small weight SRAM.
    SW,
    /// Large input SRAM (1-bit inputs).
    LI,
    /// Small input SRAM (1-bit inputs).
    SI,
    /// Output spike SRAM.
    OUT,
}

impl BankId {
    pub const ALL: [BankId; 5] = [BankId::LW, BankId::SW, BankId::LI, BankId::SI, BankId::OUT];

    fn index(self) -> usize {
        self as usize
    }

    fn default_bits(self) -> u64 {
        match self {
            BankId::LW => 64 * KIB_BITS,
            BankId::SW => 8 * KIB_BITS,
            BankId::LI => 16 * KIB_BITS,
            BankId::SI => 8 * KIB_BITS,
            BankId::OUT => 11 * KIB_BITS,
        }
    }
}

impl fmt::Display for BankId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
}

/// Per-bank capacities in bits; unset banks take the default split.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankSizes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lw_bits: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sw_bits: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub li_bits: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub si_bits: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_bits: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_bits: Option<u64>,
}

impl BankSizes {
    fn get(&self, id: BankId) -> Option<u64> {
        match id {
            BankId::LW => self.lw_bits,
            BankId::SW => self.sw_bits,
            BankId::LI => self.li_bits,
            BankId::SI => self.si_bits,
            BankId::OUT => self.out_bits,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SramBank {
    pub name: BankId,
    pub capacity_bits: u64,
    pub word_width: u32,
    pub read_count: u64,
    pub write_count: u64,
    pub read_bits: u64,
    pub write_bits: u64,
    pub occupancy_bits: u64,
    pub high_water_bits: u64,
}

impl SramBank {
    fn new(name: BankId, capacity_bits: u64) -> Self {
        Self {
            name,
            capacity_bits,
            word_width: 64,
            read_count: 0,
            write_count: 0,
            read_bits: 0,
            write_bits: 0,
            occupancy_bits: 0,
            high_water_bits: 0,
        }
    }
}

/// A fixed-size register buffer outside the SRAM banks (the split-column partial-sum buffer).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RegisterBuffer {
    pub capacity_bits: u64,
    pub occupancy_bits: u64,
    pub high_water_bits: u64,
}

impl RegisterBuffer {
    fn new(capacity_bits: u64) -> Self {
        Self {
            capacity_bits,
            occupancy_bits: 0,
            high_water_bits: 0,
        }
    }

    pub fn hold(&mut self, bits: u64) -> Result<()> {
        if bits > self.capacity_bits {
            return Err(Error::Memory {
                bank: "split-buffer".into(),
                detail: format!("{bits} bits exceed {} bit capacity", self.capacity_bits),
            });
        }
        self.occupancy_bits = bits;
        self.high_water_bits = self.high_water_bits.max(bits);
        Ok(())
    }

    pub fn release(&mut self) {
        self.occupancy_bits = 0;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Allocation {
    bank: BankId,
    bits: u64,
}

impl Allocation {
    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn bank(&self) -> BankId {
        self.bank
    }
}

/// Buffer requirement of a proposed dataflow next to its naive alternative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BufferComparison {
    pub proposed_bits: u64,
    pub naive_bits: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemoryMap {
    banks: Vec<SramBank>,
    budget_bits: u64,
    split_buffer: RegisterBuffer,
    comparisons: BTreeMap<String, BufferComparison>,
}

/// Builds the bank map, rejecting splits over the budget.
pub fn configure_banks(sizes: &BankSizes) -> Result<MemoryMap> {
    MemoryMap::new(sizes, 192)
}

impl MemoryMap {
    pub fn new(sizes: &BankSizes, split_buffer_bits: u64) -> Result<Self> {
        let budget = sizes.budget_bits.unwrap_or(DEFAULT_BUDGET_BITS);
        let mut banks = Vec::with_capacity(BankId::ALL.len());
        for id in BankId::ALL {
            let bits = sizes.get(id).unwrap_or_else(|| id.default_bits());
            if bits == 0 {
                return Err(Error::Memory {
                    bank: id.to_string(),
                    detail: "capacity must be positive".into(),
                });
            }
            banks.push(SramBank::new(id, bits));
        }
        let total: u64 = banks.iter().map(|b| b.capacity_bits).sum();
        if total > budget {
            return Err(Error::Budget {
                total_bits: total,
                budget_bits: budget,
                over_bits: total - budget,
            });
        }
        Ok(Self {
            banks,
            budget_bits: budget,
            split_buffer: RegisterBuffer::new(split_buffer_bits),
            comparisons: BTreeMap::new(),
        })
    }

    pub fn bank(&self, id: BankId) -> &SramBank {
        &self.banks[id.index()]
    }

    pub fn banks(&self) -> &[SramBank] {
        &self.banks
    }

    pub fn budget_bits(&self) -> u64 {
        self.budget_bits
    }

    pub fn total_capacity_bits(&self) -> u64 {
        self.banks.iter().map(|b| b.capacity_bits).sum()
    }

    pub fn split_buffer(&self) -> &RegisterBuffer {
        &self.split_buffer
    }

    pub fn split_buffer_mut(&mut self) -> &mut RegisterBuffer {
        &mut self.split_buffer
    }

    /// Counts one access of `bits` bits.
    pub fn access(&mut self, id: BankId, kind: AccessKind, bits: u64) {
        let b = &mut self.banks[id.index()];
        match kind {
            AccessKind::Read => {
                b.read_count += 1;
                b.read_bits += bits;
            }
            AccessKind::Write => {
                b.write_count += 1;
                b.write_bits += bits;
            }
        }
    }

    /// Reserves `bits` of occupancy in a bank.
    pub fn allocate(&mut self, id: BankId, bits: u64) -> Result<Allocation> {
        let b = &mut self.banks[id.index()];
        let next = b.occupancy_bits + bits;
        if next > b.capacity_bits {
            return Err(Error::Memory {
                bank: id.to_string(),
                detail: format!(
                    "allocating {bits} bits on top of {} exceeds capacity {}",
                    b.occupancy_bits, b.capacity_bits
                ),
            });
        }
        b.occupancy_bits = next;
        b.high_water_bits = b.high_water_bits.max(next);
        Ok(Allocation { bank: id, bits })
    }

    pub fn free(&mut self, a: Allocation) {
        let b = &mut self.banks[a.bank.index()];
        debug_assert!(b.occupancy_bits >= a.bits);
        b.occupancy_bits -= a.bits;
    }

    /// Records a proposed-vs-naive buffer requirement, keeping the maxima per key.
    pub fn record_comparison(&mut self, key: &str, proposed_bits: u64, naive_bits: u64) {
        let e = self.comparisons.entry(key.to_string()).or_default();
        e.proposed_bits = e.proposed_bits.max(proposed_bits);
        e.naive_bits = e.naive_bits.max(naive_bits);
    }

    pub fn comparisons(&self) -> &BTreeMap<String, BufferComparison> {
        &self.comparisons
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BankFootprint {
    pub bank: BankId,
    pub capacity_bits: u64,
    pub high_water_bits: u64,
    pub reads: u64,
    pub writes: u64,
    pub read_bits: u64,
    pub write_bits: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonLine {
    pub name: String,
    pub proposed_bits: u64,
    pub naive_bits: u64,
    /// `proposed / naive`; 0 when the naive alternative needs nothing.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FootprintReport {
    pub budget_bits: u64,
    pub configured_bits: u64,
    pub budget_margin_bits: i64,
    pub banks: Vec<BankFootprint>,
    pub split_buffer_capacity_bits: u64,
    pub split_buffer_high_water_bits: u64,
    pub comparisons: Vec<ComparisonLine>,
}

pub fn footprint_report(map: &MemoryMap) -> FootprintReport {
    FootprintReport {
        budget_bits: map.budget_bits,
        configured_bits: map.total_capacity_bits(),
        budget_margin_bits: map.budget_bits as i64 - map.total_capacity_bits() as i64,
        banks: map
            .banks
            .iter()
            .map(|b| BankFootprint {
                bank: b.name,
                capacity_bits: b.capacity_bits,
                high_water_bits: b.high_water_bits,
                reads: b.read_count,
                writes: b.write_count,
                read_bits: b.read_bits,
                write_bits: b.write_bits,
            })
            .collect(),
        split_buffer_capacity_bits: map.split_buffer.capacity_bits,
        split_buffer_high_water_bits: map.split_buffer.high_water_bits,
        comparisons: map
            .comparisons
            .iter()
            .map(|(k, c)| ComparisonLine {
                name: k.clone(),
                proposed_bits: c.proposed_bits,
                naive_bits: c.naive_bits,
                ratio: if c.naive_bits == 0 {
                    0.0
                } else {
                    c.proposed_bits as f64 / c.naive_bits as f64
                },
            })
            .collect(),
    }
}
