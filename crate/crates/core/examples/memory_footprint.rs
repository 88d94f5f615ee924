// SPDX-License-Identifier: Apache-2.0

//! Walks the full model without data and prints per-bank high-water marks,
//! traffic, and the buffer comparisons against naive mappings.

use snnaccel::harness::{load_network_spec, run, RunConfig, RunMode};

fn main() -> snnaccel::Result<()> {
    let spec = load_network_spec(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/specs/spikformer-v2-8-512.json"
    ))?;
    let report = run(&spec, &RunConfig::new(RunMode::Cycle, 0), None)?;
    let m = &report.memory;
    println!("{} of {} bits configured", m.configured_bits, m.budget_bits);
    for b in &m.banks {
        println!(
            "{:<3} {:>7} / {:>7} bits peak, {:>12} bits read, {:>12} bits written",
            b.bank.to_string(),
            b.high_water_bits,
            b.capacity_bits,
            b.read_bits,
            b.write_bits
        );
    }
    for c in &m.comparisons {
        println!("{}: {} vs {} bits", c.name, c.proposed_bits, c.naive_bits);
    }
    Ok(())
}
