// SPDX-License-Identifier: Apache-2.0

//! Costs the full 8-block, 512-wide model with the closed-form plans and
//! compares the phase distribution with the `table2` reference.

use snnaccel::harness::{
    compare_distribution, load_network_spec, run, PhaseDistribution, RunConfig, RunMode,
};

fn main() -> snnaccel::Result<()> {
    let spec = load_network_spec(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/specs/spikformer-v2-8-512.json"
    ))?;
    let report = run(&spec, &RunConfig::new(RunMode::ShapeOnly, 0), None)?;
    print!("{}", report.to_table());

    let cmp = compare_distribution(
        &PhaseDistribution::from_report(&report),
        &PhaseDistribution::TABLE2,
    );
    print!("{}", cmp.to_table());

    let fps = report.fps.expect("non-empty network");
    println!("exact fps: {}/{}", fps.numerator, fps.denominator);
    Ok(())
}
