// SPDX-License-Identifier: Apache-2.0

//! Runs the desk-scale network end to end through the scheduled PE model and
//! checks every layer against the golden model.
//!
//! ```text
//! cargo run --example desk_functional -- [seed]
//! ```

use snnaccel::golden::network::synthetic_image;
use snnaccel::harness::{load_network_spec, run, RunConfig, RunMode, Verdict};

fn main() -> snnaccel::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(7);
    let spec = load_network_spec(concat!(env!("CARGO_MANIFEST_DIR"), "/specs/desk.json"))?;
    let image = synthetic_image(spec.input_shape, seed);

    let report = run(
        &spec,
        &RunConfig::new(RunMode::Functional, seed),
        Some(&image),
    )?;
    print!("{}", report.to_table());

    for layer in &report.layers {
        println!(
            "{:<14} {:>6} cycles  {:?}",
            layer.name, layer.cycles, layer.verdict
        );
    }
    println!("predicted class: {:?}", report.predicted_class);
    assert_eq!(report.verdict, Verdict::Pass);
    Ok(())
}
