// SPDX-License-Identifier: Apache-2.0

//! The MLP down-projection (2048 -> 512 over 196 tokens): a weight column
//! longer than the array is split, and partial sums wait in the 192-bit
//! register. Runs without data to report exact cycles and memory traffic.

use snnaccel::dataflow::{execute, schedule_wssl, ExecInputs, MappingPolicy};
use snnaccel::golden::network::{Geometry, LayerKind, LayerSpec};
use snnaccel::golden::TflifParams;
use snnaccel::memory::{configure_banks, footprint_report, BankSizes};
use snnaccel::pe::{PeModule, PeModuleConfig};

fn main() -> snnaccel::Result<()> {
    let layer = LayerSpec {
        name: "mlp2".into(),
        kind: LayerKind::SpikeLinear,
        geometry: Geometry::Linear {
            tokens: 196,
            d_in: 2048,
            d_out: 512,
        },
        inputs: vec!["mlp1".into()],
        requant_shift: 7,
        tflif: Some(TflifParams::uniform(-8, 8, 4)),
        residual_op: None,
    };
    let pe = PeModuleConfig::default();
    let schedule = schedule_wssl(&layer, &MappingPolicy::default(), &pe)?;
    let mut module = PeModule::new(pe)?;
    let mut mem = configure_banks(&BankSizes::default())?;
    let (_, report) = execute(&schedule, &mut module, &mut mem, ExecInputs::CountersOnly)?;
    let fp = footprint_report(&mem);
    println!(
        "{} cycles, {} weight loads",
        report.cycles, report.weight_loads
    );
    println!(
        "split register high-water: {} bits",
        fp.split_buffer_high_water_bits
    );
    for b in &fp.banks {
        println!(
            "{:<3} read {:>9} bits, wrote {:>9} bits",
            b.bank.to_string(),
            b.read_bits,
            b.write_bits
        );
    }
    Ok(())
}
