// SPDX-License-Identifier: Apache-2.0

//! Stride-2 2x2 spiking convolution with the zig-zag mapping, plus the first
//! lines of its cycle dump.

use snnaccel::dataflow::{execute, schedule_zsc, ExecInputs, MappingPolicy};
use snnaccel::golden::network::{Geometry, LayerKind, LayerSpec};
use snnaccel::golden::{ref_spiking_conv2d, TflifParams};
use snnaccel::memory::{configure_banks, footprint_report, BankSizes};
use snnaccel::pe::{PeModule, PeModuleConfig};
use snnaccel::tensor::{SpikeTensor, WeightMatrix};

fn main() -> snnaccel::Result<()> {
    let (c_in, c_out, side) = (256, 4, 8);
    let layer = LayerSpec {
        name: "stem3".into(),
        kind: LayerKind::SpikeConv,
        geometry: Geometry::Conv {
            c_in,
            c_out,
            h: side,
            w: side,
            kernel: 2,
            stride: 2,
        },
        inputs: vec!["stem2".into()],
        requant_shift: 6,
        tflif: Some(TflifParams::uniform(-8, 8, 4)),
        residual_op: None,
    };
    let pe = PeModuleConfig::default();
    let schedule = schedule_zsc(&layer, &MappingPolicy::default(), &pe)?;
    let mut dump = Vec::new();
    schedule.dump(&mut dump)?;
    for line in String::from_utf8_lossy(&dump).lines().take(4) {
        println!("{line}");
    }

    let x = SpikeTensor::from_fn(&[4, c_in, side, side], |i| (i * 2654435761) % 7 < 2)?;
    let w = WeightMatrix::from_fn(&[c_out, c_in, 2, 2], |i| (i % 251) as i8);
    let mut module = PeModule::new(pe)?;
    let mut mem = configure_banks(&BankSizes::default())?;
    let (out, report) = execute(
        &schedule,
        &mut module,
        &mut mem,
        ExecInputs::Spikes { x: &x, w: &w },
    )?;
    assert_eq!(out.accum.unwrap(), ref_spiking_conv2d(&x, &w, 2)?);
    println!(
        "{} cycles, lane utilization {:.1}%",
        report.cycles,
        schedule.plan.utilization() * 100.0
    );
    for c in footprint_report(&mem).comparisons {
        println!(
            "{}: {} bits vs {} naive",
            c.name, c.proposed_bits, c.naive_bits
        );
    }
    Ok(())
}
