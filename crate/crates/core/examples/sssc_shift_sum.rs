// SPDX-License-Identifier: Apache-2.0

//! First-layer convolution of an 8-bit image: each PE lane takes one
//! bitplane and the unit shift-sums them back into `w * x`.

use snnaccel::dataflow::{execute, schedule_sssc, ExecInputs, MappingPolicy};
use snnaccel::golden::network::{synthetic_image, Geometry, LayerKind, LayerSpec};
use snnaccel::golden::{ref_conv2d_u8, TflifParams};
use snnaccel::memory::{configure_banks, BankSizes};
use snnaccel::pe::{pe_mux_multiply, shift_sum_within_unit, PeModule, PeModuleConfig};
use snnaccel::tensor::WeightMatrix;

fn main() -> snnaccel::Result<()> {
    let (w, x) = (-37i8, 201u8);
    let lanes: Vec<i8> = (0..8)
        .map(|b| pe_mux_multiply(w, (x >> b) & 1 == 1))
        .collect();
    let planes: Vec<u8> = (0..8).collect();
    println!(
        "{w} * {x} = {} via lanes {lanes:?}",
        shift_sum_within_unit(&lanes, &planes)?
    );

    let layer = LayerSpec {
        name: "stem0".into(),
        kind: LayerKind::Conv8bitInput,
        geometry: Geometry::Conv {
            c_in: 3,
            c_out: 8,
            h: 16,
            w: 16,
            kernel: 2,
            stride: 2,
        },
        inputs: vec!["image".into()],
        requant_shift: 10,
        tflif: Some(TflifParams::uniform(-8, 8, 4)),
        residual_op: None,
    };
    let pe = PeModuleConfig::default();
    let schedule = schedule_sssc(&layer, &MappingPolicy::default(), &pe)?;
    let img = synthetic_image([3, 16, 16], 1);
    let weights = WeightMatrix::from_fn(&[8, 3, 2, 2], |i| (i as i32 * 37 % 255 - 127) as i8);
    let mut module = PeModule::new(pe)?;
    let mut mem = configure_banks(&BankSizes::default())?;
    let (out, report) = execute(
        &schedule,
        &mut module,
        &mut mem,
        ExecInputs::Image {
            img: &img,
            w: &weights,
        },
    )?;
    assert_eq!(out.accum.unwrap(), ref_conv2d_u8(&img, &weights, 2, 4)?);
    println!(
        "{} cycles (predicted {}), {} active lanes, matches golden",
        report.cycles, schedule.predicted_cycles, report.active_lanes
    );
    Ok(())
}
