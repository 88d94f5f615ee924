// SPDX-License-Identifier: Apache-2.0

//! Fused spiking self-attention: scores stay on chip and only one eight-column
//! tile of V is buffered at a time.

use snnaccel::dataflow::{execute, schedule_stdp, ExecInputs, MappingPolicy};
use snnaccel::golden::network::{Geometry, LayerKind, LayerSpec};
use snnaccel::golden::{ref_ssa_raw, TflifParams};
use snnaccel::memory::{configure_banks, BankId, BankSizes};
use snnaccel::pe::{PeModule, PeModuleConfig};
use snnaccel::tensor::SpikeTensor;

fn main() -> snnaccel::Result<()> {
    let (tokens, heads, head_dim) = (16, 2, 32);
    let layer = LayerSpec {
        name: "attn".into(),
        kind: LayerKind::SpikeAttention,
        geometry: Geometry::Attention {
            tokens,
            heads,
            head_dim,
        },
        inputs: vec!["q".into(), "k".into(), "v".into()],
        requant_shift: 0,
        tflif: Some(TflifParams::uniform(-8, 8, 4)),
        residual_op: None,
    };
    let pe = PeModuleConfig::default();
    let schedule = schedule_stdp(&layer, &MappingPolicy::default(), &pe)?;
    let shape = [4, heads, tokens, head_dim];
    let q = SpikeTensor::from_fn(&shape, |i| i % 3 == 0)?;
    let k = SpikeTensor::from_fn(&shape, |i| i % 5 < 2)?;
    let v = SpikeTensor::from_fn(&shape, |i| i % 7 == 1)?;
    let mut module = PeModule::new(pe)?;
    let mut mem = configure_banks(&BankSizes::default())?;
    let (out, report) = execute(
        &schedule,
        &mut module,
        &mut mem,
        ExecInputs::Attention {
            q: &q,
            k: &k,
            v: &v,
        },
    )?;
    assert_eq!(out.accum.unwrap(), ref_ssa_raw(&q, &k, &v)?);
    println!(
        "{} cycles, {} output spikes",
        report.cycles,
        out.spikes.unwrap().popcount()
    );
    println!(
        "V tile high-water {} bits (full V per head: {} bits)",
        mem.bank(BankId::SI).high_water_bits,
        tokens * head_dim
    );
    Ok(())
}
