// SPDX-License-Identifier: Apache-2.0

//! Scheduled execution against the golden ops, cycle formulas, memory
//! accounting and error paths of the four dataflows.

mod common;

use std::io::Write;
use std::sync::{Arc, Mutex};

use common::*;

use snnaccel::dataflow::{
    execute, schedule_layer, schedule_sssc, schedule_stdp, schedule_wssl, schedule_zsc, ExecInputs,
    MappingPolicy, Phase,
};
use snnaccel::golden::network::LayerKind;
use snnaccel::golden::ops::ssa_activation;
use snnaccel::golden::{
    apply_tflif, ref_conv2d_u8, ref_spiking_conv2d, ref_spiking_linear, ref_ssa_raw, TflifParams,
};
use snnaccel::memory::{footprint_report, BankId};
use snnaccel::pe::{PeModule, PeModuleConfig};
use snnaccel::Error;

fn pe() -> PeModuleConfig {
    PeModuleConfig::default()
}

fn ceil(a: usize, b: usize) -> u64 {
    a.div_ceil(b) as u64
}

// ---------------------------------------------------------------------------
// Equivalence with the golden ops

#[test]
fn zsc_matches_reference_conv() {
    let mut r = rng(20);
    for (c_in, c_out, h) in [
        (128, 1, 2),
        (16, 3, 4),
        (200, 2, 6),
        (256, 2, 2),
        (3, 5, 10),
    ] {
        let layer = conv_layer(LayerKind::SpikeConv, c_in, c_out, h, h, 2, 2);
        let s = schedule_zsc(&layer, &default_policy(), &pe()).unwrap();
        let x = random_spikes(&mut r, &[T, c_in, h, h], 0.3);
        let w = random_weights(&mut r, &[c_out, c_in, 2, 2]);
        let (out, rep, _) = run_schedule(&s, ExecInputs::Spikes { x: &x, w: &w });
        let want = ref_spiking_conv2d(&x, &w, 2).unwrap();
        assert_eq!(
            out.accum.as_ref().unwrap(),
            &want,
            "c_in={c_in} c_out={c_out} h={h}"
        );
        assert_eq!(
            out.spikes.unwrap(),
            apply_tflif(&want, 4, &tflif(), 1).unwrap()
        );
        assert_eq!(rep.cycles, s.predicted_cycles);
    }
}

#[test]
fn sssc_matches_reference_u8_conv() {
    let mut r = rng(21);
    for (c_in, c_out, h, k, st) in [
        (3, 4, 8, 2, 2),
        (3, 2, 9, 3, 3),
        (1, 3, 4, 2, 1),
        (3, 2, 16, 4, 4),
    ] {
        let layer = conv_layer(LayerKind::Conv8bitInput, c_in, c_out, h, h, k, st);
        let s = schedule_sssc(&layer, &default_policy(), &pe()).unwrap();
        let img = random_image(&mut r, &[c_in, h, h]);
        let w = random_weights(&mut r, &[c_out, c_in, k, k]);
        let (out, rep, _) = run_schedule(&s, ExecInputs::Image { img: &img, w: &w });
        let want = ref_conv2d_u8(&img, &w, st, T).unwrap();
        assert_eq!(out.accum.as_ref().unwrap(), &want);
        assert_eq!(
            out.spikes.unwrap(),
            apply_tflif(&want, 4, &tflif(), 1).unwrap()
        );
        assert_eq!(rep.cycles, s.predicted_cycles);
    }
}

#[test]
fn wssl_matches_reference_linear() {
    let mut r = rng(22);
    for (n, d_in, d_out) in [
        (2, 512, 1),
        (5, 64, 9),
        (7, 1000, 3),
        (4, 2048, 2),
        (1, 1, 1),
    ] {
        let layer = linear_layer(n, d_in, d_out);
        let s = schedule_wssl(&layer, &default_policy(), &pe()).unwrap();
        let x = random_spikes(&mut r, &[T, n, d_in], 0.5);
        let w = random_weights(&mut r, &[d_out, d_in]);
        let (out, rep, _) = run_schedule(&s, ExecInputs::Spikes { x: &x, w: &w });
        let want = ref_spiking_linear(&x, &w).unwrap();
        assert_eq!(out.accum.as_ref().unwrap(), &want);
        assert_eq!(
            out.spikes.unwrap(),
            apply_tflif(&want, 4, &tflif(), 2).unwrap()
        );
        assert_eq!(rep.cycles, s.predicted_cycles);
    }
}

#[test]
fn stdp_matches_reference_attention() {
    let mut r = rng(23);
    for (n, heads, dh) in [(2, 1, 4), (9, 2, 8), (17, 3, 5), (40, 1, 64), (3, 2, 127)] {
        let layer = attention_layer(n, heads, dh);
        let s = schedule_stdp(&layer, &default_policy(), &pe()).unwrap();
        let shape = [T, heads, n, dh];
        let (q, k, v) = (
            random_spikes(&mut r, &shape, 0.3),
            random_spikes(&mut r, &shape, 0.3),
            random_spikes(&mut r, &shape, 0.3),
        );
        let (out, rep, _) = run_schedule(
            &s,
            ExecInputs::Attention {
                q: &q,
                k: &k,
                v: &v,
            },
        );
        let want = ref_ssa_raw(&q, &k, &v).unwrap();
        assert_eq!(
            out.accum.as_ref().unwrap(),
            &want,
            "n={n} heads={heads} dh={dh}"
        );
        assert_eq!(
            out.spikes.unwrap(),
            ssa_activation(&want, 1, &tflif()).unwrap()
        );
        assert_eq!(rep.cycles, s.predicted_cycles);
    }
}

#[test]
fn stdp_zero_query_gives_zero_scores() {
    let mut r = rng(24);
    let shape = [T, 2, 6, 8];
    let q = snnaccel::tensor::SpikeTensor::zeros(&shape).unwrap();
    let (k, v) = (
        random_spikes(&mut r, &shape, 0.8),
        random_spikes(&mut r, &shape, 0.8),
    );
    let s = schedule_stdp(&attention_layer(6, 2, 8), &default_policy(), &pe()).unwrap();
    let (out, _, _) = run_schedule(
        &s,
        ExecInputs::Attention {
            q: &q,
            k: &k,
            v: &v,
        },
    );
    assert!(out.accum.unwrap().data().iter().all(|&x| x == 0));
}

// ---------------------------------------------------------------------------
// Cycle counts

#[test]
fn zsc_cycle_examples() {
    let p = default_policy();
    let one = schedule_zsc(
        &conv_layer(LayerKind::SpikeConv, 128, 1, 2, 4, 2, 2),
        &p,
        &pe(),
    )
    .unwrap();
    assert_eq!(one.predicted_cycles, 1);
    let big = schedule_zsc(
        &conv_layer(LayerKind::SpikeConv, 256, 512, 28, 28, 2, 2),
        &p,
        &pe(),
    )
    .unwrap();
    assert_eq!(big.predicted_cycles, 100_352);
    assert_eq!(big.items.len() as u64, 100_352);
}

#[test]
fn zsc_cycles_follow_closed_form() {
    for (c_in, c_out, h, w) in [
        (3, 7, 6, 10),
        (129, 2, 4, 6),
        (64, 4, 14, 14),
        (512, 1, 2, 2),
    ] {
        let s = schedule_zsc(
            &conv_layer(LayerKind::SpikeConv, c_in, c_out, h, w, 2, 2),
            &default_policy(),
            &pe(),
        )
        .unwrap();
        let hw = (h / 2) * (w / 2);
        assert_eq!(
            s.predicted_cycles,
            c_out as u64 * ceil(c_in, 128) * ceil(hw, 2)
        );
        assert_eq!(s.items.len() as u64, s.predicted_cycles);
    }
}

#[test]
fn zsc_full_utilization_for_aligned_shapes() {
    let s = schedule_zsc(
        &conv_layer(LayerKind::SpikeConv, 256, 3, 8, 4, 2, 2),
        &default_policy(),
        &pe(),
    )
    .unwrap();
    assert_eq!(s.plan.utilization(), 1.0);
    let (_, rep, _) = run_schedule(&s, ExecInputs::CountersOnly);
    assert_eq!(rep.idle_lanes, 0);
    let odd = schedule_zsc(
        &conv_layer(LayerKind::SpikeConv, 100, 3, 6, 6, 2, 2),
        &default_policy(),
        &pe(),
    )
    .unwrap();
    assert!(odd.plan.utilization() < 1.0);
}

#[test]
fn sssc_cycle_examples() {
    let p = default_policy();
    let single = schedule_sssc(
        &conv_layer(LayerKind::Conv8bitInput, 3, 1, 2, 2, 2, 2),
        &p,
        &pe(),
    )
    .unwrap();
    assert_eq!(single.predicted_cycles, 1);
    // 3 x 2 x 2 = 12 units per pixel, 42 pixels per cycle
    let stem = schedule_sssc(
        &conv_layer(LayerKind::Conv8bitInput, 3, 64, 224, 224, 2, 2),
        &p,
        &pe(),
    )
    .unwrap();
    assert_eq!(stem.predicted_cycles, 64 * ceil(112 * 112, 512 / 12));
}

#[test]
fn wssl_cycle_examples() {
    let p = default_policy();
    assert_eq!(
        schedule_wssl(&linear_layer(196, 512, 512), &p, &pe())
            .unwrap()
            .predicted_cycles,
        50_176
    );
    assert_eq!(
        schedule_wssl(&linear_layer(196, 2048, 512), &p, &pe())
            .unwrap()
            .predicted_cycles,
        200_704
    );
    assert_eq!(
        schedule_wssl(&linear_layer(2, 512, 1), &p, &pe())
            .unwrap()
            .predicted_cycles,
        1
    );
    for (n, d_in, d_out) in [(3, 7, 5), (11, 513, 2), (196, 512, 2048)] {
        let s = schedule_wssl(&linear_layer(n, d_in, d_out), &p, &pe()).unwrap();
        assert_eq!(
            s.predicted_cycles,
            ceil(d_in, 512) * d_out as u64 * ceil(n, 2)
        );
    }
}

/// Per-head score and value cycles from the lane geometry.
fn stdp_oracle(n: usize, heads: usize, dh: usize) -> u64 {
    let gs = dh.next_power_of_two();
    let keys = 512 / gs;
    let score = ceil(n, 8) * ceil(n, keys);
    let gv = n.next_power_of_two().min(512);
    let rows = 512 / gv;
    let value = ceil(dh, 8) * ceil(n, rows) * ceil(n, 512);
    (T * heads) as u64 * (score + value)
}

#[test]
fn stdp_cycles_follow_lane_geometry() {
    for (n, heads, dh) in [
        (2, 1, 4),
        (196, 8, 64),
        (49, 4, 32),
        (600, 1, 16),
        (5, 3, 100),
    ] {
        let s = schedule_stdp(&attention_layer(n, heads, dh), &default_policy(), &pe()).unwrap();
        assert_eq!(
            s.predicted_cycles,
            stdp_oracle(n, heads, dh),
            "n={n} heads={heads} dh={dh}"
        );
        assert_eq!(s.items.len() as u64, s.predicted_cycles);
    }
}

#[test]
fn empty_layer_schedules_zero_cycles() {
    let s = schedule_wssl(&linear_layer(0, 64, 4), &default_policy(), &pe()).unwrap();
    assert_eq!(s.predicted_cycles, 0);
    let (_, rep, _) = run_schedule(&s, ExecInputs::CountersOnly);
    assert_eq!(rep.cycles, 0);
}

#[test]
fn weight_load_stalls_are_separate_from_compute() {
    let policy = MappingPolicy {
        weight_load_cycles: 3,
        ..default_policy()
    };
    let s = schedule_wssl(&linear_layer(6, 1024, 5), &policy, &pe()).unwrap();
    let (_, rep, _) = run_schedule(&s, ExecInputs::CountersOnly);
    assert_eq!(rep.cycles, s.predicted_cycles);
    assert_eq!(rep.weight_loads, s.plan.weight_loads);
    assert_eq!(rep.load_stall_cycles, 3 * rep.weight_loads);
    assert_eq!(rep.total_cycles(), rep.cycles + rep.load_stall_cycles);
}

// ---------------------------------------------------------------------------
// Counters, dumps and traces

#[test]
fn counters_only_walk_matches_data_mode_lanes() {
    let mut r = rng(25);
    let layer = linear_layer(5, 700, 3);
    let s = schedule_wssl(&layer, &default_policy(), &pe()).unwrap();
    let x = random_spikes(&mut r, &[T, 5, 700], 0.5);
    let w = random_weights(&mut r, &[3, 700]);
    let (_, data, mem_a) = run_schedule(&s, ExecInputs::Spikes { x: &x, w: &w });
    let (_, walk, mem_b) = run_schedule(&s, ExecInputs::CountersOnly);
    assert_eq!(
        (data.cycles, data.active_lanes, data.idle_lanes),
        (walk.cycles, walk.active_lanes, walk.idle_lanes)
    );
    assert!(data.firing_lanes.is_some() && walk.firing_lanes.is_none());
    assert_eq!(footprint_report(&mem_a), footprint_report(&mem_b));

    let shape = [T, 2, 13, 16];
    let (q, k, v) = (
        random_spikes(&mut r, &shape, 0.4),
        random_spikes(&mut r, &shape, 0.4),
        random_spikes(&mut r, &shape, 0.4),
    );
    let s = schedule_stdp(&attention_layer(13, 2, 16), &default_policy(), &pe()).unwrap();
    let (_, data, _) = run_schedule(
        &s,
        ExecInputs::Attention {
            q: &q,
            k: &k,
            v: &v,
        },
    );
    let (_, walk, _) = run_schedule(&s, ExecInputs::CountersOnly);
    assert_eq!(
        (data.active_lanes, data.idle_lanes),
        (walk.active_lanes, walk.idle_lanes)
    );
    assert_eq!(data.active_lanes, s.plan.active_lanes);
}

#[test]
fn schedule_dump_has_one_line_per_cycle() {
    let s = schedule_wssl(&linear_layer(3, 600, 2), &default_policy(), &pe()).unwrap();
    let mut buf = Vec::new();
    s.dump(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len() as u64, s.predicted_cycles);
    assert!(lines[0].starts_with("phase=WSSL cycle=0 active_lanes="));
    assert!(lines.iter().all(|l| l.contains(" dest=")));
    assert_eq!(lines.iter().filter(|l| l.ends_with(" last")).count(), 2 * 2);
}

#[derive(Clone, Default)]
struct Shared(Arc<Mutex<Vec<u8>>>);

impl Write for Shared {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

#[test]
fn trace_shows_only_weight_or_zero_products() {
    let mut r = rng(26);
    let s = schedule_zsc(
        &conv_layer(LayerKind::SpikeConv, 8, 2, 4, 4, 2, 2),
        &default_policy(),
        &pe(),
    )
    .unwrap();
    let x = random_spikes(&mut r, &[T, 8, 4, 4], 0.5);
    let w = random_weights(&mut r, &[2, 8, 2, 2]);
    let sink = Shared::default();
    let mut module = PeModule::new(pe())
        .unwrap()
        .with_trace(Box::new(sink.clone()));
    let (_, mut mem) = fresh();
    execute(
        &s,
        &mut module,
        &mut mem,
        ExecInputs::Spikes { x: &x, w: &w },
    )
    .unwrap();
    let text = String::from_utf8(sink.0.lock().unwrap().clone()).unwrap();
    let mut lines = 0;
    for line in text.lines() {
        let field = |k: &str| line.split(' ').find_map(|f| f.strip_prefix(k)).unwrap();
        let weight: i8 = field("w=").parse().unwrap();
        let spikes = u8::from_str_radix(field("spikes="), 2).unwrap();
        for (lane, p) in field("products=").split(',').enumerate() {
            let p: i8 = p.parse().unwrap();
            assert_eq!(p, if spikes >> lane & 1 == 1 { weight } else { 0 });
        }
        lines += 1;
    }
    assert!(lines > 0);
}

// ---------------------------------------------------------------------------
// Memory accounting

#[test]
fn mlp2_output_writes_and_split_buffer() {
    let s = schedule_wssl(&linear_layer(196, 2048, 512), &default_policy(), &pe()).unwrap();
    let (_, _, mem) = run_schedule(&s, ExecInputs::CountersOnly);
    let fp = footprint_report(&mem);
    let out = fp.banks.iter().find(|b| b.bank == BankId::OUT).unwrap();
    assert_eq!(out.write_bits, 196 * 512 * T as u64);
    assert_eq!(fp.split_buffer_high_water_bits, 192);
    let cmp = fp
        .comparisons
        .iter()
        .find(|c| c.name == "wssl_partial_sum_bits")
        .unwrap();
    assert_eq!((cmp.proposed_bits, cmp.naive_bits), (192, 196 * 4 * 24));
    assert!(cmp.proposed_bits < cmp.naive_bits);

    let narrow = schedule_wssl(&linear_layer(196, 512, 8), &default_policy(), &pe()).unwrap();
    let (_, _, mem) = run_schedule(&narrow, ExecInputs::CountersOnly);
    assert_eq!(mem.split_buffer().high_water_bits, 0);
}

#[test]
fn stdp_value_tile_fits_small_input_bank() {
    let s = schedule_stdp(&attention_layer(196, 8, 64), &default_policy(), &pe()).unwrap();
    let (_, _, mem) = run_schedule(&s, ExecInputs::CountersOnly);
    let fp = footprint_report(&mem);
    assert_eq!(mem.bank(BankId::SI).high_water_bits, 196 * 8);
    let cmp = fp
        .comparisons
        .iter()
        .find(|c| c.name == "stdp_v_buffer_bits")
        .unwrap();
    assert_eq!((cmp.proposed_bits, cmp.naive_bits), (196 * 8, 196 * 64));
}

#[test]
fn zsc_keeps_intermediates_out_of_sram() {
    let s = schedule_zsc(
        &conv_layer(LayerKind::SpikeConv, 256, 4, 28, 28, 2, 2),
        &default_policy(),
        &pe(),
    )
    .unwrap();
    let (_, _, mem) = run_schedule(&s, ExecInputs::CountersOnly);
    let c = &mem.comparisons()["zsc_intermediate_sram_bits"];
    assert_eq!(c.proposed_bits, 0);
    assert_eq!(c.naive_bits, 14 * 14 * T as u64 * 24);
}

#[test]
fn counters_balance_after_every_run() {
    for layer in [
        linear_layer(9, 1500, 3),
        attention_layer(30, 2, 16),
        conv_layer(LayerKind::SpikeConv, 40, 2, 6, 6, 2, 2),
        conv_layer(LayerKind::Conv8bitInput, 3, 2, 8, 8, 2, 2),
    ] {
        let s = schedule_layer(&layer, &default_policy(), &pe())
            .unwrap()
            .unwrap();
        let (_, rep, mem) = run_schedule(&s, ExecInputs::CountersOnly);
        assert_eq!(rep.active_lanes + rep.idle_lanes, rep.cycles * 4096);
        for b in mem.banks() {
            assert_eq!(b.occupancy_bits, 0, "{} leaked", b.name);
            assert!(b.high_water_bits <= b.capacity_bits);
        }
        assert_eq!(mem.split_buffer().occupancy_bits, 0);
    }
}

// ---------------------------------------------------------------------------
// Errors

#[test]
fn zsc_rejects_other_kernels() {
    let layer = conv_layer(LayerKind::SpikeConv, 8, 2, 6, 6, 3, 3);
    assert!(matches!(
        schedule_zsc(&layer, &default_policy(), &pe()),
        Err(Error::UnsupportedLayer(_))
    ));
}

#[test]
fn sssc_only_schedules_the_image_layer() {
    let layer = conv_layer(LayerKind::SpikeConv, 3, 2, 4, 4, 2, 2);
    assert!(matches!(
        schedule_sssc(&layer, &default_policy(), &pe()),
        Err(Error::Scheduling(_))
    ));
}

#[test]
fn wssl_rejects_other_timestep_counts() {
    let mut layer = linear_layer(4, 64, 4);
    layer.tflif = Some(TflifParams::uniform(-8, 8, 2));
    assert!(matches!(
        schedule_wssl(&layer, &default_policy(), &pe()),
        Err(Error::Policy(_))
    ));
}

#[test]
fn stdp_rejects_wide_heads() {
    assert!(matches!(
        schedule_stdp(&attention_layer(4, 1, 128), &default_policy(), &pe()),
        Err(Error::Policy(_))
    ));
}

#[test]
fn invalid_policies_are_rejected() {
    let layer = linear_layer(4, 64, 4);
    for policy in [
        MappingPolicy {
            tokens_per_unit: 3,
            ..default_policy()
        },
        MappingPolicy {
            v_tile: 0,
            ..default_policy()
        },
        MappingPolicy {
            zsc_group: 3,
            ..default_policy()
        },
    ] {
        assert!(matches!(
            schedule_wssl(&layer, &policy, &pe()),
            Err(Error::Policy(_))
        ));
    }
}

#[test]
fn mismatched_inputs_are_rejected() {
    let mut r = rng(27);
    let s = schedule_wssl(&linear_layer(4, 64, 4), &default_policy(), &pe()).unwrap();
    let x = random_spikes(&mut r, &[T, 4, 65], 0.5);
    let w = random_weights(&mut r, &[4, 64]);
    let (mut module, mut mem) = fresh();
    assert!(execute(
        &s,
        &mut module,
        &mut mem,
        ExecInputs::Spikes { x: &x, w: &w }
    )
    .is_err());

    let small = PeModuleConfig {
        num_units: 256,
        ..pe()
    };
    let mut other = PeModule::new(small).unwrap();
    assert!(execute(&s, &mut other, &mut mem, ExecInputs::CountersOnly).is_err());
}

#[test]
fn phase_follows_layer_kind() {
    let cases = [
        (
            conv_layer(LayerKind::Conv8bitInput, 3, 2, 4, 4, 2, 2),
            Phase::Sssc,
        ),
        (
            conv_layer(LayerKind::SpikeConv, 3, 2, 4, 4, 2, 2),
            Phase::Zsc,
        ),
        (linear_layer(2, 8, 8), Phase::Wssl),
        (attention_layer(2, 1, 4), Phase::Stdp),
    ];
    for (layer, phase) in cases {
        assert_eq!(
            schedule_layer(&layer, &default_policy(), &pe())
                .unwrap()
                .unwrap()
                .phase,
            phase
        );
    }
}
