// SPDX-License-Identifier: Apache-2.0

//! Golden-model checks against independent loop oracles.

mod common;

use common::*;
use rand::Rng;
use sha2::{Digest, Sha256};

use snnaccel::golden::network::synthetic_image;
use snnaccel::golden::ops::{merge_heads, split_heads, to_tokens};
use snnaccel::golden::tflif::ChannelParams;
use snnaccel::golden::{
    apply_tflif, fold_bn_into_lif, iand_residual, ref_conv2d_u8, ref_spiking_conv2d,
    ref_spiking_linear, ref_ssa, ref_ssa_raw, run_network_reference, tflif_forward, BatchNorm,
    NetworkWeights, ResetMode, ResidualOp, TflifParams,
};
use snnaccel::harness::{load_network_spec, parse_network_spec};
use snnaccel::tensor::{extract_bitplane, ByteImage, SpikeTensor};
use snnaccel::Error;

fn spec_path(name: &str) -> String {
    format!("{}/specs/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn bitplanes_reassemble_the_image() {
    let mut r = rng(1);
    let img = random_image(&mut r, &[3, 5, 7]);
    let planes: Vec<_> = (0..8).map(|b| extract_bitplane(&img, b).unwrap()).collect();
    for (i, &px) in img.data().iter().enumerate() {
        let rebuilt: u32 = (0..8).map(|b| (planes[b].data()[i] as u32) << b).sum();
        assert_eq!(rebuilt, px as u32);
    }
}

#[test]
fn spiking_conv_matches_loop_oracle() {
    let mut r = rng(2);
    for (c_in, c_out, h, k, s) in [
        (3, 4, 6, 2, 2),
        (5, 2, 7, 3, 1),
        (1, 1, 2, 2, 2),
        (8, 3, 9, 3, 3),
    ] {
        let x = random_spikes(&mut r, &[T, c_in, h, h], 0.4);
        let w = random_weights(&mut r, &[c_out, c_in, k, k]);
        let got = ref_spiking_conv2d(&x, &w, s).unwrap();
        let want = naive_spiking_conv(&x.unpack(), [T, c_in, h, h], w.data(), c_out, k, s);
        assert_eq!(got.data(), &want[..]);
    }
}

#[test]
fn u8_conv_matches_loop_oracle_and_repeats_over_time() {
    let mut r = rng(3);
    let img = random_image(&mut r, &[3, 8, 8]);
    let w = random_weights(&mut r, &[5, 3, 2, 2]);
    let got = ref_conv2d_u8(&img, &w, 2, T).unwrap();
    assert_eq!(got.shape(), &[T, 5, 4, 4]);
    assert_eq!(
        got.data(),
        &naive_u8_conv(img.data(), [3, 8, 8], w.data(), 5, 2, 2, T)[..]
    );
}

#[test]
fn linear_matches_loop_oracle() {
    let mut r = rng(4);
    let x = random_spikes(&mut r, &[T, 9, 33], 0.5);
    let w = random_weights(&mut r, &[7, 33]);
    let got = ref_spiking_linear(&x, &w).unwrap();
    assert_eq!(
        got.data(),
        &naive_linear(&x.unpack(), [T, 9, 33], w.data(), 7)[..]
    );
}

#[test]
fn ssa_raw_matches_matrix_products() {
    let mut r = rng(5);
    let s = [T, 3, 10, 6];
    let (q, k, v) = (
        random_spikes(&mut r, &s, 0.5),
        random_spikes(&mut r, &s, 0.5),
        random_spikes(&mut r, &s, 0.5),
    );
    let got = ref_ssa_raw(&q, &k, &v).unwrap();
    assert_eq!(
        got.data(),
        &naive_attention(&q.unpack(), &k.unpack(), &v.unpack(), s)[..]
    );
}

#[test]
fn ssa_with_zero_query_never_fires() {
    let mut r = rng(6);
    let s = [T, 2, 5, 4];
    let q = SpikeTensor::zeros(&s).unwrap();
    let (k, v) = (
        random_spikes(&mut r, &s, 0.7),
        random_spikes(&mut r, &s, 0.7),
    );
    assert!(ref_ssa_raw(&q, &k, &v)
        .unwrap()
        .data()
        .iter()
        .all(|&x| x == 0));
    assert_eq!(ref_ssa(&q, &k, &v, 0, &tflif()).unwrap().popcount(), 0);
}

#[test]
fn iand_truth_table_and_random() {
    let a = SpikeTensor::from_fn(&[4], |i| i & 1 == 1).unwrap();
    let b = SpikeTensor::from_fn(&[4], |i| i & 2 == 2).unwrap();
    // (a, b) = (0,0) (1,0) (0,1) (1,1)
    assert_eq!(
        iand_residual(&a, &b, ResidualOp::Iand).unwrap().unpack(),
        vec![0, 0, 1, 0]
    );
    assert_eq!(
        iand_residual(&a, &b, ResidualOp::Or).unwrap().unpack(),
        vec![0, 1, 1, 1]
    );

    let mut r = rng(7);
    let a = random_spikes(&mut r, &[T, 13, 70], 0.5);
    let b = random_spikes(&mut r, &[T, 13, 70], 0.5);
    let got = iand_residual(&a, &b, ResidualOp::Iand).unwrap().unpack();
    for ((g, x), y) in got.iter().zip(a.unpack()).zip(b.unpack()) {
        assert_eq!(*g, (1 - x) & y);
    }
}

#[test]
fn tflif_matches_scalar_recurrence() {
    let mut r = rng(8);
    for _ in 0..2000 {
        let acc: Vec<i8> = (0..T).map(|_| r.random()).collect();
        let (mantissa, bias, theta) = (
            r.random_range(-4..=4),
            r.random_range(-200..=200),
            r.random_range(1..=64),
        );
        let den = r.random_range(1..=8u32);
        let num = r.random_range(0..=den);
        let reset = if r.random_bool(0.5) {
            ResetMode::HardReset
        } else {
            ResetMode::SubtractThreshold
        };
        let carry = r.random_bool(0.7);
        let p = TflifParams::new(
            vec![ChannelParams {
                mantissa,
                shift: 0,
                bias,
                theta,
            }],
            (num, den),
            reset,
            carry,
            T,
        )
        .unwrap();
        let out = tflif_forward(&acc, &p, 0);
        let (spikes, membrane) = naive_tflif(
            &acc,
            mantissa as i64,
            bias as i64,
            theta as i64,
            (num as i64, den as i64),
            reset == ResetMode::HardReset,
            carry,
        );
        for (t, s) in spikes.iter().enumerate() {
            assert_eq!(out.spike(t), *s);
        }
        assert_eq!(out.membrane, membrane);
    }
}

#[test]
fn bn_fold_agrees_with_float_threshold() {
    let mut r = rng(9);
    let (mut agree, mut total) = (0u64, 0u64);
    while total < 100_000 {
        let bn = BatchNorm {
            gamma: vec![r.random_range(0.05..4.0) * if r.random_bool(0.2) { -1.0 } else { 1.0 }],
            beta: vec![r.random_range(-2.0..2.0)],
            mean: vec![r.random_range(-20.0..20.0)],
            var: vec![r.random_range(0.01..50.0)],
            eps: 1e-5,
        };
        let theta = r.random_range(0.1..2.0);
        let p = fold_bn_into_lif(&bn, theta, 12, (1, 2), ResetMode::HardReset, 1).unwrap();
        let c = *p.channel(0);
        let step = 1.0 / (1u64 << c.shift) as f64;
        for _ in 0..100 {
            let x: i8 = r.random();
            let float_fire = bn.apply(0, x as f64) >= theta;
            let fixed_fire = c.mantissa as i64 * x as i64 + c.bias as i64 >= 0;
            total += 1;
            if float_fire == fixed_fire {
                agree += 1;
            } else {
                let margin = (bn.apply(0, x as f64) - theta).abs();
                assert!(
                    margin <= (x.unsigned_abs() as f64 + 1.0) * step,
                    "disagreement {margin} far from boundary at x={x}, shift {}",
                    c.shift
                );
            }
        }
    }
    assert!(agree as f64 / total as f64 >= 0.999, "{agree}/{total}");
}

#[test]
fn bn_fold_rejects_degenerate_variance() {
    let bn = BatchNorm {
        gamma: vec![1.0],
        beta: vec![0.0],
        mean: vec![0.0],
        var: vec![-1.0],
        eps: 0.0,
    };
    assert!(matches!(
        fold_bn_into_lif(&bn, 1.0, 12, (1, 2), ResetMode::HardReset, 4),
        Err(Error::Fold(_))
    ));
}

#[test]
fn stateless_pipeline_commutes_with_timestep_permutation() {
    let mut r = rng(10);
    let x = random_spikes(&mut r, &[T, 6, 40], 0.5);
    let w = random_weights(&mut r, &[12, 40]);
    let mut p = TflifParams::uniform(-3, 8, T);
    p.carry_membrane = false;
    let perm = [2, 0, 3, 1];
    let direct = apply_tflif(&ref_spiking_linear(&x, &w).unwrap(), 3, &p, 2).unwrap();
    let permuted = apply_tflif(
        &ref_spiking_linear(&x.permute_timesteps(&perm).unwrap(), &w).unwrap(),
        3,
        &p,
        2,
    )
    .unwrap();
    assert_eq!(direct.permute_timesteps(&perm).unwrap(), permuted);
}

#[test]
fn head_split_merge_and_tokens_are_inverse_layouts() {
    let mut r = rng(11);
    let x = random_spikes(&mut r, &[T, 7, 24], 0.5);
    let split = split_heads(&x, 3).unwrap();
    assert_eq!(split.shape(), &[T, 3, 7, 8]);
    assert_eq!(split.get(&[2, 1, 5, 3]), x.get(&[2, 5, 8 + 3]));
    assert_eq!(merge_heads(&split).unwrap(), x);

    let fm = random_spikes(&mut r, &[T, 5, 3, 4], 0.5);
    let tok = to_tokens(&fm).unwrap();
    assert_eq!(tok.shape(), &[T, 12, 5]);
    assert_eq!(tok.get(&[1, 2 * 4 + 3, 4]), fm.get(&[1, 4, 2, 3]));
}

#[test]
fn full_model_shape_trace() {
    let spec = load_network_spec(spec_path("spikformer-v2-8-512.json")).unwrap();
    spec.validate().unwrap();
    let trace = spec.shape_trace();
    let stem: Vec<usize> = trace
        .iter()
        .filter(|(_, s)| s.len() == 4)
        .map(|(_, s)| s[2])
        .collect();
    assert_eq!(stem, vec![112, 56, 28, 14]);
    assert_eq!(
        trace.iter().find(|(_, s)| s.len() == 4).unwrap().1,
        vec![4, 64, 112, 112]
    );
    assert!(trace
        .iter()
        .filter(|(_, s)| s.len() == 3 && s[2] == 512)
        .all(|(_, s)| s[1] == 196));
    assert_eq!(trace.last().unwrap().1, vec![4, 1000]);
    assert_eq!(spec.tokens, 196);
}

#[test]
fn zero_image_with_negative_bias_is_silent() {
    let spec = load_network_spec(spec_path("desk.json")).unwrap();
    let img = ByteImage::zeros(&spec.input_shape);
    let trace = run_network_reference(&spec, &NetworkWeights::synthetic(&spec, 3), &img).unwrap();
    for rec in &trace.records {
        if let Some(s) = &rec.spikes {
            assert_eq!(s.popcount(), 0, "{} fired", rec.name);
        }
    }
    assert!(trace.logits.data().iter().all(|&v| v == 0));
    assert_eq!(trace.predicted_class(), 0);
}

/// sha256 over every layer's spikes (packed words, little endian) and the logits.
fn trace_digest(seed: u64) -> String {
    let spec = load_network_spec(spec_path("desk.json")).unwrap();
    let img = synthetic_image(spec.input_shape, seed);
    let trace =
        run_network_reference(&spec, &NetworkWeights::synthetic(&spec, seed), &img).unwrap();
    let mut h = Sha256::new();
    for rec in &trace.records {
        h.update(rec.name.as_bytes());
        if let Some(s) = &rec.spikes {
            for w in s.words() {
                h.update(w.to_le_bytes());
            }
        }
    }
    for v in trace.logits.data() {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[test]
fn desk_golden_trace_is_pinned() {
    assert_eq!(trace_digest(7), trace_digest(7));
    assert_eq!(trace_digest(7), PINNED_DESK_DIGEST);
}

const PINNED_DESK_DIGEST: &str = "26b8b296f5afcbd7afb1cb5710f6c99e4eb6de0d8ca6a025b87b17f1b222747b";

#[test]
fn malformed_spec_reports_field_path() {
    let good = std::fs::read_to_string(spec_path("desk.json")).unwrap();
    let bad = good.replace("\"num_heads\": 4", "\"num_heads\": \"four\"");
    match parse_network_spec(&bad) {
        Err(Error::Parse { path, .. }) => assert_eq!(path, "num_heads"),
        other => panic!("expected parse error, got {other:?}"),
    }
    let nested = good.replace("\"qkv\": 4", "\"qkv\": -1");
    match parse_network_spec(&nested) {
        Err(Error::Parse { path, .. }) => assert_eq!(path, "requant.qkv"),
        other => panic!("expected parse error, got {other:?}"),
    }
    assert!(matches!(parse_network_spec("{"), Err(Error::Parse { .. })));
}

#[test]
fn inconsistent_spec_is_rejected() {
    let good = std::fs::read_to_string(spec_path("desk.json")).unwrap();
    // 64 channels cannot split into 5 heads
    let bad = good.replace("\"num_heads\": 4", "\"num_heads\": 5");
    assert!(parse_network_spec(&bad).is_err());
}
