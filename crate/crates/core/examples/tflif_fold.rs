// SPDX-License-Identifier: Apache-2.0

//! Folds batch-norm statistics into fixed-point TFLIF parameters and runs a
//! neuron over four timesteps.

use snnaccel::golden::{fold_bn_into_lif, tflif_forward, BatchNorm, ResetMode};

fn main() -> snnaccel::Result<()> {
    let bn = BatchNorm {
        gamma: vec![1.5, -0.8],
        beta: vec![0.2, 0.1],
        mean: vec![3.0, -1.0],
        var: vec![4.0, 0.25],
        eps: 1e-5,
    };
    let params = fold_bn_into_lif(&bn, 1.0, 12, (1, 2), ResetMode::HardReset, 4)?;
    for (c, p) in params.channels().iter().enumerate() {
        println!(
            "channel {c}: mantissa {} shift {} bias {} (scale {:.5})",
            p.mantissa,
            p.shift,
            p.bias,
            p.scale()
        );
    }
    for acc in [[0i8, 0, 0, 0], [5, 5, 5, 5], [-20, 40, 3, 127]] {
        let a = tflif_forward(&acc, &params, 0);
        let b = tflif_forward(&acc, &params, 1);
        println!("inputs {acc:?}: spikes {:04b} / {:04b}", a.spikes, b.spikes);
    }
    Ok(())
}
