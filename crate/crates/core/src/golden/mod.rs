// SPDX-License-Identifier: Apache-2.0

//! Integer reference model. Every simulator output is checked against it.

pub mod network;
pub mod ops;
pub mod tflif;

pub use network::{
    run_network_reference, LayerKind, LayerSpec, NetworkSpec, NetworkTrace, NetworkWeights,
};
pub use ops::{
    apply_tflif, iand_residual, ref_conv2d_u8, ref_spiking_conv2d, ref_spiking_linear, ref_ssa,
    ref_ssa_raw, ResidualOp,
};
pub use tflif::{fold_bn_into_lif, tflif_forward, BatchNorm, ResetMode, TflifParams};
