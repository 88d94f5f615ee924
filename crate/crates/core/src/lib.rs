// SPDX-License-Identifier: Apache-2.0

//! Bit-exact golden model and cycle-level simulator for a spiking
//! transformer accelerator built from 512 processing units of 8 PEs each.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`] and [`io`] hold packed spike tensors and their file format.
//! * [`golden`] is the integer reference model: TFLIF neurons, convolutions,
//!   linear layers, spiking self-attention and the full network.
//! * [`pe`] models one cycle of the PE module and its configurable adder tree.
//! * [`dataflow`] maps each layer type onto the PE module and executes it.
//! * [`memory`] tracks the on-chip SRAM banks and the split-accumulation buffer.
//! * [`harness`] drives whole networks and produces reports.

pub mod dataflow;
pub mod error;
pub mod golden;
pub mod harness;
pub mod io;
pub mod memory;
pub mod pe;
pub mod tensor;

pub use error::{Error, Result};
