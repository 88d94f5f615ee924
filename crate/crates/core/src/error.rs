// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("argument error: {0}")]
    Argument(String),

    #[error("fold error: {0}")]
    Fold(String),

    #[error("precision error: {0}")]
    Precision(String),

    #[error(
        "width error: value {value} does not fit in {bits}-bit signed accumulator ({context})"
    )]
    Width {
        value: i64,
        bits: u32,
        context: String,
    },

    #[error("mapping error: {0}")]
    Mapping(String),

    #[error("unsupported layer: {0}")]
    UnsupportedLayer(String),

    #[error("scheduling error: {0}")]
    Scheduling(String),

    #[error("policy error: {0}")]
    Policy(String),

    #[error("memory error in bank {bank}: {detail}")]
    Memory { bank: String, detail: String },

    #[error("SRAM budget exceeded: {total_bits} bits requested, budget {budget_bits} bits (over by {over_bits})")]
    Budget {
        total_bits: u64,
        budget_bits: u64,
        over_bits: u64,
    },

    #[error("layer {index} ({name}): {source}")]
    Layer {
        index: usize,
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("tensor file error: {0}")]
    Format(String),

    #[error("report error: {0}")]
    Report(String),

    #[error("equivalence failure in layer {layer}: {detail}")]
    Mismatch { layer: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn in_layer(self, index: usize, name: &str) -> Error {
        Error::Layer {
            index,
            name: name.to_string(),
            source: Box::new(self),
        }
    }
}
