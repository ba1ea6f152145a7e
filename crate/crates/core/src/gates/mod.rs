//! Composite gates built from the arithmetic black box.
//!
//! Every gate works on batches: the parallel loops of the matching protocol
//! become single calls here, so a batch of any size costs the same number of
//! communication rounds as a single element.

mod compare;
mod demux;
mod max_weight;
mod select;
mod shuffle;

use thiserror::Error;

use crate::abb::AbbError;

pub use compare::{gt, gt_batch, lt_public_bits, prefix_or_msb};
pub use demux::{bit_length, demux, demux_batch};
pub use max_weight::{max_weight_set, MaxWeightOutput, SubsetEncoding};
pub use select::{dot_product, select, select_batch};
pub use shuffle::{rev_shuffle, shuffle_nodes, PermutationHandle, ShuffleMode};

#[derive(Debug, Error)]
pub enum GateError {
    #[error(transparent)]
    Abb(#[from] AbbError),
    #[error("comparison width {bits} out of range for a {k}-bit ring")]
    CompareWidth { bits: u32, k: u32 },
    #[error("size mismatch: {0}")]
    Size(String),
    #[error("permutation handle is for {handle} nodes, matrix has {matrix}")]
    HandleMismatch { handle: usize, matrix: usize },
}

impl GateError {
    pub fn is_disconnect(&self) -> bool {
        matches!(self, GateError::Abb(a) if a.is_disconnect())
    }
}

pub type Result<T> = std::result::Result<T, GateError>;
