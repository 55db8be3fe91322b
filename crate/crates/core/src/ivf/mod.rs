//! Inverted multi-index over OPQ-rotated descriptors.
//!
//! A two-half coarse product quantizer sends each vector to one of
//! `2^(2·bits)` cells; the residual from the cell centre is product-quantized
//! and stored in that cell's list. Search probes the nearest non-empty cells
//! and ranks their entries by asymmetric distance with a bounded heap.

mod coarse;
mod file;
mod index;
mod pipeline;

pub use coarse::{CellId, CoarseQuantizer, HalfDistances};
pub use file::{read_index, write_index, INDEX_MAGIC, INDEX_VERSION};
pub use index::{DuplicatePolicy, InvertedIndex, Neighbor};
pub use pipeline::{QuantizerSet, QuantizerSetConfig, QuantizerSetTraining};

/// Default number of neighbours returned per query.
pub const DEFAULT_K: usize = 128;
/// Default number of probed cells.
pub const DEFAULT_NPROBE: usize = 256;
