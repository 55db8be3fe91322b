//! Dataset-construction toolkit for weakly supervised image pretraining.
//!
//! The crate covers two halves of the pipeline:
//!
//! * near-duplicate image detection: R-MAC pooling, PCA whitening, 8-bit
//!   scalar quantization, OPQ rotation, an inverted multi-index with residual
//!   product quantization, and a two-stage (approximate, then exact) duplicate
//!   check ([`descriptor`], [`quantizer`], [`ivf`], [`dedup`]);
//! * label and schedule preparation: hashtag-to-synset matching and canonical
//!   merging, Zipfian resampling, 1/k multi-label targets, label-noise
//!   injection and learning-rate schedules ([`hashtag`], [`sampler`],
//!   [`schedule`]).
//!
//! Data-parallel inner loops run on rayon when the `parallel` feature is
//! enabled (the default) and fall back to plain iteration otherwise. Results
//! are identical either way; see [`par`].

pub mod dedup;
pub mod descriptor;
pub mod error;
pub mod hashtag;
pub mod ivf;
pub mod par;
pub mod quantizer;
pub mod sampler;
pub mod schedule;
pub mod seed;
pub mod vecmath;

mod binio;

pub use error::{Error, Result};
