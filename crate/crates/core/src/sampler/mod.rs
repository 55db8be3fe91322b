//! Frequency-aware resampling of a tagged image corpus, multi-label targets
//! and synthetic label noise.
//!
//! Each hashtag `h` gets a replication factor `r(h) = max(1, φ(t/f(h)))`
//! where `f(h)` is its image count, `t` a threshold and `φ` the identity
//! (uniform) or square root. An image is repeated `r(I) = max r(h)` times and
//! each of its tags is kept in only about `r(h)` of those copies.

mod corpus;
mod epoch;
mod noise;
mod plan;
mod target;

pub use corpus::{read_records, write_records, Corpus, FrequencyTable, ImageRecord, Vocabulary};
pub use epoch::{build_epoch_list, epoch_tag_totals, read_epoch, write_epoch, EpochCopy, EpochList};
pub use noise::{inject_noise, NoiseOutcome};
pub use plan::{
    replication_factor, rounded_copies, rounding_uniforms, select_threshold, stochastic_round, Mode,
    ReplicationPlan,
};
pub use target::{make_target, TargetVector};

/// Seed labels shared by threshold selection and materialisation, so that a
/// threshold chosen for a target length yields exactly that length.
pub(crate) const ROUNDING_LABEL: &str = "sampler/round";
pub(crate) const SHUFFLE_LABEL: &str = "sampler/shuffle";
pub(crate) const NOISE_LABEL: &str = "sampler/noise";
