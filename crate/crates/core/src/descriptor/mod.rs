//! From convolutional feature maps to storage- and index-ready descriptors.
//!
//! The chain is: [`rmac_pool`] (multi-scale regional max pooling, 2048-d by
//! default) → [`PcaModel::apply`] (whitening to 512-d) →
//! [`ScalarQuantizer::encode`] (one byte per dimension for on-disk storage).

mod file;
mod pca;
mod resize;
mod rmac;
mod scalar;

pub use file::{DType, DescriptorFile};
pub use pca::{pca_train, PcaModel};
pub use resize::resize_plan;
pub use rmac::{rmac_pool, rmac_regions, FeatureMap, Region};
pub use scalar::{ScalarQuantized, ScalarQuantizer};

pub(crate) use pca::covariance_eigen;

/// Default raw R-MAC dimension (channel count of the truncated network).
pub const RAW_DIM: usize = 2048;
/// Default whitened dimension.
pub const WHITENED_DIM: usize = 512;
/// Default long side for the resize plan.
pub const TARGET_LONG_SIDE: u32 = 400;
/// Default eigenvalue floor before the inverse square root.
pub const EIG_FLOOR: f64 = 1e-10;
