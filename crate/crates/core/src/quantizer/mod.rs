//! Vector quantizers: k-means, product quantization and OPQ.

mod blob;
mod kmeans;
mod opq;
mod pq;

pub use blob::{read_codebook, read_opq, write_codebook, write_opq, BLOB_MAGIC, BLOB_VERSION};
pub use kmeans::{kmeans_refine, kmeans_train, KMeans, KMeansConfig};
pub use opq::{opq_train, OpqConfig, OpqModel, OpqTraining};
pub use pq::{pq_train, AdcTable, Codebook, PqCode, PqTraining};

pub(crate) use blob::{
    codebook_body, opq_body, read_blob_header, read_codebook_body, read_opq_body,
    write_blob_header, BlobKind,
};
