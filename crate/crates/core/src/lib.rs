//! ck-means: fuzzy c-means clustering followed by a membership-band filter
//! that isolates the points lying between clusters, and a crisp k-means
//! re-clustering of the surviving membership vectors. Cluster counts at both
//! clustering stages are chosen by scanning the mean silhouette index.
//!
//! Inner loops (membership updates, assignment steps, silhouette sums) run on
//! rayon when the `parallel` feature is enabled (the default). Every reduction
//! happens in a fixed order, so results are bitwise identical regardless of
//! the worker count and of whether the feature is enabled.

pub mod dataset;
pub mod distance;
mod error;
pub mod fcm;
pub mod filter;
pub mod kmeans;
mod matrix_serde;
pub mod metrics;
mod par;
pub mod pipeline;
pub mod report;
pub mod seed;

pub use dataset::{generate_blobs, minmax_normalize, read_csv, write_csv, BlobSpec, DataMatrix};
pub use error::{Error, Result};
pub use fcm::{
    fcm_centroids, fcm_fit, fcm_membership, fcm_objective, CentroidSet, FcmConfig, FcmResult,
    MembershipMatrix,
};
pub use filter::{apply_filter, make_range, FilterRange, FilteredSelection};
pub use kmeans::{kmeans_fit, kmeans_predict, CrispAssignment, KmeansConfig};
pub use metrics::{mean_si, silhouette, SilhouetteReport};
pub use pipeline::{
    compare_methods, run_ckmeans, select_k, CkmeansOutcome, CkmeansResult, ComparisonTable,
    PipelineConfig, NO_INTERSECTION_MESSAGE,
};

/// Name of the execution backend compiled in: `"rayon"` or `"sequential"`.
pub const EXECUTION_MODE: &str = par::MODE;
