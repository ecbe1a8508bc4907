//! Multi-instance learning with bag reference vectors.
//!
//! A bag of instances is turned into a fixed-length vector of set-to-set
//! distances (extended Hausdorff operators) to an ordered set of reference
//! bags, and the vectors are classified with a linear SVM.
//!
//! - [`data`]: bags, instances, labels and datasets
//! - [`dist`]: Hausdorff distances and the six k-averaged operators
//! - [`brv`]: bag reference vectors and reference sets
//! - [`svm`]: linear SVM trained by dual coordinate descent
//! - [`eval`]: repeated stratified cross-validation
//! - [`io`]: dataset, sparse-vector and model file formats
//! - [`cli`]: the `mibrv` command line

pub mod brv;
pub mod cli;
pub mod data;
pub mod dist;
pub mod error;
pub mod eval;
pub mod io;
pub mod svm;
pub mod synthetic;

pub use brv::{
    featurize, featurize_all, BagReferenceVector, FeaturizerBinding, Fingerprint, Normalization,
    ReferenceSet,
};
pub use data::{validate_dataset, Bag, BagLabel, Dataset, Instance};
pub use dist::{DistParams, Inner, OperatorId, Outer};
pub use error::{Error, Result};
pub use eval::{run_cv, CvConfig, CvReport};
pub use svm::{LinearModel, SvmConfig};
